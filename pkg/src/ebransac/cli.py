"""Command-line entry point.

    ebransac fit --preset linreg --beta 5 --out out/
    ebransac sweep --preset exponential --beta-grid 4:8:0.05 --seeds 0-9 --out out/
    ebransac landscape --beta 5,6.5,8 --out out/
    ebransac jump --in out/sweep_exponential.csv
    ebransac theory tcut --q 0.7,0.2,0.1 --beta -1
    ebransac gibbs run --preset linreg --beta 5 --seed 0 --out trace.jsonl
    ebransac synth gen --preset gaussian --seed 3 --out data.csv

Exit status: 0 on success, 2 when some cells or methods failed, 1 on a fatal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import experiments, gibbs, synth, theory
from .models import get_model

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def parse_floats(text: str) -> list[float]:
    """'1,2.5,3' or a grid 'start:stop:step' (stop included when on the grid)."""
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        n = int(round((stop - start) / step))
        grid = start + step * np.arange(n + 1)
        return [round(float(v), 12) for v in grid if v <= stop + 1e-9 * abs(step)]
    return [float(t) for t in text.split(",") if t.strip()]


def parse_seeds(text: str) -> list[int]:
    """'3', '0,4,7' or an inclusive range '0-9'."""
    if "-" in text.strip()[1:]:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _common(p: argparse.ArgumentParser, beta=True):
    p.add_argument("--config", type=Path, help="TOML file with experiment settings")
    p.add_argument("--preset", choices=synth.PRESETS)
    p.add_argument("--seed", type=int, help="single seed")
    p.add_argument("--seeds", help="seed list '0,1,2' or range '0-9'")
    p.add_argument("--out", help="output directory")
    p.add_argument("--restarts", type=int)
    p.add_argument("--methods", help="comma list of " + ",".join(experiments.METHODS))
    if beta:
        p.add_argument("--beta", help="beta value or comma list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebransac", description="EB-RANSAC experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit methods on a preset and compare to the truth")
    _common(p)

    p = sub.add_parser("sweep", help="fit over a beta grid")
    _common(p)
    p.add_argument("--beta-grid", help="start:stop:step")
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("landscape", help="population loss over a rate grid (exponential)")
    _common(p)
    p.add_argument("--lam-grid", help="lam_min:lam_max:n_points (geometric)")

    p = sub.add_parser("jump", help="detect the jump in a sweep CSV")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--column", default="ebr_theta_0")

    p = sub.add_parser("theory", help="discrete cut-off solution")
    tsub = p.add_subparsers(dest="theory_cmd", required=True)
    t = tsub.add_parser("tcut", help="T_cut, zeta and the minimizing distribution")
    t.add_argument("--q", required=True, help="comma-separated probabilities")
    t.add_argument("--beta", type=float, required=True)
    t.add_argument("--tol", type=float)

    p = sub.add_parser("gibbs", help="deterministic alternating maximization")
    gsub = p.add_subparsers(dest="gibbs_cmd", required=True)
    g = gsub.add_parser("run")
    g.add_argument("--preset", choices=synth.PRESETS, default="linreg")
    g.add_argument("--beta", type=float, default=5.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--hypo-size", type=int, default=2)
    g.add_argument("--max-rounds", type=int, default=50)
    g.add_argument("--out", type=Path, help="JSON-lines trace file (stdout if omitted)")

    p = sub.add_parser("synth", help="synthetic datasets")
    ssub = p.add_subparsers(dest="synth_cmd", required=True)
    s = ssub.add_parser("gen")
    s.add_argument("--preset", choices=synth.PRESETS, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, required=True)
    return parser


def resolve_config(args) -> experiments.ExperimentConfig:
    """Defaults, then the TOML file, then command-line flags."""
    settings: dict = {}
    if args.config:
        with open(args.config, "rb") as fh:
            settings.update(tomllib.load(fh))
    if args.preset:
        settings["preset"] = args.preset
    if getattr(args, "beta", None):
        settings["betas"] = parse_floats(args.beta)
    if getattr(args, "beta_grid", None):
        settings["betas"] = parse_floats(args.beta_grid)
    if args.seeds:
        settings["seeds"] = parse_seeds(args.seeds)
    elif args.seed is not None:
        settings["seeds"] = [args.seed]
    if args.out:
        settings["out_dir"] = args.out
    if args.restarts:
        settings["restarts"] = args.restarts
    if args.methods:
        settings["methods"] = [m.strip() for m in args.methods.split(",")]
    if getattr(args, "jobs", None):
        settings["jobs"] = args.jobs
    if getattr(args, "lam_grid", None):
        lo, hi, n = args.lam_grid.split(":")
        settings.update(lam_min=float(lo), lam_max=float(hi), n_lam=int(n))
    return experiments.ExperimentConfig.from_mapping(settings)


def _report(result: experiments.RunOutput) -> int:
    for p in result.paths:
        print(p)
    return EXIT_PARTIAL if result.failures else EXIT_OK


def cmd_fit(args):
    return _report(experiments.run_fit(resolve_config(args)))


def cmd_sweep(args):
    return _report(experiments.run_beta_sweep(resolve_config(args)))


def cmd_landscape(args):
    if not args.preset:
        args.preset = "exponential"
    config = resolve_config(args)
    result = experiments.run_landscape(config)
    minima = experiments.landscape_minima(result.rows)
    summary = Path(config.out_dir) / "landscape_minima.json"
    summary.write_text(json.dumps({"config": config.to_dict(),
                                   "minima": {repr(b): m for b, m in minima.items()}}, sort_keys=True) + "\n")
    result.paths.append(summary)
    return _report(result)


def cmd_jump(args):
    found = experiments.detect_jump_csv(args.inp, args.column)
    out = {}
    for seed, jump in found.items():
        out[str(seed)] = None if jump is None else {
            "beta_c": jump.beta_c, "uncertainty": jump.uncertainty,
            "magnitude": jump.magnitude, "interval": list(jump.interval)}
        if jump is None:
            print(f"seed {seed}: no jump detected", file=sys.stderr)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_theory(args):
    q = theory.DiscreteDistribution.normalized(parse_floats(args.q))
    sol = theory.solve_t_cut(q, args.beta, args.tol)
    print(json.dumps({"beta": sol.beta, "t_cut": sol.t_cut, "zeta": sol.zeta,
                      "p": sol.p.probs.tolist(), "q": q.probs.tolist()}, indent=2))
    return EXIT_OK


def cmd_gibbs(args):
    spec = synth.preset(args.preset, args.seed)
    data = synth.generate(spec)
    model = get_model(args.preset)
    rng = np.random.default_rng(args.seed)
    w0 = np.zeros(len(data), dtype=np.int8)
    w0[rng.choice(len(data), size=args.hypo_size, replace=False)] = 1
    trace = gibbs.alternate_maximize(model, data, args.beta, w0, max_rounds=args.max_rounds)
    header = json.dumps({"config": {"preset": args.preset, "beta": args.beta, "seed": args.seed,
                                    "hypo_size": args.hypo_size, "max_rounds": args.max_rounds},
                         "converged": trace.converged, "rounds": trace.iterations})
    text = header + "\n" + trace.to_jsonl()
    if args.out:
        args.out.write_text(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args):
    data, labels = synth.save(args.out, synth.preset(args.preset, args.seed))
    print(f"{args.out}: {len(data)} points, {int(labels.sum())} inliers")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "sweep": cmd_sweep, "landscape": cmd_landscape, "jump": cmd_jump,
            "theory": cmd_theory, "gibbs": cmd_gibbs, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        logging.getLogger("ebransac").error("%s: %s", type(exc).__name__, exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
