"""Experiment runners behind the CLI: fits, beta sweeps, loss landscapes, jumps.

Every CSV starts with ``#`` lines holding the resolved config; bodies are
written in a fixed row order with repr-formatted floats, so reruns with the
same config are byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import baselines, synth
from .ebr import EbrConfig, InitBox, fit
from .models import INLIER_RATIO, QuadratureError, get_model, kld_gaussian, population_ebr_loss_exponential

log = logging.getLogger(__name__)

METHODS = ("ebr", "ransac", "lo-ransac", "classical")

# Restart boxes wide enough to reach every basin seen in the experiments.
INIT_BOXES = {
    "linreg": InitBox((-5.0, -10.0), (5.0, 10.0)),
    "gaussian": InitBox((-3.0, 0.1), (3.0, 2.0)),
    "exponential": InitBox((0.05,), (5.0,)),
}
TRUTH = {"linreg": (1.0, 3.0), "gaussian": (-1.0, 0.2), "exponential": (2.0,)}
METRIC_NAMES = {"linreg": "mse", "gaussian": "kld", "exponential": "abs_rate_error"}
RANSAC_DEFAULTS = {
    "linreg": {"hypo_size": 2, "t_cons": 0.05},
    "gaussian": {"hypo_size": 5, "t_cons": 1.5},
    "exponential": {"hypo_size": 5, "t_cons": 2.0},
}


@dataclass
class ExperimentConfig:
    preset: str = "linreg"
    betas: list[float] = field(default_factory=lambda: [5.0])
    methods: list[str] = field(default_factory=lambda: ["ebr", "classical"])
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str = "out"
    restarts: int = 30
    ransac_iterations: int = 200
    hypo_size: int | None = None
    t_cons: float | None = None
    min_consensus: int | None = None
    lam_min: float = 0.2
    lam_max: float = 5.0
    n_lam: int = 241
    mixture_ratio: float = INLIER_RATIO
    jobs: int = 1

    def __post_init__(self):
        if self.preset not in synth.PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        self.betas = [float(b) for b in self.betas]
        self.seeds = [int(s) for s in self.seeds]
        if not self.betas:
            raise ValueError("need at least one beta")
        if any(b1 <= b0 for b0, b1 in zip(self.betas, self.betas[1:])):
            raise ValueError("beta grid must be strictly increasing")
        if not self.seeds:
            raise ValueError("need at least one seed")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}; choose from {METHODS}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**mapping)

    def to_dict(self) -> dict:
        return asdict(self)


def metric(preset: str, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    truth = np.asarray(TRUTH[preset])
    if preset == "linreg":
        return float(np.mean((theta - truth) ** 2))
    if preset == "gaussian":
        return kld_gaussian(theta, truth)
    return float(abs(theta[0] - truth[0]))


def classical_fit(preset: str, data) -> np.ndarray:
    if preset == "linreg":
        return np.array(baselines.lms_fit(data))
    if preset == "gaussian":
        return np.array(baselines.gaussian_mle(data))
    return np.array([baselines.exponential_mle(data)])


def ransac_config(config: ExperimentConfig, n: int, seed: int, local_opt: bool) -> baselines.RansacConfig:
    d = RANSAC_DEFAULTS[config.preset]
    return baselines.RansacConfig(
        hypo_size=config.hypo_size or d["hypo_size"],
        iterations=config.ransac_iterations,
        t_cons=config.t_cons if config.t_cons is not None else d["t_cons"],
        min_consensus=config.min_consensus if config.min_consensus is not None else math.ceil(n / 2),
        local_opt=local_opt,
        rng_seed=seed,
    )


def fit_method(config: ExperimentConfig, method: str, data, beta: float, seed: int):
    """Run one estimator; returns (theta, serializable result dict)."""
    model = get_model(config.preset)
    if method == "ebr":
        res = fit(model, data, EbrConfig(beta=beta, restarts=config.restarts,
                                         init=INIT_BOXES[config.preset], rng_seed=seed))
        return res.theta_star, res.to_dict()
    if method in ("ransac", "lo-ransac"):
        rc = ransac_config(config, len(data), seed, method == "lo-ransac")
        res = baselines.ransac_fit(model, data, rc)
        return res.theta_star, res.to_dict()
    theta = classical_fit(config.preset, data)
    return theta, {"theta": theta.tolist(), "method": "classical"}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list], meta: dict) -> Path:
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(meta, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


@dataclass
class RunOutput:
    paths: list[Path]
    rows: list[list]
    failures: int = 0


def run_fit(config: ExperimentConfig) -> RunOutput:
    """Fit every requested method per (beta, seed); one failure never aborts the rest."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, paths, failures = [], [], 0
    dim = len(TRUTH[config.preset])
    for seed in config.seeds:
        data = synth.generate(synth.preset(config.preset, seed))
        for beta in config.betas:
            for method in config.methods:
                try:
                    theta, payload = fit_method(config, method, data, beta, seed)
                    row = [*map(float, theta), metric(config.preset, theta), ""]
                except Exception as exc:  # per-method isolation
                    log.warning("%s failed for seed %s beta %s: %s", method, seed, beta, exc)
                    failures += 1
                    payload = {"error": str(exc)}
                    row = [math.nan] * (dim + 1) + [str(exc)]
                payload["experiment"] = {"preset": config.preset, "seed": seed, "beta": beta, "method": method}
                p = out / f"fit_{config.preset}_{method}_beta{beta:g}_seed{seed}.json"
                p.write_text(json.dumps(payload, sort_keys=True) + "\n")
                paths.append(p)
                rows.append([config.preset, seed, beta, method, *row])
    header = ["preset", "seed", "beta", "method", *[f"theta_{i}" for i in range(dim)],
              METRIC_NAMES[config.preset], "error"]
    paths.append(write_csv(out / f"comparison_{config.preset}.csv", header, rows, config.to_dict()))
    return RunOutput(paths, rows, failures)


def _sweep_cell(args):
    config, beta, seed, fixed = args
    data = synth.generate(synth.preset(config.preset, seed))
    row, errors = [beta, seed], []
    dim = len(TRUTH[config.preset])
    for method in config.methods:
        if method in fixed:
            theta = fixed[method]
        else:
            try:
                theta, _ = fit_method(config, method, data, beta, seed)
            except Exception as exc:
                errors.append(f"{method}: {exc}")
                theta = None
        if theta is None:
            row += [math.nan] * (dim + 1)
        else:
            row += [*map(float, theta), metric(config.preset, theta)]
    return row + ["; ".join(errors)], bool(errors)


def run_beta_sweep(config: ExperimentConfig) -> RunOutput:
    """One fit per (beta, seed). beta-independent methods are fit once per seed
    and repeated on every row as reference columns."""
    dim = len(TRUTH[config.preset])
    fixed_by_seed = {}
    for seed in config.seeds:
        data = synth.generate(synth.preset(config.preset, seed))
        fixed = {}
        for method in config.methods:
            if method == "ebr":
                continue
            try:
                fixed[method], _ = fit_method(config, method, data, config.betas[0], seed)
            except Exception as exc:
                log.warning("%s failed for seed %s: %s", method, seed, exc)
                fixed[method] = None
        fixed_by_seed[seed] = fixed
    cells = [(config, beta, seed, fixed_by_seed[seed]) for beta in config.betas for seed in config.seeds]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    results.sort(key=lambda r: (r[0][0], r[0][1]))
    rows = [r for r, _ in results]
    failures = sum(f for _, f in results) + sum(v is None for f in fixed_by_seed.values() for v in f.values())
    header = ["beta", "seed"]
    for m in config.methods:
        header += [f"{m}_theta_{i}" for i in range(dim)] + [f"{m}_{METRIC_NAMES[config.preset]}"]
    header.append("error")
    path = write_csv(Path(config.out_dir) / f"sweep_{config.preset}.csv", header, rows, config.to_dict())
    return RunOutput([path], rows, failures)


def lam_grid(config: ExperimentConfig) -> np.ndarray:
    return np.geomspace(config.lam_min, config.lam_max, config.n_lam)


def run_landscape(config: ExperimentConfig) -> RunOutput:
    """Population (N -> infinity) loss of the exponential model on a rate grid per beta."""
    if config.preset != "exponential":
        raise ValueError("landscape scans are defined for the exponential preset only")
    rows, failures = [], 0
    for beta in config.betas:
        for lam in lam_grid(config):
            try:
                val, err = population_ebr_loss_exponential(float(lam), beta, config.mixture_ratio,
                                                           return_error=True)
                rows.append([beta, float(lam), val, err, ""])
            except QuadratureError as exc:
                failures += 1
                rows.append([beta, float(lam), exc.estimate, exc.error, str(exc)])
    path = write_csv(Path(config.out_dir) / "landscape_exponential.csv",
                     ["beta", "lam", "loss", "quad_error", "error"], rows, config.to_dict())
    return RunOutput([path], rows, failures)


def local_minima(lams, values) -> list[tuple[float, float]]:
    """Interior grid points lower than both neighbours, as (lam, value)."""
    v = np.asarray(values, dtype=float)
    idx = [i for i in range(1, v.size - 1) if v[i] < v[i - 1] and v[i] < v[i + 1]]
    return [(float(lams[i]), float(v[i])) for i in idx]


def landscape_minima(rows) -> dict[float, list[tuple[float, float]]]:
    by_beta: dict[float, list] = {}
    for beta, lam, val, *_ in rows:
        by_beta.setdefault(float(beta), []).append((float(lam), float(val)))
    out = {}
    for beta, pts in by_beta.items():
        pts.sort()
        lams, vals = zip(*pts)
        out[beta] = local_minima(lams, vals)
    return out


@dataclass(frozen=True)
class Jump:
    beta_c: float
    uncertainty: float
    magnitude: float
    interval: tuple[float, float]


def detect_jump(betas, values) -> Jump | None:
    """Largest |delta value| between consecutive grid points, if it stands out.

    Returns None ("no jump") unless that step exceeds 3x the median step.
    """
    b = np.asarray(betas, dtype=float)
    v = np.asarray(values, dtype=float)
    if b.size < 2 or np.any(np.diff(b) <= 0):
        raise ValueError("need a strictly increasing grid with at least two points")
    d = np.abs(np.diff(v))
    i = int(np.argmax(d))
    if not d[i] > 3.0 * np.median(d):
        return None
    return Jump(beta_c=float((b[i] + b[i + 1]) / 2), uncertainty=float(b[i + 1] - b[i]),
                magnitude=float(d[i]), interval=(float(b[i]), float(b[i + 1])))


def detect_jump_csv(path, column: str = "ebr_theta_0") -> dict[int, Jump | None]:
    """Per-seed jump detection on a sweep CSV."""
    rows = read_csv(path)
    if rows and column not in rows[0]:
        raise ValueError(f"column {column!r} not in sweep file")
    by_seed: dict[int, list] = {}
    for r in rows:
        by_seed.setdefault(int(r["seed"]), []).append((float(r["beta"]), float(r[column])))
    out = {}
    for seed, pts in sorted(by_seed.items()):
        pts.sort()
        betas, vals = zip(*pts)
        out[seed] = detect_jump(betas, vals)
    return out
