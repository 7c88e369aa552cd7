"""Compiled vs numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Times one loss+gradient evaluation and one full descent per backend on each
preset, then a complete 30-restart fit in a subprocess per backend (the
backend is chosen at import, so the fit needs a fresh interpreter).
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ebransac import synth
from ebransac.kernels import EXPONENTIAL, GAUSSIAN, LINREG, backends

CASES = {"linreg": (LINREG, [0.5, 1.0], 5.0),
         "gaussian": (GAUSSIAN, [0.0, 0.0], 5.0),
         "exponential": (EXPONENTIAL, [0.0], 4.0)}

FIT_SNIPPET = """
import time
from ebransac import synth, kernels
from ebransac.ebr import EbrConfig, fit
from ebransac.experiments import INIT_BOXES
from ebransac.models import get_model
data = synth.generate(synth.preset({preset!r}))
t = time.perf_counter()
fit(get_model({preset!r}), data, EbrConfig({beta}, init=INIT_BOXES[{preset!r}]))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def kernel_table(repeat: int) -> None:
    mods = backends()
    print(f"{'preset':<12}{'backend':<9}{'value_grad us':>15}{'descend ms':>12}")
    for preset, (kind, u0, beta) in CASES.items():
        x, y = synth.generate(synth.preset(preset)).columns()
        u0 = np.array(u0)
        for name, mod in mods.items():
            vg = timeit.timeit(lambda: mod.ebr_value_grad_u(kind, u0, x, y, beta), number=repeat) / repeat
            de = timeit.timeit(lambda: mod.descend(kind, u0, x, y, beta, 10000, 1e-8, 1.0, 0.5, 1e-4),
                               number=max(1, repeat // 20)) / max(1, repeat // 20)
            print(f"{preset:<12}{name:<9}{vg * 1e6:>15.1f}{de * 1e3:>12.2f}")


def fit_table() -> None:
    print(f"\n{'preset':<12}{'backend':<9}{'fit s':>8}")
    for preset, (_, _, beta) in CASES.items():
        for pure in ("0", "1"):
            env = {**os.environ, "EBRANSAC_PURE_PYTHON": pure}
            out = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(preset=preset, beta=beta)],
                                 env=env, capture_output=True, text=True, check=True).stdout.split()
            print(f"{preset:<12}{out[0]:<9}{float(out[1]):>8.3f}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if "cython" not in backends():
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)
    kernel_table(args.repeat)
    fit_table()


if __name__ == "__main__":
    main()
