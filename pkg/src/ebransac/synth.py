"""Seeded synthetic datasets for the three benchmark problems.

Inliers, outliers and the final shuffle each draw from their own child stream
of one PCG64 seed sequence, so changing the outlier count leaves the inlier
draws untouched. Labels (1 = inlier) never enter the Dataset itself.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .core import Dataset

PRESETS = ("linreg", "gaussian", "exponential")


@dataclass(frozen=True)
class PresetSpec:
    name: str
    n_inliers: int
    n_outliers: int
    inlier_params: tuple[float, ...]
    outlier_params: tuple[float, ...]
    noise_scale: float = 0.0
    x_range: tuple[float, float] = (-3.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        if self.name not in PRESETS:
            raise ValueError(f"unknown preset {self.name!r}")
        if self.n_inliers <= 0 or self.n_outliers <= 0:
            raise ValueError("inlier and outlier counts must be positive")


def preset(name: str, seed: int = 0, **overrides) -> PresetSpec:
    """Default spec for a named problem.

    linreg: 100 points near y = x + 3 (x ~ U[-3, 3], noise sd 0.1) and 20
    outliers from an isotropic Gaussian centred at (1, 0) with sd 1.5.
    gaussian: 200 from N(-1, 0.2^2), 40 from N(1, 0.1^2).
    exponential: 200 from Exp(rate 2), 40 from U[6, 7].
    """
    if name == "linreg":
        spec = PresetSpec(name, 100, 20, (1.0, 3.0), (1.0, 0.0, 1.5), noise_scale=0.1, seed=seed)
    elif name == "gaussian":
        spec = PresetSpec(name, 200, 40, (-1.0, 0.2), (1.0, 0.1), seed=seed)
    elif name == "exponential":
        spec = PresetSpec(name, 200, 40, (2.0,), (6.0, 7.0), seed=seed)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    return replace(spec, **overrides)


def generate_labeled(spec: PresetSpec) -> tuple[Dataset, np.ndarray]:
    s_in, s_out, s_shuffle = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(3))
    ni, no = spec.n_inliers, spec.n_outliers
    y = None
    if spec.name == "linreg":
        a, b = spec.inlier_params
        xi = s_in.uniform(*spec.x_range, size=ni)
        yi = a * xi + b + spec.noise_scale * s_in.standard_normal(ni)
        cx, cy, scale = spec.outlier_params
        out = s_out.normal(loc=(cx, cy), scale=scale, size=(no, 2))
        x = np.concatenate([xi, out[:, 0]])
        y = np.concatenate([yi, out[:, 1]])
    elif spec.name == "gaussian":
        (mi, si), (mo, so) = spec.inlier_params, spec.outlier_params
        x = np.concatenate([s_in.normal(mi, si, ni), s_out.normal(mo, so, no)])
    else:
        (rate,), (lo, hi) = spec.inlier_params, spec.outlier_params
        x = np.concatenate([s_in.exponential(1.0 / rate, ni), s_out.uniform(lo, hi, no)])
    labels = np.concatenate([np.ones(ni, np.int8), np.zeros(no, np.int8)])
    order = s_shuffle.permutation(ni + no)
    data = Dataset(x[order], None if y is None else y[order], seed=spec.seed)
    return data, labels[order]


def generate(spec: PresetSpec) -> Dataset:
    return generate_labeled(spec)[0]


def save(path, spec: PresetSpec) -> tuple[Dataset, np.ndarray]:
    """Write the estimator-facing CSV; spec and labels go to the JSON sidecar."""
    data, labels = generate_labeled(spec)
    data.to_csv(Path(path), {"spec": asdict(spec), "labels": labels.tolist()})
    return data, labels
