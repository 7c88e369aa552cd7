"""Loss-model abstraction, data containers and the plain mean loss.

Every estimator in the package only needs a per-point loss and its gradient
with respect to the parameter vector; :class:`LossModel` is that contract.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

REAL = "real"
POSITIVE = "positive"


class NonFiniteLossError(ValueError):
    """A per-point loss evaluated to nan or inf."""

    def __init__(self, index: int, value: float):
        super().__init__(f"non-finite loss {value!r} at data point index {index}")
        self.index = index
        self.value = value


@dataclass(frozen=True)
class DataPoint:
    input: np.ndarray
    target: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered data points stored column-wise.

    ``x`` has shape (N, n); ``y`` is (N, m) or None for unsupervised data.
    Row order is the point index and is preserved by serialization.
    """

    x: np.ndarray
    y: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("dataset needs at least one point")
        if not np.all(np.isfinite(x)):
            raise ValueError("dataset inputs must be finite")
        object.__setattr__(self, "x", x)
        if self.y is not None:
            y = np.asarray(self.y, dtype=float)
            if y.ndim == 1:
                y = y[:, None]
            if y.shape[0] != x.shape[0]:
                raise ValueError("inputs and targets differ in length")
            if not np.all(np.isfinite(y)):
                raise ValueError("dataset targets must be finite")
            object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_points(cls, points: Sequence[DataPoint], seed: int | None = None) -> "Dataset":
        x = np.array([np.atleast_1d(p.input) for p in points], dtype=float)
        has_y = [p.target is not None for p in points]
        if any(has_y) and not all(has_y):
            raise ValueError("either all points carry a target or none do")
        y = np.array([np.atleast_1d(p.target) for p in points], dtype=float) if all(has_y) else None
        return cls(x, y, seed)

    @property
    def points(self) -> list[DataPoint]:
        if self.y is None:
            return [DataPoint(self.x[i]) for i in range(len(self))]
        return [DataPoint(self.x[i], self.y[i]) for i in range(len(self))]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.x[idx], None if self.y is None else self.y[idx], self.seed)

    def columns(self) -> tuple[np.ndarray, np.ndarray]:
        """First input and first target column as contiguous 1-D arrays.

        Targets default to zeros for unsupervised data (the kernels ignore them).
        """
        x = np.ascontiguousarray(self.x[:, 0])
        y = np.ascontiguousarray(self.y[:, 0]) if self.y is not None else np.zeros_like(x)
        return x, y

    def header(self) -> list[str]:
        names = [f"x_{i}" for i in range(self.x.shape[1])]
        if self.y is not None:
            names += [f"y_{i}" for i in range(self.y.shape[1])]
        return names

    def to_csv(self, path, metadata: dict | None = None) -> Path:
        """Write the points as CSV and a JSON sidecar (seed plus ``metadata``)."""
        path = Path(path)
        table = self.x if self.y is None else np.hstack([self.x, self.y])
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            for row in table:
                writer.writerow([repr(float(v)) for v in row])
        meta = {"seed": self.seed, "n_points": len(self)}
        meta.update(metadata or {})
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        table = np.array(body, dtype=float).reshape(len(body), len(header))
        xi = [i for i, h in enumerate(header) if h.startswith("x_")]
        yi = [i for i, h in enumerate(header) if h.startswith("y_")]
        seed = None
        side = sidecar_path(path)
        if side.exists():
            seed = json.loads(side.read_text()).get("seed")
        return cls(table[:, xi], table[:, yi] if yi else None, seed)


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


class LossModel:
    """Parametric model known only through its per-point loss.

    Subclasses implement :meth:`point_loss` and :meth:`point_loss_grad`; the
    vectorized :meth:`losses` / :meth:`loss_grads` fall back to looping over
    points and should be overridden when a closed array form exists.

    ``kernel_kind`` names a compiled fast path (see :mod:`ebransac.kernels`);
    None means the generic Python optimizer is used.
    """

    name = "custom"
    param_dim: int = 1
    param_domain: tuple[str, ...] = (REAL,)
    kernel_kind: int | None = None

    def point_loss(self, theta: np.ndarray, d: DataPoint) -> float:
        raise NotImplementedError

    def point_loss_grad(self, theta: np.ndarray, d: DataPoint) -> np.ndarray:
        raise NotImplementedError

    def losses(self, theta, data: Dataset) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array([self.point_loss(theta, p) for p in data.points], dtype=float)

    def loss_grads(self, theta, data: Dataset) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array([self.point_loss_grad(theta, p) for p in data.points], dtype=float).reshape(
            len(data), self.param_dim
        )

    def fit_weighted(self, data: Dataset, weights: np.ndarray) -> np.ndarray:
        """Minimize sum_mu weights[mu] * loss_mu; closed form where a model has one."""
        raise NotImplementedError

    def default_init(self, data: Dataset):
        raise NotImplementedError(f"{type(self).__name__} has no default restart box")

    # Positive coordinates are optimized as logs.
    @property
    def _positive(self) -> np.ndarray:
        return np.array([d == POSITIVE for d in self.param_domain])

    def in_domain(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(np.isfinite(theta)) and np.all(theta[self._positive] > 0))

    def to_unconstrained(self, theta) -> np.ndarray:
        u = np.array(theta, dtype=float)
        pos = self._positive
        u[pos] = np.log(u[pos])
        return u

    def from_unconstrained(self, u) -> np.ndarray:
        theta = np.array(u, dtype=float)
        pos = self._positive
        theta[pos] = np.exp(theta[pos])
        return theta

    def grad_to_unconstrained(self, theta, grad) -> np.ndarray:
        g = np.array(grad, dtype=float)
        pos = self._positive
        g[pos] = g[pos] * np.asarray(theta, dtype=float)[pos]
        return g


class CallableLossModel(LossModel):
    """LossModel assembled from plain functions ``loss_fn(theta, d)`` and ``grad_fn(theta, d)``."""

    def __init__(self, param_dim: int, loss_fn: Callable[[np.ndarray, DataPoint], float],
                 grad_fn: Callable[[np.ndarray, DataPoint], np.ndarray],
                 param_domain: Sequence[str] | None = None, name: str = "custom"):
        if param_dim < 1:
            raise ValueError("param_dim must be positive")
        domain = tuple(param_domain) if param_domain else (REAL,) * param_dim
        if len(domain) != param_dim:
            raise ValueError("param_domain length must equal param_dim")
        self.param_dim = param_dim
        self.param_domain = domain
        self.loss_fn = loss_fn
        self.grad_fn = grad_fn
        self.name = name

    def point_loss(self, theta, d):
        return float(self.loss_fn(theta, d))

    def point_loss_grad(self, theta, d):
        return np.asarray(self.grad_fn(theta, d), dtype=float)


def checked_losses(model: LossModel, theta, data: Dataset) -> np.ndarray:
    """Per-point losses, raising :class:`NonFiniteLossError` on the first bad one."""
    losses = model.losses(np.asarray(theta, dtype=float), data)
    bad = np.flatnonzero(~np.isfinite(losses))
    if bad.size:
        raise NonFiniteLossError(int(bad[0]), float(losses[bad[0]]))
    return losses


def mean_loss(model: LossModel, theta, data: Dataset) -> float:
    return float(np.mean(checked_losses(model, theta, data)))


def mean_loss_grad(model: LossModel, theta, data: Dataset) -> np.ndarray:
    checked_losses(model, theta, data)
    return model.loss_grads(np.asarray(theta, dtype=float), data).mean(axis=0)
