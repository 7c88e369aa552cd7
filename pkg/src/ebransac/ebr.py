"""The EB-RANSAC estimator.

The estimator minimizes

    L_ER(theta) = -(1/N) * sum_mu softplus(beta - loss_mu(theta))

with multi-start gradient descent. ``beta`` is the only hyperparameter; points
whose loss sits well above it stop contributing to the gradient.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .core import Dataset, LossModel, checked_losses
from .kernels import sigmoid, softplus


@dataclass(frozen=True)
class InitBox:
    """Per-coordinate uniform restart distribution in natural parameters."""

    low: tuple[float, ...]
    high: tuple[float, ...]

    def sample(self, rng: np.random.Generator, model: LossModel) -> np.ndarray:
        low, high = np.asarray(self.low, float), np.asarray(self.high, float)
        if low.shape != (model.param_dim,) or high.shape != low.shape:
            raise ValueError("init box dimension does not match the model")
        return rng.uniform(low, high)


@dataclass(frozen=True)
class InitGaussian:
    """Gaussian perturbation of a pilot estimate, applied in unconstrained space."""

    center: tuple[float, ...]
    scale: tuple[float, ...] | float = 1.0

    def sample(self, rng: np.random.Generator, model: LossModel) -> np.ndarray:
        u = model.to_unconstrained(self.center)
        u = u + np.asarray(self.scale, float) * rng.standard_normal(u.shape)
        return model.from_unconstrained(u)


def init_from_dict(d: dict):
    if "low" in d:
        return InitBox(tuple(d["low"]), tuple(d["high"]))
    return InitGaussian(tuple(d["center"]), d.get("scale", 1.0))


@dataclass(frozen=True)
class EbrConfig:
    beta: float
    restarts: int = 30
    init: InitBox | InitGaussian | None = None
    max_iters: int = 10_000
    grad_tol: float = 1e-8
    step0: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    rng_seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not (0 < self.shrink < 1 and self.step0 > 0 and 0 < self.armijo < 1):
            raise ValueError("invalid line-search parameters")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["init"] = None if self.init is None else asdict(self.init)
        return d


@dataclass
class RestartRecord:
    index: int
    theta_init: list[float]
    theta_final: list[float]
    loss_init: float
    loss_final: float
    iterations: int
    converged: bool


@dataclass
class FitResult:
    theta_star: np.ndarray
    ebr_loss: float
    selection_probs: np.ndarray
    restart_log: list[RestartRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta": [float(v) for v in self.theta_star],
            "ebr_loss": float(self.ebr_loss),
            "selection_probs": [float(v) for v in self.selection_probs],
            "restarts": [asdict(r) for r in self.restart_log],
            "config": self.config,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class FitDivergedError(RuntimeError):
    def __init__(self, restart_log: list[RestartRecord]):
        super().__init__(f"all {len(restart_log)} restarts produced a non-finite loss")
        self.restart_log = restart_log


def ebr_loss(model: LossModel, theta, data: Dataset, beta: float) -> float:
    losses = checked_losses(model, theta, data)
    return -float(np.mean(softplus(beta - losses)))


def ebr_loss_grad(model: LossModel, theta, data: Dataset, beta: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    weights = sigmoid(beta - checked_losses(model, theta, data))
    grads = model.loss_grads(theta, data)
    keep = weights > 0  # 0 * inf guard for far outliers
    return (weights[keep, None] * grads[keep]).sum(axis=0) / len(data)


def selection_probs_approx(model: LossModel, theta, data: Dataset, beta: float) -> np.ndarray:
    """sigmoid(beta - loss_mu): the large-Psi form of P(w_mu = 1 | theta)."""
    return sigmoid(beta - checked_losses(model, theta, data))


def selection_probs_exact(model: LossModel, theta, data: Dataset, beta: float) -> np.ndarray:
    """P(w_mu = 1 | theta) under the conditional that excludes the all-zero w.

    Equals (Psi + 1) / Psi * sigmoid(beta - loss_mu) with
    log(Psi + 1) = sum_mu softplus(beta - loss_mu).
    """
    z = beta - checked_losses(model, theta, data)
    log_psi1 = float(softplus(z).sum())
    if log_psi1 < 1e-12:
        # Psi ~ log(Psi + 1): every point is a gross outlier, probabilities become softmax(z).
        warnings.warn("Psi underflow: using the first-order expansion Psi ~ log(Psi+1)",
                      RuntimeWarning, stacklevel=2)
        zmax = z.max()
        e = np.exp(z - zmax)
        return np.minimum(e / e.sum(), 1.0)
    factor = -1.0 / math.expm1(-log_psi1)
    return np.minimum(factor * sigmoid(z), 1.0)


def _restart(model: LossModel, data: Dataset, config: EbrConfig, init, index: int) -> RestartRecord:
    rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=(index,)))
    theta0 = init.sample(rng, model)
    u0 = model.to_unconstrained(theta0)
    opts = (config.max_iters, config.grad_tol, config.step0, config.shrink, config.armijo)
    if model.kernel_kind is not None:
        x, y = data.columns()
        u, f0, f, iters, conv = kernels.descend(model.kernel_kind, u0, x, y, float(config.beta), *opts)
    else:
        def fg(u):
            theta = model.from_unconstrained(u)
            try:
                f = ebr_loss(model, theta, data, config.beta)
                g = ebr_loss_grad(model, theta, data, config.beta)
            except (ValueError, FloatingPointError, OverflowError):
                return math.inf, np.full_like(u, math.nan)
            return f, model.grad_to_unconstrained(theta, g)

        u, f0, f, iters, conv = kernels.descend_callable(fg, u0, *opts)
    return RestartRecord(
        index=index,
        theta_init=[float(v) for v in theta0],
        theta_final=[float(v) for v in model.from_unconstrained(u)],
        loss_init=float(f0),
        loss_final=float(f),
        iterations=int(iters),
        converged=bool(conv),
    )


def fit(model: LossModel, data: Dataset, config: EbrConfig) -> FitResult:
    """Minimize the EB-RANSAC loss from ``config.restarts`` random starts.

    Restart i draws its start from a stream seeded by (rng_seed, i), so the
    result does not depend on the order restarts are run in. The winner is the
    lowest final loss, ties going to the lowest index.
    """
    init = config.init if config.init is not None else model.default_init(data)
    log = [_restart(model, data, config, init, i) for i in range(config.restarts)]
    finite = [r for r in log if math.isfinite(r.loss_final)]
    if not finite:
        raise FitDivergedError(log)
    best = min(finite, key=lambda r: (r.loss_final, r.index))
    theta = np.array(best.theta_final)
    return FitResult(
        theta_star=theta,
        ebr_loss=best.loss_final,
        selection_probs=selection_probs_exact(model, theta, data, config.beta),
        restart_log=log,
        config=config.to_dict() | {"model": model.name},
    )
