"""Classical comparators: RANSAC / LO-RANSAC and closed-form estimators."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .core import Dataset, LossModel, checked_losses


@dataclass(frozen=True)
class RansacConfig:
    hypo_size: int
    iterations: int
    t_cons: float
    min_consensus: int
    local_opt: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.hypo_size < 1 or self.iterations < 1 or self.min_consensus < 0:
            raise ValueError("hypo_size and iterations must be >= 1, min_consensus >= 0")


@dataclass
class RansacIteration:
    index: int
    sample: list[int]
    theta: list[float] | None
    consensus_size: int
    score: float | None
    note: str = ""


@dataclass
class RansacResult:
    """Best RANSAC hypothesis; serializes like an EB-RANSAC fit, with a 0/1 mask."""

    theta_star: np.ndarray
    score: float
    consensus_mask: np.ndarray
    iterations: list[RansacIteration] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta": [float(v) for v in self.theta_star],
            "score": float(self.score),
            "selection_probs": [int(v) for v in self.consensus_mask],
            "restarts": [asdict(it) for it in self.iterations],
            "config": self.config,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class RansacError(RuntimeError):
    def __init__(self, message: str, iterations: list[RansacIteration]):
        super().__init__(message)
        self.iterations = iterations


def gradient_inner_solver(model: LossModel, theta0, max_iters: int = 10_000, grad_tol: float = 1e-10):
    """Weighted-loss minimizer by backtracking descent, for models without a closed form."""

    def solve(data: Dataset, weights: np.ndarray) -> np.ndarray:
        w = np.asarray(weights, float) / np.sum(weights)

        def fg(u):
            theta = model.from_unconstrained(u)
            losses = model.losses(theta, data)
            if not np.all(np.isfinite(losses[w > 0])):
                return math.inf, np.full_like(u, math.nan)
            g = (w[w > 0, None] * model.loss_grads(theta, data)[w > 0]).sum(axis=0)
            return float(w[w > 0] @ losses[w > 0]), model.grad_to_unconstrained(theta, g)

        u, *_ = kernels.descend_callable(fg, model.to_unconstrained(theta0), max_iters, grad_tol, 1.0, 0.5, 1e-4)
        return model.from_unconstrained(u)

    return solve


def ransac_fit(model: LossModel, data: Dataset, config: RansacConfig, inner_solver=None) -> RansacResult:
    """Sample, fit, build the consensus set, score; keep the best hypothesis.

    ``inner_solver(data, weights)`` returns the minimizer of the weighted loss.
    Score is the mean loss over the consensus set (lower wins); ties prefer the
    larger consensus set, then the earlier iteration. With ``local_opt`` the
    hypothesis is refit on its consensus set before scoring.
    """
    n = len(data)
    if config.hypo_size > n:
        raise ValueError("hypo_size exceeds the number of data points")
    solve = inner_solver or model.fit_weighted
    log: list[RansacIteration] = []
    best_key, best = None, None
    for i in range(config.iterations):
        rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=(i,)))
        sample = np.sort(rng.choice(n, size=config.hypo_size, replace=False))
        weights = np.zeros(n)
        weights[sample] = 1.0
        try:
            theta = np.asarray(solve(data, weights), dtype=float)
            losses = checked_losses(model, theta, data)
        except (ValueError, ArithmeticError) as exc:
            log.append(RansacIteration(i, sample.tolist(), None, 0, None, f"fit failed: {exc}"))
            continue
        mask = losses < config.t_cons
        size = int(mask.sum())
        if size <= config.min_consensus:
            log.append(RansacIteration(i, sample.tolist(), theta.tolist(), size, None, "consensus too small"))
            continue
        if config.local_opt:
            try:
                theta = np.asarray(solve(data, mask.astype(float)), dtype=float)
                losses = checked_losses(model, theta, data)
            except (ValueError, ArithmeticError) as exc:
                log.append(RansacIteration(i, sample.tolist(), theta.tolist(), size, None, f"refit failed: {exc}"))
                continue
        score = float(losses[mask].mean())
        log.append(RansacIteration(i, sample.tolist(), theta.tolist(), size, score))
        key = (score, -size, i)
        if best_key is None or key < best_key:
            best_key, best = key, (theta, score, mask)
    if best is None:
        raise RansacError(
            f"no iteration produced a consensus set larger than {config.min_consensus}", log
        )
    theta, score, mask = best
    return RansacResult(theta, score, mask.astype(np.int8), log, asdict(config) | {"model": model.name})


def lms_fit(data: Dataset) -> tuple[float, float]:
    """Ordinary least squares slope and intercept."""
    if len(data) < 2:
        raise ValueError("least squares needs at least two points")
    x, y = data.columns()
    xm, ym = x.mean(), y.mean()
    sxx = ((x - xm) ** 2).sum()
    if sxx == 0:
        raise ValueError("degenerate design: all inputs are equal")
    a = ((x - xm) * (y - ym)).sum() / sxx
    return float(a), float(ym - a * xm)


def gaussian_mle(data: Dataset) -> tuple[float, float]:
    """Sample mean and the biased (1/N) standard deviation."""
    if len(data) < 2:
        raise ValueError("Gaussian MLE needs at least two points")
    x = data.x[:, 0]
    m = x.mean()
    var = ((x - m) ** 2).mean()
    if var == 0:
        raise ValueError("zero variance: sigma estimate degenerate")
    return float(m), math.sqrt(var)


def exponential_mle(data: Dataset) -> float:
    x = data.x[:, 0]
    if np.any(x <= 0):
        raise ValueError("exponential MLE requires strictly positive data")
    return float(1.0 / x.mean())
