"""The joint model over (theta, w) and its conditionals.

    log P(theta, w) = -sum_mu w_mu * loss_mu(theta) + beta * sum_mu w_mu - log Z,

with w in {0,1}^N minus the all-zero vector. Given w, maximizing over theta is
a fit on the selected points; given theta, the w_mu are independent apart from
the excluded all-zero state. Alternating the two maximizations is LO-RANSAC
with beta playing the consensus threshold.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, LossModel, checked_losses
from .kernels import sigmoid


class EmptyConsensusError(RuntimeError):
    """No point has loss below beta; ``fallback`` selects the lowest-loss point."""

    def __init__(self, fallback: np.ndarray):
        super().__init__("consensus set is empty: no point satisfies loss < beta")
        self.fallback = fallback
        self.trace: ChainTrace | None = None


class SamplerBudgetError(RuntimeError):
    pass


def as_selection(w) -> np.ndarray:
    """Validate a selection vector: binary with at least one component set."""
    arr = np.asarray(w)
    if arr.ndim != 1 or not np.all((arr == 0) | (arr == 1)):
        raise ValueError("selection vector must be a 1-D binary array")
    if not arr.any():
        raise ValueError("selection vector must select at least one point")
    return arr.astype(np.int8)


def joint_log_density_unnorm(model: LossModel, theta, w, data: Dataset, beta: float) -> float:
    w = as_selection(w)
    if w.size != len(data):
        raise ValueError("selection vector length differs from the dataset")
    losses = checked_losses(model, theta, data)
    sel = w.astype(bool)
    return float(-losses[sel].sum() + beta * sel.sum())


def consensus_mask(model: LossModel, theta, data: Dataset, beta: float) -> np.ndarray:
    """Conditional argmax over w: select exactly the points with loss < beta."""
    losses = checked_losses(model, theta, data)
    mask = (beta > losses).astype(np.int8)
    if not mask.any():
        fallback = np.zeros_like(mask)
        fallback[int(np.argmin(losses))] = 1
        raise EmptyConsensusError(fallback)
    return mask


def _draw(probs: np.ndarray, rng: np.random.Generator, max_draws: int) -> tuple[np.ndarray, int]:
    for draw in range(1, max_draws + 1):
        w = rng.random(probs.size) < probs
        if w.any():
            return w.astype(np.int8), draw
    raise SamplerBudgetError(
        f"{max_draws} consecutive all-zero draws; selection probabilities are ~0 (beta too small?)"
    )


def sample_w(model: LossModel, theta, data: Dataset, beta: float, rng: np.random.Generator,
             max_draws: int = 10_000, return_draws: bool = False):
    """Exact draw from P(w | theta): independent Bernoulli(sigmoid(beta - loss)),
    redrawn whenever the all-zero vector comes up.

    With ``return_draws`` the number of proposals used is returned as well;
    its reciprocal estimates the acceptance rate Psi / (Psi + 1).
    """
    probs = sigmoid(beta - checked_losses(model, theta, data))
    w, draws = _draw(probs, rng, max_draws)
    return (w, draws) if return_draws else w


@dataclass
class TraceRound:
    round: int
    theta: list[float]
    w: list[int]
    log_density: float
    log_density_next_w: float
    consensus_size: int

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class ChainTrace:
    rounds: list[TraceRound] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.rounds)

    @property
    def theta(self) -> np.ndarray:
        return np.array(self.rounds[-1].theta)

    @property
    def w(self) -> np.ndarray:
        return np.array(self.rounds[-1].w, dtype=np.int8)

    def log_densities(self) -> list[float]:
        """Joint log density after every half-step, in visiting order."""
        out = []
        for r in self.rounds:
            out += [r.log_density, r.log_density_next_w]
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.rounds)


def alternate_maximize(model: LossModel, data: Dataset, beta: float, w0, inner_solver=None,
                       max_rounds: int = 50) -> ChainTrace:
    """Deterministic coordinate ascent on the joint density starting from ``w0``.

    Round t fits theta_t on w_t, then sets w_{t+1} to the consensus mask of
    theta_t. Stops when the mask repeats or after ``max_rounds`` rounds.
    """
    solve = inner_solver or model.fit_weighted
    w = as_selection(w0)
    trace = ChainTrace()
    for t in range(max_rounds):
        theta = np.asarray(solve(data, w.astype(float)), dtype=float)
        before = joint_log_density_unnorm(model, theta, w, data, beta)
        try:
            w_next = consensus_mask(model, theta, data, beta)
        except EmptyConsensusError as exc:
            exc.trace = trace
            raise
        after = joint_log_density_unnorm(model, theta, w_next, data, beta)
        trace.rounds.append(TraceRound(t, theta.tolist(), w.tolist(), before, after, int(w_next.sum())))
        if np.array_equal(w_next, w):
            trace.converged = True
            break
        w = w_next
    return trace
