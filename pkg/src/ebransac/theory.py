"""EB-RANSAC on a fully expressive discrete model.

When the model can represent any distribution over K atoms, the minimizer of
the EB-RANSAC loss is the empirical distribution q with every atom at or below
a cut-off T_cut removed and the rest renormalized. T_cut is the unique root in
(0, max q) of

    h_beta(T) = T - exp(-beta) * b(T),    b(T) = sum_k max(q_k - T, 0).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_BRUTE_FORCE_K = 6


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if p.size < 1:
            raise ValueError("need at least one atom")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, weights) -> "DiscreteDistribution":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum())

    @property
    def K(self) -> int:
        return self.probs.size

    @property
    def t_star(self) -> float:
        return float(self.probs.max())


@dataclass(frozen=True)
class CutoffSolution:
    t_cut: float
    zeta: float
    p: DiscreteDistribution
    beta: float
    bracket: tuple[float, float]


def _as_dist(q) -> DiscreteDistribution:
    return q if isinstance(q, DiscreteDistribution) else DiscreteDistribution(q)


class _Mass:
    """b(T) via sorted prefix sums: O(K log K) setup, O(log K) per query."""

    def __init__(self, q: DiscreteDistribution):
        self.sorted = np.sort(q.probs)
        self.prefix = np.concatenate([[0.0], np.cumsum(self.sorted)])
        self.K = q.K

    def __call__(self, t: float) -> float:
        # k = number of atoms with q <= t; those contribute nothing.
        k = int(np.searchsorted(self.sorted, t, side="right"))
        if k == self.K:
            return 0.0
        return (1.0 - self.prefix[k]) - (self.K - k) * t if k else 1.0 - self.K * t


def b_of_T(q, T: float) -> float:
    """Total probability mass above the threshold: sum_k relu(q_k - T)."""
    return _Mass(_as_dist(q))(float(T))


def h_beta(q, beta: float, T: float) -> float:
    return float(T) - math.exp(-beta) * b_of_T(q, T)


def solve_t_cut(q, beta: float, tol: float | None = None) -> CutoffSolution:
    """Bisection for the root of h_beta on (0, max q).

    h_beta is continuous and strictly increasing with h(0) < 0 < h(max q), so
    the bracket always holds. With ``tol`` given, bisection stops once the
    bracket is narrower than it; by default it runs until the midpoint no
    longer moves, which keeps tiny roots (large beta) accurate in relative
    terms and is never looser than 1e-12 * max q.
    """
    q = _as_dist(q)
    t_star = q.t_star
    if tol is not None and not tol > 0:
        raise ValueError("tol must be positive")
    width = 0.0 if tol is None else tol
    mass = _Mass(q)
    scale = math.exp(-beta)
    lo, hi = 0.0, t_star
    while hi - lo >= width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mid - scale * mass(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    t_cut = 0.5 * (lo + hi)
    kept = np.maximum(q.probs - t_cut, 0.0)
    # equals exp(-beta) / T_cut * relu(q - T_cut) at the exact root
    p = DiscreteDistribution(kept / kept.sum())
    return CutoffSolution(t_cut=t_cut, zeta=t_cut / scale, p=p, beta=float(beta), bracket=(lo, hi))


def minimizer_distribution(q, beta: float, tol: float | None = None) -> DiscreteDistribution:
    return solve_t_cut(q, beta, tol).p


def beta_of_T(q, T: float) -> float:
    """Inverse of beta -> T_cut(beta): log b(T) - log T for 0 < T < max q."""
    q = _as_dist(q)
    if not 0.0 < T < q.t_star:
        raise ValueError(f"T={T!r} outside (0, {q.t_star!r})")
    return math.log(b_of_T(q, T)) - math.log(T)


def discrete_ebr_loss(q, rho, beta: float) -> float:
    """-sum_k q_k * log(1 + exp(beta) * rho_k); zero-probability atoms are allowed."""
    q = _as_dist(q).probs
    rho = np.asarray(rho.probs if isinstance(rho, DiscreteDistribution) else rho, dtype=float)
    return float(-(q * np.log1p(math.exp(beta) * rho)).sum())


@lru_cache(maxsize=16)
def simplex_grid(K: int, resolution: int) -> np.ndarray:
    """All compositions of ``resolution`` into K non-negative parts, scaled to sum 1."""
    bars = np.array(list(itertools.combinations(range(resolution + K - 1), K - 1)), dtype=np.int64)
    bars = bars.reshape(-1, K - 1)
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), resolution + K - 1)])
    grid = (np.diff(edges, axis=1) - 1).astype(float) / resolution
    grid.flags.writeable = False
    return grid


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    r = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[r] / (r + 1.0), 0.0)


def brute_force_minimizer(q, beta: float, resolution: int, polish_steps: int = 200) -> DiscreteDistribution:
    """Exhaustive simplex-grid search followed by projected-gradient polishing.

    Independent of the cut-off construction; used to check it. Refuses K > 6.
    """
    q = _as_dist(q)
    K = q.K
    if K > MAX_BRUTE_FORCE_K:
        raise ValueError(f"brute force limited to K <= {MAX_BRUTE_FORCE_K} atoms, got {K}")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    if K == 1:
        return DiscreteDistribution(np.ones(1))
    eb = math.exp(beta)
    grid = simplex_grid(K, resolution)
    losses = -np.log1p(eb * grid) @ q.probs
    rho = grid[int(np.argmin(losses))].copy()
    f = float(losses.min())

    def grad(r):
        return -q.probs * eb / (1.0 + eb * r)

    step = 1.0
    for _ in range(polish_steps):
        g = grad(rho)
        while step > 1e-16:
            cand = project_to_simplex(rho - step * g)
            fc = discrete_ebr_loss(q, cand, beta)
            if fc <= f - 1e-4 * float(g @ (rho - cand)):
                break
            step *= 0.5
        else:
            break
        if fc < f:
            rho, f = cand, fc
        step = min(1.0, 2.0 * step)
    return DiscreteDistribution(rho / rho.sum())
