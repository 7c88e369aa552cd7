"""Concrete loss models: squared-error line fit, Gaussian and exponential NLL."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from . import kernels
from .core import POSITIVE, REAL, DataPoint, Dataset, LossModel

LOG_2PI = math.log(2.0 * math.pi)
INLIER_RATIO = 200 / 240


class LinearRegressionModel(LossModel):
    """theta = (a, b); loss = (y - a*x - b)**2."""

    name = "linreg"
    param_dim = 2
    param_domain = (REAL, REAL)
    kernel_kind = kernels.LINREG

    def point_loss(self, theta, d: DataPoint) -> float:
        r = float(d.target[0]) - theta[0] * float(d.input[0]) - theta[1]
        return r * r

    def point_loss_grad(self, theta, d: DataPoint) -> np.ndarray:
        x = float(d.input[0])
        r = float(d.target[0]) - theta[0] * x - theta[1]
        return np.array([-2.0 * r * x, -2.0 * r])

    def losses(self, theta, data):
        x, y = data.columns()
        r = y - theta[0] * x - theta[1]
        return r * r

    def loss_grads(self, theta, data):
        x, y = data.columns()
        r = y - theta[0] * x - theta[1]
        return np.column_stack([-2.0 * r * x, -2.0 * r])

    def fit_weighted(self, data, weights):
        x, y = data.columns()
        w = np.asarray(weights, dtype=float)
        sw = w.sum()
        if sw <= 0:
            raise ValueError("weights sum to zero")
        xm, ym = w @ x / sw, w @ y / sw
        sxx = w @ (x - xm) ** 2
        if sxx <= 1e-300 or np.count_nonzero(w) < 2:
            raise ValueError("degenerate design: selected inputs are all equal")
        a = w @ ((x - xm) * (y - ym)) / sxx
        return np.array([a, ym - a * xm])

    def default_init(self, data):
        from .ebr import InitBox

        _, y = data.columns()
        return InitBox(low=(-5.0, float(y.min())), high=(5.0, float(y.max())))


class GaussianModel(LossModel):
    """theta = (m, sigma), sigma > 0; loss = -log N(x | m, sigma**2)."""

    name = "gaussian"
    param_dim = 2
    param_domain = (REAL, POSITIVE)
    kernel_kind = kernels.GAUSSIAN

    def point_loss(self, theta, d):
        m, s = theta
        z = (float(d.input[0]) - m) / s
        return 0.5 * LOG_2PI + math.log(s) + 0.5 * z * z

    def point_loss_grad(self, theta, d):
        m, s = theta
        z = (float(d.input[0]) - m) / s
        return np.array([-z / s, (1.0 - z * z) / s])

    def losses(self, theta, data):
        m, s = theta
        z = (data.x[:, 0] - m) / s
        with np.errstate(divide="ignore", invalid="ignore"):
            return 0.5 * LOG_2PI + np.log(s) + 0.5 * z * z

    def loss_grads(self, theta, data):
        m, s = theta
        z = (data.x[:, 0] - m) / s
        return np.column_stack([-z / s, (1.0 - z * z) / s])

    def fit_weighted(self, data, weights):
        x = data.x[:, 0]
        w = np.asarray(weights, dtype=float)
        sw = w.sum()
        if sw <= 0:
            raise ValueError("weights sum to zero")
        m = w @ x / sw
        var = w @ (x - m) ** 2 / sw
        if not var > 0:
            raise ValueError("zero variance: sigma estimate degenerate")
        return np.array([m, math.sqrt(var)])

    def default_init(self, data):
        from .ebr import InitBox

        x = data.x[:, 0]
        sd = float(x.std()) or 1.0
        return InitBox(low=(float(x.min()), 0.1 * sd), high=(float(x.max()), 2.0 * sd))


class ExponentialModel(LossModel):
    """theta = (lam,), lam > 0; loss = -log lam + lam * x for x >= 0."""

    name = "exponential"
    param_dim = 1
    param_domain = (POSITIVE,)
    kernel_kind = kernels.EXPONENTIAL

    def point_loss(self, theta, d):
        lam = theta[0]
        return -math.log(lam) + lam * float(d.input[0])

    def point_loss_grad(self, theta, d):
        return np.array([-1.0 / theta[0] + float(d.input[0])])

    def losses(self, theta, data):
        lam = theta[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return -np.log(lam) + lam * data.x[:, 0]

    def loss_grads(self, theta, data):
        return (-1.0 / theta[0] + data.x[:, 0])[:, None]

    def fit_weighted(self, data, weights):
        x = data.x[:, 0]
        w = np.asarray(weights, dtype=float)
        sw = w.sum()
        if sw <= 0:
            raise ValueError("weights sum to zero")
        mean = w @ x / sw
        if not mean > 0:
            raise ValueError("exponential rate needs a positive weighted mean")
        return np.array([1.0 / mean])

    def default_init(self, data):
        from .ebr import InitBox

        scale = 1.0 / float(np.median(data.x[:, 0]) or 1.0)
        return InitBox(low=(0.05 * scale,), high=(5.0 * scale,))


MODELS = {
    "linreg": LinearRegressionModel,
    "gaussian": GaussianModel,
    "exponential": ExponentialModel,
}


def get_model(name: str) -> LossModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def kld_gaussian(p, q) -> float:
    """KL(N(m1, s1^2) || N(m2, s2^2)) for p = (m1, s1), q = (m2, s2)."""
    (m1, s1), (m2, s2) = p, q
    if not (s1 > 0 and s2 > 0):
        raise ValueError("standard deviations must be positive")
    return math.log(s2 / s1) + (s1 * s1 + (m1 - m2) ** 2) / (2.0 * s2 * s2) - 0.5


class QuadratureError(RuntimeError):
    def __init__(self, estimate: float, error: float, tol: float):
        super().__init__(f"quadrature error bound {error:.3g} exceeds {tol:.3g} (estimate {estimate!r})")
        self.estimate = estimate
        self.error = error


def _softplus(z):
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


def population_ebr_loss_exponential(lam: float, beta: float, r: float = INLIER_RATIO,
                                    tol: float = 1e-10, return_error: bool = False):
    """Large-N limit of the EB-RANSAC loss, shifted by softplus(beta).

    Data density is r * Exp(2) + (1 - r) * U[6, 7]. Integration is split at the
    uniform component's jumps and runs over [0, 6], [6, 7] and [7, inf).
    """
    if not lam > 0:
        raise ValueError("rate must be positive")
    if not 0.0 <= r <= 1.0:
        raise ValueError("mixture ratio must lie in [0, 1]")
    shift = beta + math.log(lam)

    def inlier(x):
        return r * 2.0 * math.exp(-2.0 * x) * _softplus(shift - lam * x)

    def both(x):
        return (r * 2.0 * math.exp(-2.0 * x) + (1.0 - r)) * _softplus(shift - lam * x)

    total, err = 0.0, 0.0
    for fn, a, b in ((inlier, 0.0, 6.0), (both, 6.0, 7.0), (inlier, 7.0, math.inf)):
        val, e = integrate.quad(fn, a, b, epsabs=tol / 4, epsrel=0.0, limit=200)
        total += val
        err += e
    if err > tol:
        raise QuadratureError(-total + _softplus(beta), err, tol)
    value = -total + _softplus(beta)
    return (value, err) if return_error else value
