"""Numpy implementations of the hot kernels; mirrors ``_ckernels.pyx``.

Parameters are passed in the unconstrained space the optimizer works in:
linreg (a, b); gaussian (m, log sigma); exponential (log lam,).
"""
from __future__ import annotations

import math

import numpy as np

LINREG, GAUSSIAN, EXPONENTIAL = 0, 1, 2
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_MIN_STEP = 1e-30


def softplus(z):
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _losses_and_grads(kind, u, x, y):
    if kind == LINREG:
        r = y - u[0] * x - u[1]
        return r * r, np.column_stack([-2.0 * r * x, -2.0 * r])
    if kind == GAUSSIAN:
        s = math.exp(u[1])
        z = (x - u[0]) / s
        return _HALF_LOG_2PI + u[1] + 0.5 * z * z, np.column_stack([-z / s, 1.0 - z * z])
    if kind == EXPONENTIAL:
        lam = math.exp(u[0])
        lx = lam * x
        return lx - u[0], (lx - 1.0)[:, None]
    raise ValueError(f"unknown kernel kind {kind}")


def ebr_value_grad_u(kind, u, x, y, beta):
    """EB-RANSAC loss and its gradient with respect to the unconstrained u."""
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        losses, grads = _losses_and_grads(kind, u, x, y)
        z = beta - losses
        s = sigmoid(z)
        weighted = np.where(s[:, None] > 0, s[:, None] * grads, 0.0)
    n = x.shape[0]
    return -float(softplus(z).sum()) / n, weighted.sum(axis=0) / n


def descend_callable(fg, u0, max_iters, grad_tol, step0, shrink, armijo):
    """Gradient descent with Armijo backtracking on fg(u) -> (f, g).

    Each iteration starts from min(step0, previous_step / shrink). Stops on
    ||g||_inf < grad_tol, on max_iters, when the line search finds no finite
    sufficient decrease, or when an accepted step leaves f unchanged (the
    objective is at floating-point resolution). The first and last of these
    count as converged. Returns (u, f_init, f, iterations, converged).
    """
    u = np.array(u0, dtype=float)
    f, g = fg(u)
    f_init = f
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        return u, f_init, f, 0, False
    t = step0
    it = 0
    while it < max_iters:
        if np.max(np.abs(g)) < grad_tol:
            return u, f_init, f, it, True
        gg = float(g @ g)
        t = min(step0, t / shrink)
        while True:
            un = u - t * g
            fn, gn = fg(un)
            if math.isfinite(fn) and np.all(np.isfinite(gn)) and fn <= f - armijo * t * gg:
                break
            t *= shrink
            if t < _MIN_STEP:
                return u, f_init, f, it, False
        if fn >= f:
            return u, f_init, f, it, True
        u, f, g = un, fn, gn
        it += 1
    return u, f_init, f, it, bool(np.max(np.abs(g)) < grad_tol)


def descend(kind, u0, x, y, beta, max_iters, grad_tol, step0, shrink, armijo):
    def fg(u):
        return ebr_value_grad_u(kind, u, x, y, beta)

    return descend_callable(fg, u0, max_iters, grad_tol, step0, shrink, armijo)
