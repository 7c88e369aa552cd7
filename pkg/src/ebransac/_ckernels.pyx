# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: fused EB-RANSAC loss/gradient and the descent loop.

Same contract as ``_pykernels``; parameters are in unconstrained space.
"""
import numpy as np

from libc.math cimport exp, fabs, fmax, isfinite, log1p

LINREG, GAUSSIAN, EXPONENTIAL = 0, 1, 2

cdef double _HALF_LOG_2PI = 0.91893853320467274178
cdef double _MIN_STEP = 1e-30


cdef inline double _softplus(double z) noexcept nogil:
    return fmax(z, 0.0) + log1p(exp(-fabs(z)))


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef double _value_grad(int kind, const double* u, const double* x, const double* y,
                        Py_ssize_t n, double beta, double* g) noexcept nogil:
    cdef Py_ssize_t i
    cdef double f = 0.0, g0 = 0.0, g1 = 0.0
    cdef double loss, d0, d1, s, r, z, sig, lam
    if kind == 1:
        sig = exp(u[1])
    elif kind == 2:
        lam = exp(u[0])
    for i in range(n):
        if kind == 0:
            r = y[i] - u[0] * x[i] - u[1]
            loss = r * r
            d0 = -2.0 * r * x[i]
            d1 = -2.0 * r
        elif kind == 1:
            z = (x[i] - u[0]) / sig
            loss = _HALF_LOG_2PI + u[1] + 0.5 * z * z
            d0 = -z / sig
            d1 = 1.0 - z * z
        else:
            loss = lam * x[i] - u[0]
            d0 = lam * x[i] - 1.0
            d1 = 0.0
        f += _softplus(beta - loss)
        s = _sigmoid(beta - loss)
        if s > 0.0:
            g0 += s * d0
            g1 += s * d1
    g[0] = g0 / n
    g[1] = g1 / n
    return -f / n


def ebr_value_grad_u(int kind, u, const double[::1] x, const double[::1] y, double beta):
    """EB-RANSAC loss and its gradient with respect to the unconstrained u."""
    if kind < 0 or kind > 2:
        raise ValueError(f"unknown kernel kind {kind}")
    cdef int p = 1 if kind == 2 else 2
    cdef double uu[2]
    cdef double g[2]
    uu[0] = u[0]
    uu[1] = u[1] if p == 2 else 0.0
    cdef double f
    with nogil:
        f = _value_grad(kind, uu, &x[0], &y[0], x.shape[0], beta, g)
    return f, np.array([g[0], g[1]][:p])


def descend(int kind, u0, const double[::1] x, const double[::1] y, double beta,
            long max_iters, double grad_tol, double step0, double shrink, double armijo):
    """Armijo-backtracking gradient descent; see ``_pykernels.descend_callable``."""
    if kind < 0 or kind > 2:
        raise ValueError(f"unknown kernel kind {kind}")
    cdef int p = 1 if kind == 2 else 2
    cdef Py_ssize_t n = x.shape[0]
    cdef double u[2]
    cdef double un[2]
    cdef double g[2]
    cdef double gn[2]
    cdef double f, fn, f_init, t, gg, gmax
    cdef long it = 0
    cdef int converged = 0, stalled = 0, j
    u[0] = u0[0]
    u[1] = u0[1] if p == 2 else 0.0
    with nogil:
        f = _value_grad(kind, u, &x[0], &y[0], n, beta, g)
        f_init = f
        if not (isfinite(f) and isfinite(g[0]) and isfinite(g[1])):
            stalled = 1
        t = step0
        while not stalled and it < max_iters:
            gmax = fmax(fabs(g[0]), fabs(g[1]))
            if gmax < grad_tol:
                converged = 1
                break
            gg = g[0] * g[0] + g[1] * g[1]
            t = step0 if t / shrink > step0 else t / shrink
            while True:
                for j in range(2):
                    un[j] = u[j] - t * g[j]
                fn = _value_grad(kind, un, &x[0], &y[0], n, beta, gn)
                if isfinite(fn) and isfinite(gn[0]) and isfinite(gn[1]) and fn <= f - armijo * t * gg:
                    break
                t *= shrink
                if t < _MIN_STEP:
                    stalled = 1
                    break
            if stalled:
                break
            if fn >= f:
                converged = 1
                break
            for j in range(2):
                u[j] = un[j]
                g[j] = gn[j]
            f = fn
            it += 1
        if not converged and not stalled and it >= max_iters:
            converged = fmax(fabs(g[0]), fabs(g[1])) < grad_tol
    return np.array([u[0], u[1]][:p]), f_init, f, int(it), bool(converged)
