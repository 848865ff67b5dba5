"""Shared quadrature helpers: Gauss-Hermite rules and adaptive panel integration."""

from functools import lru_cache

import numpy as np

from .errors import NumericalError

SQRT_PI = np.sqrt(np.pi)


@lru_cache(maxsize=64)
def hermite_rule(order: int):
    """Nodes and weights for \\int e^{-t^2} f(t) dt (physicists' convention).

    scipy's rule stays accurate for orders in the hundreds, where numpy's
    weight computation overflows.
    """
    from scipy.special import roots_hermite
    t, w = roots_hermite(order)
    return t, w


def gauss_hermite_mean(func, r: float, order: int):
    """E_{z ~ N(0, r)}[func(z)] via Gauss-Hermite with the change z = sqrt(2r) t."""
    t, w = hermite_rule(order)
    z = np.sqrt(2.0 * r) * t
    return float(np.dot(w, func(z)) / SQRT_PI)


@lru_cache(maxsize=32)
def legendre_rule(order: int):
    return np.polynomial.legendre.leggauss(order)


def _panel_values(func, a, b, order):
    t, w = legendre_rule(order)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    # nodes for all panels at once: shape (n_panels, order)
    x = mid[:, None] + half[:, None] * t[None, :]
    y = np.asarray(func(x.ravel()))
    y = y.reshape(y.shape[:-1] + x.shape)
    return half * (y @ w)


def adaptive_gauss(func, a: float, b: float, tol: float = 1e-11,
                   order: int = 20, max_depth: int = 24):
    """Adaptive panel integration of a vectorized integrand on [a, b].

    Each panel is evaluated with nested Gauss-Legendre rules of ``order`` and
    ``2 * order + 1`` points; panels whose rule difference exceeds the
    per-panel share of ``tol`` are bisected.  ``func`` maps an ndarray of
    nodes (n,) to values of shape (n,) or (m, n); in the latter case the m
    components are integrated together (sharing node evaluations) and an
    ndarray of m integrals is returned.
    """
    lo = np.array([float(a)])
    hi = np.array([float(b)])
    total = None
    for depth in range(max_depth):
        coarse = _panel_values(func, lo, hi, order)
        fine = _panel_values(func, lo, hi, 2 * order + 1)
        if total is None:
            total = np.zeros(fine.shape[:-1])
        err = np.abs(fine - coarse)
        if err.ndim > 1:
            err = err.max(axis=tuple(range(err.ndim - 1)))
        budget = tol * (hi - lo) / (b - a)
        ok = err <= np.maximum(budget, 1e-300)
        total += fine[..., ok].sum(axis=-1)
        if ok.all():
            return float(total) if total.ndim == 0 else total
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo = np.concatenate([lo, mid])
        hi = np.concatenate([mid, hi])
    raise NumericalError(
        f"adaptive quadrature failed to reach tol={tol} after {max_depth} refinement levels")
