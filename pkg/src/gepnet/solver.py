"""Damped fixed-point driver shared by all saddle-point systems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


@dataclass(frozen=True)
class Overlaps:
    """Order-parameter state of a solved system plus convergence metadata."""

    V: float
    q: float
    m: float
    V_hat: float
    q_hat: float
    m_hat: float
    iterations: int = 0
    residual: float = math.inf


@dataclass(frozen=True)
class SolverConfig:
    """Iteration knobs: convex-combination damping x <- (1-eta) x + eta f(x),
    sup-norm tolerance on the last update, and an optional explicit start."""

    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 100_000
    init: Overlaps | None = None

    def __post_init__(self):
        if not (0 < self.damping <= 1):
            raise ValueError("damping must lie in (0, 1]")
        if not (self.tol > 0 and self.max_iter > 0):
            raise ValueError("tol and max_iter must be positive")


DEFAULT_CONFIG = SolverConfig()


def fixed_point(update, x0, cfg: SolverConfig | None = None):
    """Iterate x <- (1-eta) x + eta update(x) until the update stabilizes.

    The damping eta starts at cfg.damping and is halved whenever the residual
    (sup-norm of the damped step) grows for 10 consecutive iterations, which
    tames oscillatory systems without touching the fixed point.  Returns
    (x, iterations, residual); raises ConvergenceError past max_iter.
    """
    cfg = cfg or DEFAULT_CONFIG
    x = np.asarray(x0, dtype=float).copy()
    eta = cfg.damping
    prev_res = math.inf
    growing = 0
    for it in range(1, cfg.max_iter + 1):
        raw = np.asarray(update(x), dtype=float)
        x_new = (1.0 - eta) * x + eta * raw
        res = float(np.max(np.abs(x_new - x)))
        if not np.all(np.isfinite(x_new)):
            raise ConvergenceError("fixed-point iterate diverged to non-finite values",
                                   residual=res, iterations=it)
        x = x_new
        if res < cfg.tol:
            return x, it, res
        if res > prev_res:
            growing += 1
            if growing >= 10:
                eta *= 0.5
                growing = 0
        else:
            growing = 0
        prev_res = res
    raise ConvergenceError(
        f"fixed point not reached after {cfg.max_iter} iterations (residual {prev_res:.3e})",
        residual=prev_res, iterations=cfg.max_iter)
