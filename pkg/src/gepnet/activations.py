"""Activation catalogue and one-dimensional Gaussian moments.

Every coefficient entering the equivalent-linear description of a random
layer is a Gaussian expectation of its activation: the mean E[sigma(z)], the
linear response E[z sigma(z)] and the second moment E[sigma(z)^2], taken
under z ~ N(0, r).  This module evaluates those moments to near machine
precision, with closed forms where quadrature would struggle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericalError
from .quadrature import adaptive_gauss, gauss_hermite_mean

DEFAULT_ORDER = 201
ZERO_MEAN_TOL = 1e-10
STABILITY_TOL = 1e-10

PLAIN = "plain"
TIMES_Z = "times_z"
SQUARE = "square"
_WEIGHTS = (PLAIN, TIMES_Z, SQUARE)

_SHIFT = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ActivationKind:
    """A scalar nonlinearity, identified by tag plus optional parameters.

    Tags: ``tanh_scale`` and ``erf_scale`` carry a gain ``a`` (sigma(x) =
    tanh(a x), erf(a x)); ``sign``, ``shifted_relu`` and ``identity`` are
    parameter free; ``tabulated`` interpolates user-supplied (x, sigma(x))
    nodes with a monotone piecewise cubic.
    """

    tag: str
    a: float | None = None
    nodes: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.tag in ("tanh_scale", "erf_scale"):
            if self.a is None or not (self.a > 0):
                raise DomainError(f"{self.tag} requires a positive gain, got {self.a}")
        elif self.tag == "tabulated":
            if self.nodes is None or len(self.nodes) < 4:
                raise DomainError("tabulated activation needs at least 4 nodes")
            xs = [x for x, _ in self.nodes]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise DomainError("tabulated nodes must have strictly increasing x")
        elif self.tag not in ("sign", "shifted_relu", "identity"):
            raise DomainError(f"unknown activation tag {self.tag!r}")

    @property
    def label(self) -> str:
        if self.a is not None:
            return f"{self.tag}({self.a:g})"
        return self.tag

    def __repr__(self):  # keep frozen-dataclass repr short for tabulated kinds
        if self.tag == "tabulated":
            return f"ActivationKind('tabulated', nodes=<{len(self.nodes)}>)"
        return f"ActivationKind({self.label!r})"


def tanh_scale(a: float) -> ActivationKind:
    return ActivationKind("tanh_scale", a=float(a))


def erf_scale(a: float) -> ActivationKind:
    return ActivationKind("erf_scale", a=float(a))


def tabulated(nodes) -> ActivationKind:
    return ActivationKind("tabulated", nodes=tuple((float(x), float(y)) for x, y in nodes))


SIGN = ActivationKind("sign")
SHIFTED_RELU = ActivationKind("shifted_relu")
IDENTITY = ActivationKind("identity")

_interp_cache: dict[ActivationKind, PchipInterpolator] = {}


def _interpolator(kind: ActivationKind) -> PchipInterpolator:
    interp = _interp_cache.get(kind)
    if interp is None:
        pts = np.asarray(kind.nodes, dtype=float)
        interp = PchipInterpolator(pts[:, 0], pts[:, 1], extrapolate=False)
        _interp_cache[kind] = interp
    return interp


def evaluate(kind: ActivationKind, x):
    """sigma(x), elementwise over arrays.  Tabulated kinds reject inputs
    outside the node range."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("activation input must be finite")
    if kind.tag == "tanh_scale":
        out = np.tanh(kind.a * x)
    elif kind.tag == "erf_scale":
        from scipy.special import erf
        out = erf(kind.a * x)
    elif kind.tag == "sign":
        out = np.sign(x)
    elif kind.tag == "shifted_relu":
        out = np.maximum(x, 0.0) - _SHIFT
    elif kind.tag == "identity":
        out = x.copy()
    else:
        lo, hi = kind.nodes[0][0], kind.nodes[-1][0]
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(
                f"tabulated activation evaluated outside its node range [{lo:g}, {hi:g}]")
        out = _interpolator(kind)(x)
    if out.ndim == 0:
        return float(out)
    return out


def _closed_form(kind: ActivationKind, r: float, weight: str):
    """Exact moments for kinds where Gauss-Hermite converges slowly or is
    pointless: sign (discontinuous), shifted ReLU (kinked), identity."""
    if kind.tag == "sign":
        return {PLAIN: 0.0, TIMES_Z: math.sqrt(2.0 * r / math.pi), SQUARE: 1.0}[weight]
    if kind.tag == "identity":
        return {PLAIN: 0.0, TIMES_Z: r, SQUARE: r}[weight]
    if kind.tag == "shifted_relu":
        m = math.sqrt(r / (2.0 * math.pi))  # E[max(z,0)]
        if weight == PLAIN:
            return m - _SHIFT
        if weight == TIMES_Z:
            return r / 2.0
        return r / 2.0 - 2.0 * _SHIFT * m + _SHIFT ** 2
    return None


def gaussian_moment(kind: ActivationKind, r: float, weight: str,
                    order: int = DEFAULT_ORDER) -> float:
    """E_{z ~ N(0, r)}[w(z) sigma(z)] with w(z) = 1, z, or sigma(z).

    Smooth kinds use Gauss-Hermite of the requested order and are verified by
    doubling: if the order and 2*order+1 rules disagree beyond 1e-10 a
    NumericalError is raised.  Sign, identity and shifted ReLU use closed
    forms (quadrature on a kink or jump converges only algebraically).
    """
    if not (r > 0):
        raise DomainError(f"gaussian_moment needs r > 0, got {r}")
    if weight not in _WEIGHTS:
        raise DomainError(f"weight must be one of {_WEIGHTS}, got {weight!r}")
    closed = _closed_form(kind, r, weight)
    if closed is not None:
        return closed

    if kind.tag == "tabulated":
        lo, hi = kind.nodes[0][0], kind.nodes[-1][0]
        reach = 8.0 * math.sqrt(r)
        if lo > -reach or hi < reach:
            raise DomainError(
                f"tabulated node range [{lo:g}, {hi:g}] too narrow for r={r:g} "
                f"(needs +-{reach:g})")
        interp = _interpolator(kind)

        def sigma(z):
            return interp(np.clip(z, lo, hi))
    else:
        def sigma(z):
            return evaluate(kind, z)

    def integrand(z):
        s = sigma(z)
        if weight == TIMES_Z:
            return z * s
        if weight == SQUARE:
            return s * s
        return s

    # Gauss-Hermite at the requested order, verified by doubling.  tanh-type
    # kinds have poles near the real axis, so at large r the plain rule
    # converges only root-exponentially; escalate the order once and fall
    # back to adaptive panels rather than returning an unconverged value.
    n = order
    coarse = gauss_hermite_mean(integrand, r, n)
    fine = gauss_hermite_mean(integrand, r, 2 * n + 1)
    for _ in range(2):
        if abs(fine - coarse) <= 1e-13:
            return fine
        n = 2 * n + 1
        coarse = fine
        fine = gauss_hermite_mean(integrand, r, 2 * n + 1)
    if abs(fine - coarse) <= 1e-13:
        return fine

    def weighted(z):
        return integrand(z) * np.exp(-z * z / (2.0 * r)) / math.sqrt(2.0 * math.pi * r)

    reach = 12.0 * math.sqrt(r)
    value = adaptive_gauss(weighted, -reach, reach, tol=1e-13)
    # the panel integrator controls its own error to 1e-13; the escalated
    # Hermite value only serves as a gross-error tripwire here
    if abs(value - fine) > 1e-6 * max(1.0, abs(value)):
        raise NumericalError(
            f"Gaussian moment for {kind.label} at r={r:g} failed to stabilize "
            f"(Hermite {fine!r} vs adaptive {value!r})")
    return value


def kappa_coefficients(kind: ActivationKind, r: float, order: int = DEFAULT_ORDER):
    """(kappa1, kappa_star, second_moment) of an activation at input variance r.

    kappa1 = E[z sigma(z)] / r is the linear-response coefficient and
    kappa_star^2 = E[sigma^2] - r kappa1^2 the residual (nonlinear) variance.
    Round-off can push the kappa_star^2 discriminant slightly negative; values
    above -1e-10 are clamped to zero, anything lower is an error.
    """
    sq = gaussian_moment(kind, r, SQUARE, order=order)
    k1 = gaussian_moment(kind, r, TIMES_Z, order=order) / r
    disc = sq - r * k1 * k1
    if disc < -1e-10:
        raise NumericalError(
            f"negative residual variance {disc:.3e} for {kind.label} at r={r:g}")
    return k1, math.sqrt(max(disc, 0.0)), sq


def zero_mean_at(kind: ActivationKind, r: float, tol: float = ZERO_MEAN_TOL) -> bool:
    """True iff |E_{z~N(0,r)}[sigma(z)]| < tol."""
    return abs(gaussian_moment(kind, r, PLAIN)) < tol


def is_odd(kind: ActivationKind) -> bool:
    """Whether the kind is odd by construction (tabulated kinds are not assumed odd)."""
    return kind.tag in ("tanh_scale", "erf_scale", "sign", "identity")


def activation_to_json(kind: ActivationKind) -> dict:
    out = {"kind": kind.tag}
    if kind.a is not None:
        out["a"] = kind.a
    if kind.nodes is not None:
        out["nodes"] = [list(p) for p in kind.nodes]
    return out


def activation_from_json(obj) -> ActivationKind:
    """Parse an activation from a JSON object or a compact string like 'tanh:2'."""
    if isinstance(obj, str):
        name, _, param = obj.partition(":")
        name = name.strip().lower()
        aliases = {"tanh": "tanh_scale", "erf": "erf_scale", "relu": "shifted_relu"}
        name = aliases.get(name, name)
        if name in ("tanh_scale", "erf_scale"):
            return ActivationKind(name, a=float(param) if param else 1.0)
        if name in ("sign", "shifted_relu", "identity"):
            return ActivationKind(name)
        raise DomainError(f"cannot parse activation string {obj!r}")
    tag = obj["kind"]
    if tag == "tabulated":
        return tabulated(obj["nodes"])
    if tag in ("tanh_scale", "erf_scale"):
        return ActivationKind(tag, a=float(obj["a"]))
    return ActivationKind(tag)
