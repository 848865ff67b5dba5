"""Limiting input spectra, rational-function integration and the
Marchenko-Pastur Stieltjes transform.

The asymptotic fixed-point systems only ever integrate small rational
functions (polynomial numerators of degree <= 3 over an affine denominator
raised to power <= 2) against the limiting spectrum of the input covariance,
so the measure interface is built around exactly that algebra instead of a
generic function type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError
from .quadrature import legendre_rule

MASS_TOL = 1e-10
POLE_TOL = 1e-12


@dataclass(frozen=True)
class TabulatedDensity:
    """Non-negative density sampled on a strictly increasing grid; values are
    interpolated with a monotone piecewise cubic between nodes."""

    grid: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        if g.size != v.size or g.size < 4:
            raise DomainError("density needs matching grid/values with >= 4 nodes")
        if np.any(np.diff(g) <= 0):
            raise DomainError("density grid must be strictly increasing")
        if np.any(v < 0):
            raise DomainError("density values must be non-negative")


@dataclass(frozen=True)
class SpectralMeasure:
    """Limiting spectrum of the input covariance: point masses plus an
    optional tabulated density, normalized to total mass one."""

    atoms: tuple[tuple[float, float], ...] = ()
    density: TabulatedDensity | None = None

    def __post_init__(self):
        for loc, mass in self.atoms:
            if loc < 0:
                raise DomainError(f"atom location {loc} must be non-negative")
            if mass <= 0:
                raise DomainError(f"atom mass {mass} must be positive")
        total = sum(m for _, m in self.atoms) + self._density_mass()
        if abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"total spectral mass {total!r} differs from 1")
        if not (self.moment(1) > 0):
            raise DomainError("spectrum must have a positive first moment")

    def _density_panels(self):
        interp = PchipInterpolator(np.asarray(self.density.grid),
                                   np.asarray(self.density.values), extrapolate=False)
        t, w = legendre_rule(16)
        g = np.asarray(self.density.grid)
        lo, hi = g[:-1], g[1:]
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * t[None, :]
        wt = half[:, None] * w[None, :] * interp(x)
        return x.ravel(), wt.ravel()

    def _density_mass(self) -> float:
        if self.density is None:
            return 0.0
        _, wt = self._density_panels()
        return float(wt.sum())

    def support_points(self) -> np.ndarray:
        """Atom locations plus the density interval endpoints (for pole checks)."""
        pts = [loc for loc, _ in self.atoms]
        if self.density is not None:
            pts.extend([self.density.grid[0], self.density.grid[-1]])
        return np.asarray(pts)

    def support_interval(self):
        """(min, max) of the support."""
        pts = self.support_points()
        return float(pts.min()), float(pts.max())

    def expect(self, func) -> float:
        """Integrate an arbitrary vectorized function (internal helper; the
        public contract for solvers is `integrate` over rational descriptors)."""
        total = 0.0
        for loc, mass in self.atoms:
            total += mass * float(func(np.asarray(loc)))
        if self.density is not None:
            x, wt = self._density_panels()
            total += float(np.dot(wt, func(x)))
        return total

    def moment(self, k: int) -> float:
        return self.expect(lambda z: z ** k)

    def to_json(self) -> dict:
        out = {"atoms": [list(a) for a in self.atoms]}
        if self.density is not None:
            out["density"] = {"grid": list(self.density.grid),
                              "values": list(self.density.values)}
        return out

    @staticmethod
    def from_json(obj) -> "SpectralMeasure":
        density = None
        if obj.get("density"):
            density = TabulatedDensity(tuple(obj["density"]["grid"]),
                                       tuple(obj["density"]["values"]))
        return SpectralMeasure(tuple((float(l), float(m)) for l, m in obj.get("atoms", [])),
                               density)


def point_mass(loc: float = 1.0) -> SpectralMeasure:
    return SpectralMeasure(atoms=((float(loc), 1.0),))


@dataclass(frozen=True)
class RationalFn:
    """num(z) / (a + b z)^power with deg num <= 3 and power in {0, 1, 2}.

    ``num`` holds ascending polynomial coefficients.  This closed algebra is
    exactly what the saddle-point integrals require.
    """

    num: tuple[float, ...]
    a: float = 1.0
    b: float = 0.0
    power: int = 0

    def __post_init__(self):
        if len(self.num) > 4:
            raise DomainError("rational numerator degree must be <= 3")
        if self.power not in (0, 1, 2):
            raise DomainError("denominator power must be 0, 1 or 2")

    def pole(self) -> float | None:
        if self.power == 0 or self.b == 0.0:
            return None
        return -self.a / self.b

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        num = np.zeros_like(z)
        for c in reversed(self.num):
            num = num * z + c
        if self.power == 0:
            return num
        den = self.a + self.b * z
        return num / den ** self.power


def integrate(mu: SpectralMeasure, f: RationalFn) -> float:
    """Integrate a rational descriptor against the measure.

    Atoms are summed exactly; the density part uses 16-point Gauss-Legendre
    panels between its grid nodes.  Raises DomainError if the denominator
    root comes within 1e-12 of the support.
    """
    pole = f.pole()
    if pole is not None:
        pts = mu.support_points()
        dist = np.abs(pts - pole).min()
        if mu.density is not None:
            lo, hi = mu.density.grid[0], mu.density.grid[-1]
            if lo - POLE_TOL < pole < hi + POLE_TOL:
                dist = 0.0
        if dist <= POLE_TOL:
            raise DomainError(f"denominator root at z={pole!r} lies on the spectrum support")
    return mu.expect(f)


@dataclass(frozen=True)
class MarchenkoPastur:
    """Limiting spectrum of F F^T / d for an (aspect-ratio gamma) Gaussian
    matrix F with entry variance ``variance``.

    Bulk support is variance * (sqrt(gamma) -+ 1)^2; for gamma > 1 a point
    mass (1 - 1/gamma) sits at zero.
    """

    gamma: float
    variance: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and self.variance > 0):
            raise DomainError("MarchenkoPastur needs positive gamma and variance")

    @property
    def edges(self):
        lo = self.variance * (math.sqrt(self.gamma) - 1.0) ** 2
        hi = self.variance * (math.sqrt(self.gamma) + 1.0) ** 2
        return lo, hi

    @property
    def zero_mass(self) -> float:
        return max(0.0, 1.0 - 1.0 / self.gamma)


def mp_stieltjes(mp: MarchenkoPastur, z: float):
    """(g, g') of the Marchenko-Pastur law at a real point below the bulk.

    g(z) = int d rho(s) / (s - z), including the zero atom when gamma > 1.
    The quadratic branch is fixed by g(z) -> -1/z as z -> -infinity.  Points
    inside the bulk, or at the atom location for gamma > 1, are rejected.
    """
    y = mp.gamma
    lo, _ = mp.edges
    scale = max(mp.variance, 1.0)
    if z >= lo - 1e-12 * scale:
        raise DomainError(f"Stieltjes argument z={z!r} not below the bulk edge {lo!r}")
    if mp.zero_mass > 0 and abs(z) <= 1e-12 * scale:
        raise DomainError("Stieltjes argument hits the point mass at zero")

    u = z / mp.variance
    a = 1.0 - y - u
    disc = a * a - 4.0 * y * u
    root = math.sqrt(disc)
    if a >= 0.0:
        m = 2.0 / (a + root)
    else:
        m = (a - root) / (2.0 * y * u)
    m_prime = (y * m * m + m) / (a - 2.0 * y * u * m)
    return m / mp.variance, m_prime / mp.variance ** 2


def mp_weighted_stieltjes(mp: MarchenkoPastur, z: float):
    """Companion transforms (B, C, S2) of the Marchenko-Pastur law at z below
    the bulk: B = int s/(s-z) drho, C = int s/(s-z)^2 drho, S2 = int
    s^2/(s-z)^2 drho.

    B solves y B^2 - (1+y-u) B + 1 = 0 (u = z/variance), whose discriminant
    stays positive below the bulk; C and S2 follow by differentiation.  These
    forms avoid the catastrophic cancellation that plagues assembling the
    same integrals from g and g' when z is far below the support.
    """
    y = mp.gamma
    lo, _ = mp.edges
    scale = max(mp.variance, 1.0)
    if z >= lo - 1e-12 * scale:
        raise DomainError(f"Stieltjes argument z={z!r} not below the bulk edge {lo!r}")
    u = z / mp.variance
    ap = 1.0 + y - u  # always >= 2 sqrt(y) below the bulk
    b = 2.0 / (ap + math.sqrt(ap * ap - 4.0 * y))
    den = ap - 2.0 * y * b
    b_prime = b / den
    s2 = b * (1.0 + y - 2.0 * y * b) / den
    return b, b_prime / mp.variance, s2
