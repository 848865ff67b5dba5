"""Layer-coefficient recursion and the equivalent shallow description.

A deep random network with zero-mean activations shares its second-order
output statistics with a noisy linear network whose per-layer coefficients
(kappa1, kappa_star) are Gaussian moments of the activations at the running
pre-activation variance r_l.  Collapsing the linear chain gives a single
effective signal strength rho and residual error eps_r: the network behaves,
for learning purposes at linear sample complexity, like
y = f(sqrt(rho) theta.x / sqrt(d) + sqrt(eps_r) xi).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import activations as act
from .activations import ActivationKind
from .errors import DomainError, ModelError, NonOddActivationWarning
from .spectrum import SpectralMeasure, point_mass

ZERO_MEAN_TOL = 1e-8


@dataclass(frozen=True)
class NetworkSpec:
    """Full description of a random target network.

    ``widths`` are the width/dimension ratios gamma_l = k_l / d.  They are
    carried for the finite-size simulator only: the limiting recursion below
    is independent of them, which is itself a nontrivial statement about the
    proportional regime.
    """

    widths: tuple[float, ...]
    weight_vars: tuple[float, ...]
    activations: tuple[ActivationKind, ...]
    readout_var: float = 1.0
    noise_var: float = 0.0
    input_spectrum: SpectralMeasure = None

    def __post_init__(self):
        if self.input_spectrum is None:
            object.__setattr__(self, "input_spectrum", point_mass(1.0))
        L = len(self.activations)
        if not (len(self.widths) == len(self.weight_vars) == L and L >= 1):
            raise ModelError("widths, weight_vars and activations must share length L >= 1")
        if any(g <= 0 for g in self.widths):
            raise ModelError("width ratios must be positive")
        if any(v <= 0 for v in self.weight_vars):
            raise ModelError("weight variances must be positive")
        if not (self.readout_var > 0):
            raise ModelError("readout variance must be positive")
        if self.noise_var < 0:
            raise ModelError("label noise variance must be non-negative")

    @property
    def depth(self) -> int:
        return len(self.activations)

    def to_json(self) -> dict:
        return {
            "widths": list(self.widths),
            "weight_vars": list(self.weight_vars),
            "activations": [act.activation_to_json(k) for k in self.activations],
            "readout_var": self.readout_var,
            "noise_var": self.noise_var,
            "input_spectrum": self.input_spectrum.to_json(),
        }

    @staticmethod
    def from_json(obj) -> "NetworkSpec":
        spectrum = point_mass(1.0)
        if "input_spectrum" in obj:
            spectrum = SpectralMeasure.from_json(obj["input_spectrum"])
        return NetworkSpec(
            widths=tuple(float(g) for g in obj["widths"]),
            weight_vars=tuple(float(v) for v in obj["weight_vars"]),
            activations=tuple(act.activation_from_json(a) for a in obj["activations"]),
            readout_var=float(obj.get("readout_var", 1.0)),
            noise_var=float(obj.get("noise_var", 0.0)),
            input_spectrum=spectrum,
        )


@dataclass(frozen=True)
class GepProfile:
    """Per-layer coefficients plus the collapsed shallow parameters.

    ``r[l]`` is the pre-activation variance entering layer l+1 (0-based),
    ``rho`` the effective signal strength, ``eps_r`` the residual error
    (label noise included) and ``check_q`` the limiting output variance.
    """

    r: tuple[float, ...]
    kappa1: tuple[float, ...]
    kappa_star: tuple[float, ...]
    rho: float
    eps_r: float
    check_q: float
    weight_vars: tuple[float, ...]
    readout_var: float
    noise_var: float
    mu1: float  # first moment of the input spectrum

    @property
    def depth(self) -> int:
        return len(self.kappa1)

    @property
    def kappa1_product(self) -> float:
        """prod_l kappa1^(l), signed."""
        return float(np.prod(self.kappa1))

    @property
    def signal_d(self) -> float:
        """D = readout_var * prod_l weight_vars[l]; rho = kappa1_product^2 * D."""
        return self.readout_var * float(np.prod(self.weight_vars))

    def trace_shift(self, layer: int) -> float:
        """Limiting tr(Omega_layer)/k_layer, the identity shift used when
        displaying covariance slices (CLI only, never stored)."""
        total = self.mu1
        for l in range(layer):
            total = self.kappa1[l] ** 2 * self.weight_vars[l] * total + self.kappa_star[l] ** 2
        return total


def propagate(spec: NetworkSpec, order: int = act.DEFAULT_ORDER) -> GepProfile:
    """Run the coefficient recursion through all layers of ``spec``.

    r_1 = Delta_1 * int z dmu(z);  r_{l+1} = Delta_{l+1} E_{N(0,r_l)}[sigma_l^2];
    kappa1 = E[z sigma]/r, kappa_star^2 = E[sigma^2] - r kappa1^2.

    Every activation must have Gaussian mean below 1e-8 at its operating
    variance; non-odd kinds that pass the check still draw a warning since
    the limiting formulas are only proven under the stronger oddness
    assumption.
    """
    mu1 = spec.input_spectrum.moment(1)
    r_list, k1_list, ks_list = [], [], []
    r = spec.weight_vars[0] * mu1
    for l, kind in enumerate(spec.activations):
        mean = act.gaussian_moment(kind, r, act.PLAIN, order=order)
        if abs(mean) > ZERO_MEAN_TOL:
            raise ModelError(
                f"layer {l + 1} activation {kind.label} has Gaussian mean {mean:.3e} "
                f"at r={r:.6g}; the recursion requires zero mean")
        if not act.is_odd(kind):
            warnings.warn(
                f"layer {l + 1} activation {kind.label} is zero-mean at r={r:.6g} but "
                "not odd; limiting formulas extend heuristically",
                NonOddActivationWarning, stacklevel=2)
        k1, ks, sq = act.kappa_coefficients(kind, r, order=order)
        r_list.append(r)
        k1_list.append(k1)
        ks_list.append(ks)
        if l + 1 < spec.depth:
            r = spec.weight_vars[l + 1] * sq

    L = spec.depth
    da = spec.readout_var
    rho = da * float(np.prod([k1_list[l] ** 2 * spec.weight_vars[l] for l in range(L)]))
    eps_r = spec.noise_var
    for l0 in range(L):
        term = ks_list[l0] ** 2 * da
        for l in range(l0 + 1, L):
            term *= k1_list[l] ** 2 * spec.weight_vars[l]
        eps_r += term
    check_q = rho * mu1 + eps_r - spec.noise_var
    return GepProfile(
        r=tuple(r_list), kappa1=tuple(k1_list), kappa_star=tuple(ks_list),
        rho=rho, eps_r=eps_r, check_q=check_q,
        weight_vars=spec.weight_vars, readout_var=da, noise_var=spec.noise_var,
        mu1=mu1)


def equivalent_shallow(profile: GepProfile) -> tuple[float, float]:
    """(rho, eps_r) of the single-layer surrogate target."""
    return profile.rho, profile.eps_r


def collapse_spec(profile: GepProfile, spectrum: SpectralMeasure | None = None) -> NetworkSpec:
    """Single-layer identity spec with the same limiting Bayes behaviour:
    signal variance rho, all residual error folded into the label noise.
    Pass the original input spectrum to keep anisotropic setups comparable."""
    return NetworkSpec(
        widths=(1.0,), weight_vars=(profile.rho,), activations=(act.IDENTITY,),
        readout_var=1.0, noise_var=profile.eps_r,
        input_spectrum=spectrum)
