"""Closed-form population covariances of deep random networks, their
empirical estimates, and Gaussianity diagnostics of the scalar output.

The population covariance of layer-l post-activations obeys the linear-layer
recursion Omega_l = kappa1_l^2 W_l Omega_{l-1} W_l^T / k_{l-1} +
kappa_star_l^2 I with Omega_0 = Sigma, and the cross-covariance between two
independent networks is a kappa1-weighted weight-chain sandwich; both are
checked here against sample estimates.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sstats

from .errors import DomainError, ModelError
from .gep import GepProfile, NetworkSpec, propagate
from .kstats import k_statistic
from .nets import (WeightSet, hidden_activations, network_output,
                   sample_inputs, sample_weights)
from .rng import stream

__all__ = [
    "WeightSet", "CovarianceReport", "GaussianityReport",
    "theory_covariance", "cross_covariance", "empirical_covariance",
    "covariance_report", "gaussianity_diagnostics", "write_matrix", "read_matrix",
]

SAMPLE_BATCH = 8192
MATRIX_MAGIC = b"GEPNMAT1"


@dataclass(frozen=True)
class CovarianceReport:
    layer: int
    theory: np.ndarray
    empirical: np.ndarray
    rel_frobenius: float
    n_samples: int

    def to_json(self) -> dict:
        return {"layer": self.layer, "rel_frobenius": self.rel_frobenius,
                "n_samples": self.n_samples, "dim": int(self.theory.shape[0])}


@dataclass(frozen=True)
class GaussianityReport:
    cumulants: dict
    ks_statistic: float
    qq_points: list
    scaled_variance: float
    n_samples: int

    def to_json(self) -> dict:
        return {"cumulants": {str(k): v for k, v in self.cumulants.items()},
                "ks_statistic": self.ks_statistic,
                "scaled_variance": self.scaled_variance,
                "n_samples": self.n_samples,
                "qq_points": [list(p) for p in self.qq_points]}


def _profile_for(spec: NetworkSpec, profile: GepProfile | None) -> GepProfile:
    return profile if profile is not None else propagate(spec)


def theory_covariance(spec: NetworkSpec, weights: WeightSet, layer: int,
                      sigma: np.ndarray, profile: GepProfile | None = None) -> np.ndarray:
    """Population covariance Omega_layer of the post-activations at ``layer``.

    ``sigma`` is the input covariance realization (d x d, symmetric PSD);
    layer 0 returns it unchanged.
    """
    weights.check_shapes(spec)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (weights.dim, weights.dim):
        raise ModelError(f"sigma must be {weights.dim} x {weights.dim}")
    if not np.allclose(sigma, sigma.T, atol=1e-8):
        raise ModelError("sigma must be symmetric")
    if not 0 <= layer <= spec.depth:
        raise ModelError(f"layer must be in [0, {spec.depth}]")
    prof = _profile_for(spec, profile)
    omega = sigma
    prev = weights.dim
    for l in range(layer):
        W = weights.layers[l]
        omega = (prof.kappa1[l] ** 2 * (W @ omega @ W.T) / prev
                 + prof.kappa_star[l] ** 2 * np.eye(W.shape[0]))
        prev = W.shape[0]
    return omega


def cross_covariance(spec_star: NetworkSpec, weights_star: WeightSet, layer_star: int,
                     spec: NetworkSpec, weights: WeightSet, layer: int,
                     sigma: np.ndarray,
                     profile_star: GepProfile | None = None,
                     profile: GepProfile | None = None) -> np.ndarray:
    """Cross-covariance Phi between post-activations of two independent
    networks sharing the input: the kappa1-product times the weight chain
    W*_{l*} ... W*_1 Sigma W_1^T ... W_l^T over the sqrt width normalizers.
    """
    weights_star.check_shapes(spec_star)
    weights.check_shapes(spec)
    if weights_star.dim != weights.dim:
        raise ModelError("both networks must share the input dimension")
    if weights_star.seed == weights.seed:
        raise ModelError("cross covariance requires independently seeded weight sets")
    sigma = np.asarray(sigma, dtype=float)
    prof_star = _profile_for(spec_star, profile_star)
    prof = _profile_for(spec, profile)

    left = sigma
    prev = weights_star.dim
    coeff = 1.0
    for s in range(layer_star):
        W = weights_star.layers[s]
        left = W @ left / np.sqrt(prev)
        coeff *= prof_star.kappa1[s]
        prev = W.shape[0]
    prev = weights.dim
    for l in range(layer):
        W = weights.layers[l]
        left = left @ W.T / np.sqrt(prev)
        coeff *= prof.kappa1[l]
        prev = W.shape[0]
    return coeff * left


def empirical_covariance(spec: NetworkSpec, weights: WeightSet, layer: int,
                         n_samples: int, seed: int) -> np.ndarray:
    """Sample second-moment matrix of layer post-activations over fresh
    Gaussian inputs, accumulated in fixed batches and symmetrized."""
    if n_samples < 1000:
        raise DomainError("empirical covariance needs n_samples >= 1000")
    weights.check_shapes(spec)
    d = weights.dim
    width = d if layer == 0 else weights.layers[layer - 1].shape[0]
    acc = np.zeros((width, width))
    done = 0
    batch_index = 0
    while done < n_samples:
        m = min(SAMPLE_BATCH, n_samples - done)
        X = sample_inputs(spec.input_spectrum, d, m, seed, "cov.inputs", batch_index)
        h = hidden_activations(spec, weights, X, layer)
        acc += h.T @ h
        done += m
        batch_index += 1
    emp = acc / n_samples
    return (emp + emp.T) / 2.0


def rel_frobenius_sq(empirical: np.ndarray, theory: np.ndarray) -> float:
    """||emp - theory||_F^2 / ||emp||_F^2."""
    return float(np.sum((empirical - theory) ** 2) / np.sum(empirical ** 2))


def covariance_report(spec: NetworkSpec, weights: WeightSet, layer: int,
                      n_samples: int, seed: int, sigma: np.ndarray | None = None
                      ) -> CovarianceReport:
    if sigma is None:
        from .nets import realize_sigma_diagonal
        sigma = np.diag(realize_sigma_diagonal(spec.input_spectrum, weights.dim))
    theory = theory_covariance(spec, weights, layer, sigma)
    emp = empirical_covariance(spec, weights, layer, n_samples, seed)
    return CovarianceReport(layer=layer, theory=theory, empirical=emp,
                            rel_frobenius=rel_frobenius_sq(emp, theory),
                            n_samples=n_samples)


def gaussianity_diagnostics(spec: NetworkSpec, weights: WeightSet, n_samples: int,
                            seed: int, profile: GepProfile | None = None
                            ) -> GaussianityReport:
    """Scaled-output diagnostics: even k-statistics of orders 4, 6, 8, the
    Kolmogorov-Smirnov distance to a standard normal, and 99 QQ points."""
    if n_samples < 10_000:
        raise DomainError("gaussianity diagnostics need n_samples >= 10^4")
    prof = _profile_for(spec, profile)
    d = weights.dim
    out = np.empty(n_samples)
    done = 0
    batch_index = 0
    while done < n_samples:
        m = min(SAMPLE_BATCH, n_samples - done)
        X = sample_inputs(spec.input_spectrum, d, m, seed, "gauss.inputs", batch_index)
        out[done:done + m] = network_output(spec, weights, X)
        done += m
        batch_index += 1
    scaled = out / np.sqrt(prof.check_q)
    cumulants = {order: k_statistic(scaled, order) for order in (4, 6, 8)}
    ks = float(_sstats.kstest(scaled, "norm").statistic)
    probs = np.arange(1, 100) / 100.0
    qq = list(zip(_sstats.norm.ppf(probs).tolist(),
                  np.quantile(scaled, probs).tolist()))
    return GaussianityReport(cumulants=cumulants, ks_statistic=ks, qq_points=qq,
                             scaled_variance=float(np.var(scaled)),
                             n_samples=n_samples)


def write_matrix(path, M: np.ndarray):
    """Binary dump: 8-byte magic + uint32 rows + uint32 cols, then row-major
    little-endian float64 payload."""
    M = np.ascontiguousarray(M, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", M.shape[0], M.shape[1]))
        fh.write(M.tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MATRIX_MAGIC:
            raise DomainError(f"not a matrix dump: bad magic {magic!r}")
        rows, cols = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    return data.reshape(rows, cols).copy()


def sample_target(spec: NetworkSpec, d: int, seed: int) -> WeightSet:
    """Draw a finite-size target realization (re-exported by the simulator)."""
    return sample_weights(spec, d, seed)
