"""Finite-size realizations of network specs: weights, inputs, forward passes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import activations as act
from .errors import ModelError
from .gep import NetworkSpec
from .rng import stream
from .spectrum import SpectralMeasure

INPUT_BATCH = 16384


@dataclass(frozen=True)
class WeightSet:
    """One draw of a spec's weights: per-layer matrices plus the readout."""

    layers: tuple[np.ndarray, ...]
    readout: np.ndarray
    seed: int

    @property
    def dim(self) -> int:
        return self.layers[0].shape[1]

    def check_shapes(self, spec: NetworkSpec):
        prev = self.dim
        if len(self.layers) != spec.depth:
            raise ModelError(f"weight set has {len(self.layers)} layers, spec has {spec.depth}")
        for l, W in enumerate(self.layers):
            if W.shape[1] != prev:
                raise ModelError(f"layer {l + 1} weight shape {W.shape} does not chain")
            prev = W.shape[0]
        if self.readout.shape != (prev,):
            raise ModelError("readout length does not match last layer width")


def layer_widths(spec: NetworkSpec, d: int) -> list[int]:
    widths = [max(1, round(g * d)) for g in spec.widths]
    return widths


def sample_weights(spec: NetworkSpec, d: int, seed: int) -> WeightSet:
    """Gaussian weights with the spec's variances, derived from counter-based
    streams so the same seed always yields bit-identical draws."""
    if d < 2:
        raise ModelError("input dimension must be at least 2")
    widths = layer_widths(spec, d)
    prev = d
    layers = []
    for l, (k, var) in enumerate(zip(widths, spec.weight_vars)):
        rng = stream(seed, "weights.layer", l)
        layers.append(rng.normal(0.0, np.sqrt(var), size=(k, prev)))
        prev = k
    readout = stream(seed, "weights.readout").normal(0.0, np.sqrt(spec.readout_var), size=prev)
    return WeightSet(layers=tuple(layers), readout=readout, seed=seed)


def realize_sigma_diagonal(spectrum: SpectralMeasure, d: int) -> np.ndarray:
    """Deterministic length-d eigenvalue vector matching the limiting spectrum.

    Atom masses are converted to proportional eigenvalue counts (largest
    remainder rounding); a tabulated density fills its share by inverse-CDF
    midpoints.  The returned vector is the diagonal of Sigma in its eigenbasis,
    which is all that Gaussian-weight networks can depend on.
    """
    counts = [mass * d for _, mass in spectrum.atoms]
    floors = [math.floor(c) for c in counts]
    remaining = d - sum(floors)
    if spectrum.density is not None:
        dens_share = remaining
    else:
        order = np.argsort([f - c for f, c in zip(floors, counts)])
        for i in range(remaining):
            floors[order[i % len(floors)]] += 1
        dens_share = 0
    eigs = []
    for (loc, _), cnt in zip(spectrum.atoms, floors):
        eigs.extend([loc] * cnt)
    if dens_share:
        x, wt = spectrum._density_panels()
        cdf = np.cumsum(wt)
        cdf /= cdf[-1]
        targets = (np.arange(dens_share) + 0.5) / dens_share
        eigs.extend(np.interp(targets, cdf, x))
    return np.asarray(sorted(eigs), dtype=float)


def sample_inputs(spectrum: SpectralMeasure, d: int, n: int, seed: int,
                  purpose: str = "inputs", index: int = 0) -> np.ndarray:
    eigs = realize_sigma_diagonal(spectrum, d)
    rng = stream(seed, purpose, index)
    return rng.normal(0.0, 1.0, size=(n, d)) * np.sqrt(eigs)


def hidden_activations(spec: NetworkSpec, weights: WeightSet, X: np.ndarray,
                       layer: int) -> np.ndarray:
    """Post-activations h_layer for a batch of inputs (layer 0 returns X)."""
    weights.check_shapes(spec)
    h = X
    prev = weights.dim
    for l in range(layer):
        W = weights.layers[l]
        h = act.evaluate(spec.activations[l], h @ W.T / np.sqrt(prev))
        prev = W.shape[0]
    return h


def network_output(spec: NetworkSpec, weights: WeightSet, X: np.ndarray) -> np.ndarray:
    """Pre-readout scalar output a.h_L / sqrt(k_L) for each row of X."""
    h = hidden_activations(spec, weights, X, spec.depth)
    return h @ weights.readout / np.sqrt(h.shape[1])
