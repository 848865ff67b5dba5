"""Finite-size Monte Carlo: target sampling, dataset generation, exact convex
ERM (ridge, kernel, random features, logistic) and the quadratic-sample-regime
sweep.

Solver conventions.  fit_ridge and fit_random_features minimize the displayed
risks verbatim (unhalved squared loss, (lambda/2) penalty):

    w_ridge = (2 X^T X / d + lambda I)^{-1} (2/sqrt(d)) X^T y

The asymptotic systems in the theory module are written in the standard
half-loss normalization, so a theory point at lambda corresponds to the
simulators at lambda_sim = 2 * lambda; kernel regression solves the Gram
system (K + lambda I) a = y whose shift coincides with the theory lambda
directly.  The identity-kernel and identity-features degenerate cases pin
these mappings exactly and are enforced in the test suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg as sla

from . import activations as act
from .activations import ActivationKind
from .errors import (ConvergenceError, DomainError, ModelError,
                     NumericalError, ResourceCapError)
from .gep import GepProfile, NetworkSpec, propagate
from .nets import WeightSet, network_output, sample_inputs, sample_weights
from .quadrature import hermite_rule
from .rng import stream
from . import theory

REGRESSION = "regression"
CLASSIFICATION = "classification"

DEFAULT_N_TEST = 10_000
KERNEL_N_CAP = 20_000
QUADRATIC_D_CAP = 64


def sample_target(spec: NetworkSpec, d: int, seed: int) -> WeightSet:
    """Draw the finite-size target weights for dimension d (deterministic in seed)."""
    return sample_weights(spec, d, seed)


@dataclass(frozen=True)
class Dataset:
    """A labelled draw plus the references needed to produce fresh test data."""

    X: np.ndarray
    y: np.ndarray
    spec: NetworkSpec
    weights: WeightSet
    task: str
    generator_seed: int

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class ErmResult:
    method: str
    lam: float
    train_loss: float
    test_error: float
    test_std_error: float
    n_test: int
    wallclock: float

    def stable_json(self) -> dict:
        """Serialization without the volatile timing field (used by the
        determinism contract)."""
        return {"method": self.method, "lam": self.lam, "train_loss": self.train_loss,
                "test_error": self.test_error, "test_std_error": self.test_std_error,
                "n_test": self.n_test}


def _labels(spec: NetworkSpec, weights: WeightSet, X: np.ndarray, task: str,
            rng: np.random.Generator) -> np.ndarray:
    out = network_output(spec, weights, X)
    if spec.noise_var > 0:
        out = out + rng.normal(0.0, math.sqrt(spec.noise_var), size=out.shape)
    if task == CLASSIFICATION:
        return np.sign(out)
    return out


def generate(spec: NetworkSpec, weights: WeightSet, n: int, task: str, seed: int) -> Dataset:
    """Exact forward-pass labels on fresh Gaussian inputs; the additive noise
    enters before the readout nonlinearity (sign) for classification."""
    if n < 1:
        raise DomainError("need n >= 1 samples")
    if task not in (REGRESSION, CLASSIFICATION):
        raise DomainError(f"unknown task {task!r}")
    X = sample_inputs(spec.input_spectrum, weights.dim, n, seed, "data.train")
    y = _labels(spec, weights, X, task, stream(seed, "data.train-noise"))
    return Dataset(X=X, y=y, spec=spec, weights=weights, task=task, generator_seed=seed)


def test_batch(data: Dataset, n_test: int) -> tuple[np.ndarray, np.ndarray]:
    X = sample_inputs(data.spec.input_spectrum, data.d, n_test,
                      data.generator_seed, "data.test")
    y = _labels(data.spec, data.weights, X, data.task,
                stream(data.generator_seed, "data.test-noise"))
    return X, y


def _regression_result(method, lam, train_loss, predictions, y_test, t0) -> ErmResult:
    sq = (y_test - predictions) ** 2
    return ErmResult(method=method, lam=lam, train_loss=train_loss,
                     test_error=float(sq.mean()),
                     test_std_error=float(sq.std(ddof=1) / math.sqrt(sq.size)),
                     n_test=sq.size, wallclock=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# ridge
# ---------------------------------------------------------------------------

def fit_ridge(data: Dataset, lam: float, n_test: int = DEFAULT_N_TEST) -> ErmResult:
    """Exact minimizer of sum (y - w.x/sqrt(d))^2 + (lambda/2) ||w||^2.

    lambda <= 0 is allowed while 2 X^T X / d + lambda I stays positive
    definite (certified by the Cholesky factorization).
    """
    t0 = time.perf_counter()
    if data.n < 1:
        raise DomainError("ridge needs at least one sample")
    X, y = data.X, data.y
    d = data.d
    A = 2.0 * (X.T @ X) / d + lam * np.eye(d)
    try:
        cho = sla.cho_factor(A, check_finite=False)
    except sla.LinAlgError:
        raise DomainError("ridge system indefinite: lambda below the data threshold")
    w = sla.cho_solve(cho, (2.0 / math.sqrt(d)) * (X.T @ y), check_finite=False)
    resid = y - X @ w / math.sqrt(d)
    train_loss = float(resid @ resid + 0.5 * lam * (w @ w))
    Xt, yt = test_batch(data, n_test)
    return _regression_result("ridge", lam, train_loss, Xt @ w / math.sqrt(d), yt, t0)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    """Dot-product kernel: the closed-form arc-cosine (order 1) and arcsine
    kernels, or the width limit of any activation's random-feature map."""

    name: str
    activation: ActivationKind | None = None
    delta_f: float = 1.0


ARC_COSINE1 = KernelSpec("arccos1")
ARC_SINE = KernelSpec("arcsine")


def nngp(activation: ActivationKind, delta_f: float = 1.0) -> KernelSpec:
    return KernelSpec("nngp", activation=activation, delta_f=delta_f)


def bivariate_moment(kind: ActivationKind, var_u, var_v, cov, order: int = 64):
    """E[sigma(u) sigma(v)] for centered jointly Gaussian (u, v).

    Closed forms for identity, sign, shifted ReLU and erf gains; a tensorized
    Gauss-Hermite rule otherwise.  All arguments broadcast elementwise.
    """
    var_u, var_v, cov = np.broadcast_arrays(*(np.asarray(a, float) for a in (var_u, var_v, cov)))
    su, sv = np.sqrt(var_u), np.sqrt(var_v)
    corr = np.clip(cov / np.maximum(su * sv, 1e-300), -1.0, 1.0)
    if kind.tag == "identity":
        return cov.copy()
    if kind.tag == "sign":
        return (2.0 / math.pi) * np.arcsin(corr)
    if kind.tag == "erf_scale":
        a2 = kind.a ** 2
        return (2.0 / math.pi) * np.arcsin(
            2.0 * a2 * cov / np.sqrt((1.0 + 2.0 * a2 * var_u) * (1.0 + 2.0 * a2 * var_v)))
    if kind.tag == "shifted_relu":
        theta = np.arccos(corr)
        relu_part = (su * sv / (2.0 * math.pi)) * (np.sin(theta) + (math.pi - theta) * np.cos(theta))
        c = 1.0 / math.sqrt(2.0 * math.pi)
        return relu_part - c * (su + sv) / math.sqrt(2.0 * math.pi) + c * c
    t, w = hermite_rule(order)
    total = np.zeros(np.broadcast(var_u, cov).shape)
    resid = np.sqrt(np.maximum(var_v - cov ** 2 / np.maximum(var_u, 1e-300), 0.0))
    for a_node, a_w in zip(t, w):
        u = su * (math.sqrt(2.0) * a_node)
        su_safe = np.maximum(su, 1e-300)
        mean_v = cov / su_safe * (math.sqrt(2.0) * a_node)
        inner = np.zeros_like(total)
        for b_node, b_w in zip(t, w):
            v = mean_v + resid * (math.sqrt(2.0) * b_node)
            inner += b_w * act.evaluate(kind, v)
        total += a_w * act.evaluate(kind, u) * inner
    return total / math.pi


def gram(kernel: KernelSpec, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Kernel matrix k(x, x') from squared norms and inner products over d."""
    d = X1.shape[1]
    n1sq = (X1 * X1).sum(axis=1) / d
    n2sq = (X2 * X2).sum(axis=1) / d
    inner = X1 @ X2.T / d
    if kernel.name == "arccos1":
        su = np.sqrt(kernel.delta_f * n1sq)[:, None]
        sv = np.sqrt(kernel.delta_f * n2sq)[None, :]
        corr = np.clip(kernel.delta_f * inner / np.maximum(su * sv, 1e-300), -1.0, 1.0)
        theta = np.arccos(corr)
        return (su * sv / (2.0 * math.pi)) * (np.sin(theta) + (math.pi - theta) * np.cos(theta))
    if kernel.name == "arcsine":
        df = kernel.delta_f
        return (2.0 / math.pi) * np.arcsin(
            2.0 * df * inner / np.sqrt((1.0 + 2.0 * df * n1sq[:, None])
                                       * (1.0 + 2.0 * df * n2sq[None, :])))
    if kernel.name == "nngp":
        df = kernel.delta_f
        return bivariate_moment(kernel.activation, df * n1sq[:, None],
                                df * n2sq[None, :], df * inner)
    raise DomainError(f"unknown kernel {kernel.name!r}")


def fit_kernel(data: Dataset, kernel: KernelSpec, lam: float,
               n_test: int = DEFAULT_N_TEST, n_cap: int = KERNEL_N_CAP) -> ErmResult:
    """Kernel ridge regression with Gram shift (K + lambda I) a = y.

    The shift equals the asymptotic-theory lambda (pinned by the identity
    kernel degenerate case); negative lambda is allowed while K + lambda I
    stays positive definite, certified by an eigendecomposition.
    """
    t0 = time.perf_counter()
    if data.n > n_cap:
        raise ResourceCapError(f"Gram matrix for n={data.n} exceeds the cap {n_cap}")
    K = gram(kernel, data.X, data.X)
    A = K + lam * np.eye(data.n)
    if lam <= 0:
        evals, evecs = np.linalg.eigh(A)
        if evals.min() <= 0:
            raise DomainError("negative lambda exceeded implicit regularization: "
                              f"min eig(K + lambda I) = {evals.min():.3e}")
        coef = evecs @ ((evecs.T @ data.y) / evals)
    else:
        try:
            cho = sla.cho_factor(A, check_finite=False)
        except sla.LinAlgError:
            raise DomainError("regularized Gram matrix is not positive definite")
        coef = sla.cho_solve(cho, data.y, check_finite=False)
    resid = data.y - K @ coef
    train_loss = float(resid @ resid)
    Xt, yt = test_batch(data, n_test)
    preds = gram(kernel, Xt, data.X) @ coef
    name = kernel.name if kernel.activation is None else \
        f"nngp[{kernel.activation.label}]"
    return _regression_result(f"kernel:{name}", lam, train_loss, preds, yt, t0)


# ---------------------------------------------------------------------------
# random features
# ---------------------------------------------------------------------------

def fit_random_features(data: Dataset, k_features: int, rf_activation: ActivationKind,
                        delta_f: float, lam: float, seed: int,
                        n_test: int = DEFAULT_N_TEST,
                        feature_matrix: np.ndarray | None = None) -> ErmResult:
    """Exact minimizer of sum (y - w.phi(x)/1)^2 + (lambda/2)||w||^2 with
    phi(x) = sigma(F x / sqrt(d)) / sqrt(k).

    ``feature_matrix`` overrides the Gaussian draw of F (test hook for the
    identity-features degenerate case)."""
    t0 = time.perf_counter()
    if k_features < 1:
        raise DomainError("need at least one random feature")
    d = data.d
    if feature_matrix is not None:
        F = np.asarray(feature_matrix, dtype=float)
        if F.shape != (k_features, d):
            raise ModelError(f"feature matrix must be {(k_features, d)}")
    else:
        F = stream(seed, "rf.features").normal(0.0, math.sqrt(delta_f), size=(k_features, d))

    def features(X):
        return act.evaluate(rf_activation, X @ F.T / math.sqrt(d)) / math.sqrt(k_features)

    Phi = features(data.X)
    A = 2.0 * (Phi.T @ Phi) + lam * np.eye(k_features)
    w = sla.cho_solve(sla.cho_factor(A, check_finite=False), 2.0 * (Phi.T @ data.y),
                      check_finite=False)
    resid = data.y - Phi @ w
    train_loss = float(resid @ resid + 0.5 * lam * (w @ w))
    Xt, yt = test_batch(data, n_test)
    return _regression_result("rf", lam, train_loss, features(Xt) @ w, yt, t0)


# ---------------------------------------------------------------------------
# logistic
# ---------------------------------------------------------------------------

def fit_logistic(data: Dataset, lam: float, n_test: int = DEFAULT_N_TEST,
                 max_newton: int = 500) -> ErmResult:
    """Damped-Newton minimizer of sum ln(1 + exp(-y w.x/sqrt(d))) +
    (lambda/2)||w||^2 to gradient sup-norm below 1e-9; reports 0/1 test error."""
    t0 = time.perf_counter()
    if not (lam > 0):
        raise DomainError("logistic regression needs lambda > 0")
    if data.task != CLASSIFICATION:
        raise DomainError("logistic regression expects classification labels")
    X, y = data.X, data.y
    d = data.d
    sd = math.sqrt(d)
    w = np.zeros(d)

    def objective(wv):
        z = y * (X @ wv) / sd
        return float(np.logaddexp(0.0, -z).sum() + 0.5 * lam * (wv @ wv))

    obj = objective(w)
    for it in range(max_newton):
        z = y * (X @ w) / sd
        s = 1.0 / (1.0 + np.exp(z))
        grad = -(X.T @ (y * s)) / sd + lam * w
        if np.abs(grad).max() < 1e-9:
            break
        hess_w = s * (1.0 - s)
        H = (X.T * hess_w) @ X / d + lam * np.eye(d)
        step = sla.cho_solve(sla.cho_factor(H, check_finite=False), grad, check_finite=False)
        t = 1.0
        while t > 1e-12:
            cand = w - t * step
            cand_obj = objective(cand)
            if cand_obj <= obj - 1e-4 * t * float(grad @ step):
                w, obj = cand, cand_obj
                break
            t /= 2.0
        else:
            raise NumericalError("logistic Newton line search stalled")
    else:
        raise ConvergenceError(f"logistic Newton did not reach 1e-9 in {max_newton} steps")
    Xt, yt = test_batch(data, n_test)
    wrong = np.sign(Xt @ w / sd) != yt
    p = float(wrong.mean())
    return ErmResult(method="logistic", lam=lam, train_loss=obj, test_error=p,
                     test_std_error=math.sqrt(max(p * (1 - p), 1e-12) / n_test),
                     n_test=n_test, wallclock=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# quadratic regime
# ---------------------------------------------------------------------------

def linear_fit_residual(spec: NetworkSpec, weights: WeightSet) -> float:
    """Exact population MSE of the best linear (no intercept) predictor of a
    depth-1 target with isotropic inputs: E[y^2] - ||E[x y]||^2."""
    if spec.depth != 1:
        raise ModelError("linear residual oracle implemented for depth-1 targets")
    kind = spec.activations[0]
    W, a = weights.layers[0], weights.readout
    d = weights.dim
    k = W.shape[0]
    r = (W * W).sum(axis=1) / d
    covs = (W @ W.T) / d
    second = bivariate_moment(kind, r[:, None], r[None, :], covs)
    ey2 = float(a @ second @ a) / k + spec.noise_var
    m1 = np.array([act.gaussian_moment(kind, ri, act.TIMES_Z) / ri for ri in r])
    beta = (W / math.sqrt(d)).T @ (a * m1) / math.sqrt(k)
    return ey2 - float(beta @ beta)


def quadratic_regime_sweep(spec: NetworkSpec, d: int, n_over_d2_grid, methods,
                           seeds, kernel: KernelSpec = ARC_COSINE1,
                           n_test: int = DEFAULT_N_TEST, n_val: int = 2000,
                           d_cap: int = QUADRATIC_D_CAP) -> list[ErmResult]:
    """Ridge and kernel regression at n = c d^2 samples.

    Regularizations start from the closed-form proportional-regime optima
    (mapped to the simulator conventions) and are refined on a held-out
    validation split; the reported errors use fresh test data.  Kernel
    regression plateaus at the quadratic-approximation error, ridge at the
    linear one.
    """
    if d > d_cap:
        raise ResourceCapError(f"quadratic-regime sweep capped at d <= {d_cap}")
    methods = tuple(methods)
    for m in methods:
        if m not in ("ridge", "kernel"):
            raise DomainError(f"quadratic sweep supports ridge/kernel, got {m!r}")
    profile = propagate(spec)
    lam_ridge0 = 2.0 * theory.optimal_lambda_ridge(profile)
    if kernel.name == "nngp":
        k_act, k_df = kernel.activation, kernel.delta_f
    else:
        k_act, k_df = (act.SHIFTED_RELU, kernel.delta_f) if kernel.name == "arccos1" \
            else (act.erf_scale(1.0), kernel.delta_f)
    lam_kernel0 = theory.optimal_lambda_kernel(profile, k_df, k_act)
    results = []
    for seed in seeds:
        weights = sample_target(spec, d, seed)
        for c in n_over_d2_grid:
            n = max(4, int(round(c * d * d)))
            data = generate(spec, weights, n, REGRESSION, seed + 7919)
            val = replace(data, generator_seed=data.generator_seed + 104729)
            if "ridge" in methods:
                best = _refine_lambda(
                    lambda l: fit_ridge(data, l, n_test=n_val),
                    lambda l: fit_ridge(val, l, n_test=n_test),
                    _lambda_grid(lam_ridge0, positive=True))
                results.append(replace(best, method=f"ridge@c={c:g}"))
            if "kernel" in methods:
                best = _refine_lambda(
                    lambda l: fit_kernel(data, kernel, l, n_test=n_val),
                    lambda l: fit_kernel(val, kernel, l, n_test=n_test),
                    _lambda_grid(lam_kernel0, positive=False))
                results.append(replace(best, method=f"kernel@c={c:g}"))
    return results


def _lambda_grid(center: float, positive: bool):
    base = abs(center) if abs(center) > 1e-6 else 1e-3
    grid = [center + s * base for s in (-0.75, -0.5, 0.0, 0.5, 1.0, 3.0)]
    grid += [base * s for s in (0.1, 1.0, 10.0)]
    if positive:
        grid = [g for g in grid if g > 0]
    return sorted(set(round(g, 12) for g in grid))


def _refine_lambda(fit_val, fit_test, grid):
    best_lam, best_err = None, math.inf
    for lam in grid:
        try:
            res = fit_val(lam)
        except (DomainError, ResourceCapError):
            continue
        if res.test_error < best_err:
            best_lam, best_err = lam, res.test_error
    if best_lam is None:
        raise DomainError("no admissible lambda in the refinement grid")
    return fit_test(best_lam)
