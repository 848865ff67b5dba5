"""Asymptotic test errors: Bayes baselines, convex-ERM fixed points and
closed-form optimal regularizations.

All solvers share the same skeleton: explicit hat-updates driven by the
current error, non-hat updates that integrate small rational functions
against the input spectrum (or evaluate the Marchenko-Pastur transform for
random features), iterated with damping until the state stabilizes.  The
Bayes systems are two-variable self-consistencies; the ERM systems track the
(V, q, m) block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, erfcx

from . import activations as act
from .activations import ActivationKind
from .errors import ConvergenceError, DomainError
from .gep import GepProfile
from .quadrature import adaptive_gauss
from .solver import DEFAULT_CONFIG, Overlaps, SolverConfig, fixed_point
from .spectrum import (MarchenkoPastur, RationalFn, SpectralMeasure, integrate,
                       mp_stieltjes, mp_weighted_stieltjes)

XI_RANGE = 10.0
XI_TOL = 1e-11
TINY_Q = 1e-14

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class CurvePoint:
    """One solved point of a learning curve."""

    kind: str
    alpha: float
    error: float
    overlaps: Overlaps
    lam: float = math.nan
    params: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def csv_row(self) -> list:
        o = self.overlaps
        return [self.kind, self.alpha, self.lam, self.error,
                o.q, o.m, o.V, o.iterations, o.residual]


CSV_HEADER = ["kind", "alpha", "lambda", "error", "q", "m", "V", "iterations", "residual"]


def _require_isotropic(profile: GepProfile, what: str):
    if abs(profile.mu1 - 1.0) > 1e-12:
        raise DomainError(f"{what} is derived for isotropic inputs (unit first moment); "
                          f"profile has int z dmu = {profile.mu1!r}")


def _floor_eg(eg: float, eps_r: float, flags: list) -> float:
    if eg > 0:
        return eg
    floor = eps_r * 1e-12 if eps_r > 0 else 1e-300
    if "eg_floored" not in flags:
        flags.append("eg_floored")
    return floor


def _clip_arccos(arg: float, flags: list) -> float:
    if arg > 1.0:
        if arg > 1.0 + 1e-9 and "arccos_clipped" not in flags:
            flags.append("arccos_clipped")
        arg = 1.0
    return max(arg, 0.0)


# ---------------------------------------------------------------------------
# Bayes-optimal baselines
# ---------------------------------------------------------------------------

def bayes_regression(profile: GepProfile, mu: SpectralMeasure, alpha: float,
                     cfg: SolverConfig | None = None,
                     main_text_q_update: bool = False) -> CurvePoint:
    """Bayes-optimal MSE of the deep target at sample ratio alpha.

    Self-consistent pair: q_hat = alpha K1 / eg with K1 = prod kappa1^2;
    q = int q_hat D^2 z^2 / (1 + q_hat D z) dmu with D = Delta_a prod Delta_l;
    eg = K1 (D int z dmu - q) + eps_r.  ``main_text_q_update`` halves the
    q-update (an alternative printed normalization, kept for comparison; it
    breaks the optimally-regularized-ridge identity and is off by default).
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    cfg = cfg or DEFAULT_CONFIG
    K1 = profile.kappa1_product ** 2
    D = profile.signal_d
    mu1 = mu.moment(1)
    eps_r = profile.eps_r
    flags: list = []

    def qhat_of(q):
        eg = _floor_eg(K1 * (D * mu1 - q) + eps_r, eps_r, flags)
        return alpha * K1 / eg

    def update(x):
        qh = qhat_of(x[0])
        q_new = integrate(mu, RationalFn(num=(0.0, 0.0, qh * D * D), a=1.0, b=qh * D, power=1))
        if main_text_q_update:
            q_new *= 0.5
        return np.array([q_new])

    x0 = np.array([0.01 * D * mu1]) if cfg.init is None else np.array([cfg.init.q])
    (q,), iters, res = fixed_point(update, x0, cfg)
    qh = qhat_of(q)
    eg = _floor_eg(K1 * (D * mu1 - q) + eps_r, eps_r, flags)
    ov = Overlaps(V=D * mu1 - q, q=q, m=q, V_hat=qh, q_hat=qh, m_hat=qh,
                  iterations=iters, residual=res)
    return CurvePoint("bayes_regression", alpha, eg, ov, flags=tuple(flags))


def _posterior_pair_integral(q_eff: float, v_eff: float) -> float:
    """int Dxi sum_y (d_omega Z)^2 / Z at omega = sqrt(q_eff) xi, V = v_eff,
    for the probit channel Z = (1/2) erfc(-y omega / sqrt(2 V)).

    Written with the scaled complementary error function so the denominator
    never underflows for large positive margins.
    """
    sq = math.sqrt(max(q_eff, 0.0))
    s2v = math.sqrt(2.0 * v_eff)

    def integrand(xi):
        omega = sq * xi
        core = np.exp(-omega * omega / (2.0 * v_eff)) / (math.pi * v_eff)
        total = np.zeros_like(xi)
        for y in (1.0, -1.0):
            total += core / erfcx(-y * omega / s2v)
        return total * np.exp(-xi * xi / 2.0) * _INV_SQRT_2PI

    return adaptive_gauss(integrand, -XI_RANGE, XI_RANGE, tol=XI_TOL)


def bayes_classification(profile: GepProfile, mu: SpectralMeasure, alpha: float,
                         cfg: SolverConfig | None = None) -> CurvePoint:
    """Bayes-optimal misclassification rate for the sign readout.

    Solved in the collapsed variables q_eff = K1 q: the hat-update is the
    Gaussian integral of (d_omega Z)^2 / Z over the label average, the
    prior update integrates q_hat rho^2 z^2 / (1 + q_hat rho z) over the
    spectrum, and the error is arccos(sqrt(q_eff / rho_tot)) / pi.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    cfg = cfg or DEFAULT_CONFIG
    rho = profile.rho
    mu1 = mu.moment(1)
    rho_tot = rho * mu1 + profile.eps_r
    flags: list = []

    def update(x):
        q_eff = min(max(x[0], 0.0), rho * mu1 * (1.0 - 1e-15))
        v_eff = max(rho_tot - q_eff, TINY_Q)
        qh = alpha * _posterior_pair_integral(q_eff, v_eff)
        q_new = integrate(mu, RationalFn(num=(0.0, 0.0, qh * rho * rho),
                                         a=1.0, b=qh * rho, power=1))
        return np.array([q_new])

    x0 = np.array([0.01 * rho * mu1]) if cfg.init is None else np.array([cfg.init.q])
    (q_eff,), iters, res = fixed_point(update, x0, cfg)
    if q_eff < TINY_Q:
        err = 0.5
    else:
        arg = _clip_arccos(math.sqrt(q_eff / rho_tot), flags)
        err = math.acos(arg) / math.pi
    qh = alpha * _posterior_pair_integral(q_eff, max(rho_tot - q_eff, TINY_Q))
    ov = Overlaps(V=rho * mu1 - q_eff, q=q_eff, m=q_eff, V_hat=qh, q_hat=qh, m_hat=qh,
                  iterations=iters, residual=res)
    return CurvePoint("bayes_classification", alpha, err, ov, flags=tuple(flags))


# ---------------------------------------------------------------------------
# ERM: regression
# ---------------------------------------------------------------------------

def _ridge_prior_block(mu: SpectralMeasure, lam: float, v_hat: float, q_hat: float,
                       m_hat: float, D: float):
    """Shared non-hat updates of every system whose student sees the raw input:
    V = int z/(lam + V^ z); q = int (D m^2 z^3 + q^ z^2)/(lam + V^ z)^2;
    m = D m^ int z^2/(lam + V^ z)."""
    V = integrate(mu, RationalFn(num=(0.0, 1.0), a=lam, b=v_hat, power=1))
    q = integrate(mu, RationalFn(num=(0.0, 0.0, q_hat, D * m_hat ** 2),
                                 a=lam, b=v_hat, power=2))
    m = D * m_hat * integrate(mu, RationalFn(num=(0.0, 0.0, 1.0), a=lam, b=v_hat, power=1))
    return V, q, m


def _check_effective_reg(mu: SpectralMeasure, lam: float, v_hat: float):
    lo, _ = mu.support_interval()
    if lam + v_hat * lo <= 0:
        raise DomainError("effective regularization non-positive: "
                          f"lambda + V_hat z = {lam + v_hat * lo:.3e} at z={lo:g}")


def ridge_regression(profile: GepProfile, mu: SpectralMeasure, alpha: float,
                     lam: float, cfg: SolverConfig | None = None) -> CurvePoint:
    """Asymptotic MSE of ridge regression on the deep target.

    eg = rho int z dmu + q - 2 (prod kappa1) m + eps_r at the fixed point of
    the six-equation system; lambda <= 0 is admitted as long as the effective
    denominator lambda + V_hat z stays positive on the spectrum support.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    cfg = cfg or DEFAULT_CONFIG
    kp = profile.kappa1_product
    D = profile.signal_d
    mu1 = mu.moment(1)
    base = profile.rho * mu1 + profile.eps_r

    def update(x):
        V, q, m = x
        eg = base + q - 2.0 * kp * m
        v_hat = alpha / (1.0 + V)
        q_hat = alpha * eg / (1.0 + V) ** 2
        m_hat = kp * alpha / (1.0 + V)
        _check_effective_reg(mu, lam, v_hat)
        return np.array(_ridge_prior_block(mu, lam, v_hat, q_hat, m_hat, D))

    x0 = _erm_init(profile, mu1, cfg)
    (V, q, m), iters, res = fixed_point(update, x0, cfg)
    eg = base + q - 2.0 * kp * m
    v_hat = alpha / (1.0 + V)
    ov = Overlaps(V=V, q=q, m=m, V_hat=v_hat, q_hat=alpha * eg / (1.0 + V) ** 2,
                  m_hat=kp * alpha / (1.0 + V), iterations=iters, residual=res)
    return CurvePoint("ridge", alpha, eg, ov, lam=lam)


def optimal_lambda_ridge(profile: GepProfile) -> float:
    """Regularization minimizing the ridge MSE: the noise-to-signal ratio
    eps_r / rho of the equivalent shallow target."""
    if not (profile.rho > 0):
        raise DomainError("profile has non-positive effective signal strength")
    return profile.eps_r / profile.rho


def random_features(profile: GepProfile, alpha: float, gamma: float, delta_f: float,
                    rf_activation: ActivationKind, lam: float,
                    cfg: SolverConfig | None = None) -> CurvePoint:
    """Asymptotic MSE of random-features regression (isotropic inputs only).

    The student-feature spectrum is Marchenko-Pastur with aspect ratio gamma
    and variance delta_f; its Stieltjes transform g and derivative g' carry
    all spectrum integrals.  (kappa1, kappa_star) are the feature activation's
    coefficients at input variance delta_f.
    """
    if alpha <= 0 or gamma <= 0 or delta_f <= 0:
        raise DomainError("alpha, gamma and delta_f must be positive")
    _require_isotropic(profile, "random-features asymptotics")
    cfg = cfg or DEFAULT_CONFIG
    kp = profile.kappa1_product
    D = profile.signal_d
    base = profile.rho + profile.eps_r
    k1, ks, _ = act.kappa_coefficients(rf_activation, delta_f * profile.mu1)
    c, e = k1 * k1, ks * ks
    mp = MarchenkoPastur(gamma=gamma, variance=delta_f)

    def update(x):
        V, q, m = x
        eg = base + q - 2.0 * kp * m
        v_hat = (alpha / gamma) / (1.0 + V)
        q_hat = (alpha / gamma) * eg / (1.0 + V) ** 2
        m_hat = math.sqrt(gamma) * kp * (alpha / gamma) / (1.0 + V)
        z0 = -(lam + v_hat * e) / (v_hat * c)
        g, gp = mp_stieltjes(mp, z0)
        B, C, S2 = mp_weighted_stieltjes(mp, z0)
        # stable regrouping of the g/g' expressions: with w = c s + e the
        # feature-spectrum integrals reduce to the companion transforms
        T = D * m_hat ** 2 + q_hat
        V_new = (B + (e / c) * g) / v_hat
        q_new = (c * c * T * S2 + c * e * (T + q_hat) * C + q_hat * e * e * gp) / (v_hat * c) ** 2
        m_new = math.sqrt(gamma) * D * (m_hat / v_hat) * B
        return np.array([V_new, q_new, m_new])

    x0 = _erm_init(profile, profile.mu1, cfg)
    (V, q, m), iters, res = fixed_point(update, x0, cfg)
    eg = base + q - 2.0 * kp * m
    v_hat = (alpha / gamma) / (1.0 + V)
    ov = Overlaps(V=V, q=q, m=m, V_hat=v_hat,
                  q_hat=(alpha / gamma) * eg / (1.0 + V) ** 2,
                  m_hat=math.sqrt(gamma) * kp * (alpha / gamma) / (1.0 + V),
                  iterations=iters, residual=res)
    return CurvePoint("random_features", alpha, eg, ov, lam=lam,
                      params={"gamma": gamma, "delta_f": delta_f,
                              "activation": rf_activation.label})


def kernel_regression(profile: GepProfile, alpha: float, delta_f: float,
                      kernel_activation: ActivationKind, lam: float,
                      cfg: SolverConfig | None = None) -> CurvePoint:
    """Asymptotic MSE of kernel (infinite-width random-features) regression.

    lambda = 0 is rejected (the kappa_star^2 / lambda term is the implicit
    regularization); negative lambda is admitted while both the denominator
    lambda + V_hat kappa1^2 delta_f and V stay positive.
    """
    if alpha <= 0 or delta_f <= 0:
        raise DomainError("alpha and delta_f must be positive")
    if lam == 0:
        raise DomainError("kernel regression needs lambda != 0")
    _require_isotropic(profile, "kernel asymptotics")
    cfg = cfg or DEFAULT_CONFIG
    kp = profile.kappa1_product
    D = profile.signal_d
    base = profile.rho + profile.eps_r
    k1, ks, _ = act.kappa_coefficients(kernel_activation, delta_f * profile.mu1)
    c, e = k1 * k1, ks * ks
    if lam + e <= 0:
        # the kernel acts as ridge with implicit penalty (lam + kappa_star^2);
        # once that is exhausted the risk stops being convex
        raise DomainError("implicit regularization exhausted: "
                          f"lambda + kappa_star^2 = {lam + e:.3e} <= 0")

    def update(x):
        V, q, m = x
        eg = base + q - 2.0 * kp * m
        one_v = 1.0 + V
        if abs(one_v) < 1e-14 or math.copysign(1.0, one_v) != math.copysign(1.0, lam):
            # at a valid fixed point sign(1 + V) = sign(lambda); off-branch
            # iterates are folded back rather than crossing the singularity
            one_v = math.copysign(max(abs(one_v), 1e-3), lam)
        v_hat = alpha / one_v
        q_hat = alpha * eg / one_v ** 2
        m_hat = alpha * kp / one_v
        den = lam + v_hat * c * delta_f
        if abs(den) < 1e-300:
            raise DomainError("kernel resolvent denominator vanished")
        V_new = e / lam + c * delta_f / den
        q_new = (D * m_hat ** 2 + q_hat) * (c * delta_f) ** 2 / den ** 2
        m_new = D * m_hat * c * delta_f / den
        return np.array([V_new, q_new, m_new])

    x0 = _kernel_init(profile, alpha, lam, c, e, delta_f, cfg)
    (V, q, m), iters, res = fixed_point(update, x0, cfg)
    if math.copysign(1.0, 1.0 + V) != math.copysign(1.0, lam):
        raise DomainError("kernel fixed point landed on an unphysical branch "
                          f"(sign(1+V) != sign(lambda); V={V:.6g})")
    eg = base + q - 2.0 * kp * m
    ov = Overlaps(V=V, q=q, m=m, V_hat=alpha / (1.0 + V),
                  q_hat=alpha * eg / (1.0 + V) ** 2, m_hat=alpha * kp / (1.0 + V),
                  iterations=iters, residual=res)
    return CurvePoint("kernel", alpha, eg, ov, lam=lam,
                      params={"delta_f": delta_f, "activation": kernel_activation.label})


def optimal_lambda_kernel(profile: GepProfile, delta_f: float,
                          kernel_activation: ActivationKind) -> float:
    """kappa1^2 delta_f (eps_r / rho) - kappa_star^2 for the kernel activation
    at input variance delta_f; negative when the kernel's nonlinearity already
    over-regularizes relative to the target's residual noise."""
    if not (profile.rho > 0):
        raise DomainError("profile has non-positive effective signal strength")
    k1, ks, _ = act.kappa_coefficients(kernel_activation, delta_f * profile.mu1)
    return k1 * k1 * delta_f * (profile.eps_r / profile.rho) - ks * ks


# ---------------------------------------------------------------------------
# ERM: classification
# ---------------------------------------------------------------------------

def _logistic_prox(y: float, omega: np.ndarray, V: float):
    """Vectorized minimizer of ln(1 + exp(-y x)) + (x - omega)^2 / (2 V).

    Newton with a bisection safeguard on the monotone optimality condition
    g(x) = x - omega - V y sigmoid(-y x); converges to |g| < 1e-12.  Returns
    (f, df) with f = (x* - omega)/V = y sigmoid(-y x*) and df = d f / d omega.
    """
    omega = np.asarray(omega, dtype=float)
    if V < 1e-14:
        s = _sigmoid(-y * omega)
        lpp = s * (1.0 - s)
        return y * s, -lpp / (1.0 + V * lpp)
    lo = np.minimum(omega, omega + V * y)
    hi = np.maximum(omega, omega + V * y)
    x = 0.5 * (lo + hi)
    for _ in range(200):
        s = _sigmoid(-y * x)
        g = x - omega - V * y * s
        lo = np.where(g < 0, x, lo)
        hi = np.where(g > 0, x, hi)
        if np.all(np.abs(g) < 1e-12):
            break
        step = g / (1.0 + V * s * (1.0 - s))
        x_new = x - step
        bad = (x_new <= lo) | (x_new >= hi)
        x = np.where(bad, 0.5 * (lo + hi), x_new)
    else:
        raise ConvergenceError("logistic proximal Newton failed to reach 1e-12 "
                               f"(y={y}, V={V:.3e})")
    s = _sigmoid(-y * x)
    lpp = s * (1.0 - s)
    return y * s, -lpp / (1.0 + V * lpp)


def _sigmoid(t):
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    ex = np.exp(t[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logistic_prox_value(y: float, omega: float, V: float) -> float:
    """Scalar f(y, omega, V) solving f = y / (1 + exp(y (V f + omega)))."""
    f, _ = _logistic_prox(y, np.asarray([omega]), V)
    return float(f[0])


def _classification_error(kp: float, m: float, q: float, rho_tot: float, flags: list) -> float:
    if q < TINY_Q:
        return 0.5
    arg = _clip_arccos(kp * m / math.sqrt(rho_tot * q), flags)
    return math.acos(max(min(arg, 1.0), -1.0)) / math.pi


def _check_classification_pre(profile: GepProfile, lam: float, what: str):
    if profile.noise_var != 0.0:
        raise DomainError(f"{what} asymptotics assume a noiseless target (Delta = 0)")
    if not (lam > 0):
        raise DomainError(f"{what} needs lambda > 0")


def logistic_regression(profile: GepProfile, mu: SpectralMeasure, alpha: float,
                        lam: float, cfg: SolverConfig | None = None) -> CurvePoint:
    """Asymptotic 0/1 error of L2-regularized logistic regression.

    Hat updates are Gaussian integrals over xi of the probit teacher channel
    Z (and its omega-derivative) against the logistic proximal score f (and
    its omega-derivative); the prior updates are the shared rational-integral
    block; the error is arccos of the normalized teacher-student overlap.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    _check_classification_pre(profile, lam, "logistic regression")
    cfg = cfg or DEFAULT_CONFIG
    kp = profile.kappa1_product
    K1 = kp * kp
    D = profile.signal_d
    mu1 = mu.moment(1)
    rho_tot = profile.rho * mu1 + profile.eps_r
    flags: list = []

    def hat_integrals(V, q, m):
        q = max(q, TINY_Q)
        omega_scale = kp * m / math.sqrt(q)
        v_z = max(rho_tot - K1 * m * m / q, TINY_Q)
        sq = math.sqrt(q)
        s2vz = math.sqrt(2.0 * v_z)

        def integrand(xi):
            gauss = np.exp(-xi * xi / 2.0) * _INV_SQRT_2PI
            rows = np.zeros((3, xi.size))
            for y in (1.0, -1.0):
                omega_z = omega_scale * xi
                Z = 0.5 * (1.0 + erf(y * omega_z / s2vz))
                dZ = y * np.exp(-omega_z ** 2 / (2.0 * v_z)) / math.sqrt(2.0 * math.pi * v_z)
                f, df = _logistic_prox(y, sq * xi, V)
                rows[0] += Z * df
                rows[1] += Z * f * f
                rows[2] += dZ * f
            return gauss * rows

        i_df, i_ff, i_zf = adaptive_gauss(integrand, -XI_RANGE, XI_RANGE, tol=XI_TOL)
        # the kappa1-product on m_hat is the Jacobian between the
        # teacher-feature magnetization m and the physical field covariance
        # kp * m; it is explicit in the square-loss systems and applies here too
        return -alpha * i_df, alpha * i_ff, kp * alpha * i_zf

    def update(x):
        V, q, m = x
        v_hat, q_hat, m_hat = hat_integrals(V, q, m)
        return np.array(_ridge_prior_block(mu, lam, v_hat, q_hat, m_hat, D))

    x0 = _erm_init(profile, mu1, cfg)
    (V, q, m), iters, res = fixed_point(update, x0, cfg)
    v_hat, q_hat, m_hat = hat_integrals(V, q, m)
    err = _classification_error(kp, m, q, rho_tot, flags)
    ov = Overlaps(V=V, q=q, m=m, V_hat=v_hat, q_hat=q_hat, m_hat=m_hat,
                  iterations=iters, residual=res)
    return CurvePoint("logistic", alpha, err, ov, lam=lam, flags=tuple(flags))


def ridge_classification(profile: GepProfile, mu: SpectralMeasure, alpha: float,
                         lam: float, cfg: SolverConfig | None = None) -> CurvePoint:
    """Asymptotic 0/1 error of square-loss classification on sign labels.

    The hat updates carry the sign-label magnetization factor
    sqrt(2 / (pi rho_tot)); the prior block and the arccos error are shared
    with logistic regression.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    _check_classification_pre(profile, lam, "ridge classification")
    cfg = cfg or DEFAULT_CONFIG
    kp = profile.kappa1_product
    D = profile.signal_d
    mu1 = mu.moment(1)
    rho_tot = profile.rho * mu1 + profile.eps_r
    b = math.sqrt(2.0 / (math.pi * rho_tot))
    flags: list = []

    def update(x):
        V, q, m = x
        v_hat = alpha / (1.0 + V)
        q_hat = alpha * (1.0 + q - 2.0 * kp * b * m) / (1.0 + V) ** 2
        m_hat = b * kp * alpha / (1.0 + V)
        _check_effective_reg(mu, lam, v_hat)
        return np.array(_ridge_prior_block(mu, lam, v_hat, q_hat, m_hat, D))

    x0 = _erm_init(profile, mu1, cfg)
    (V, q, m), iters, res = fixed_point(update, x0, cfg)
    err = _classification_error(kp, m, q, rho_tot, flags)
    ov = Overlaps(V=V, q=q, m=m, V_hat=alpha / (1.0 + V),
                  q_hat=alpha * (1.0 + q - 2.0 * kp * b * m) / (1.0 + V) ** 2,
                  m_hat=b * kp * alpha / (1.0 + V), iterations=iters, residual=res)
    return CurvePoint("ridge_classification", alpha, err, ov, lam=lam, flags=tuple(flags))


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _erm_init(profile: GepProfile, mu1: float, cfg: SolverConfig) -> np.ndarray:
    if cfg.init is not None:
        return np.array([cfg.init.V, cfg.init.q, cfg.init.m])
    q0 = 0.01 * profile.rho * mu1
    return np.array([1.0, q0, q0])


def _kernel_init(profile: GepProfile, alpha: float, lam: float, c: float, e: float,
                 delta_f: float, cfg: SolverConfig) -> np.ndarray:
    """Start on the branch with sign(1 + V) = sign(lambda); for negative
    lambda the prior-error guess for V_hat = lam alpha rho / (eg c delta_f)
    puts the iterate in the attracting basin."""
    if cfg.init is not None:
        return np.array([cfg.init.V, cfg.init.q, cfg.init.m])
    q0 = 0.01 * profile.rho * profile.mu1
    if lam > 0:
        return np.array([1.0, q0, q0])
    eg0 = profile.rho * profile.mu1 + profile.eps_r
    v_hat0 = lam * alpha * profile.rho / (eg0 * c * delta_f)
    return np.array([alpha / v_hat0 - 1.0, q0, q0])


def optimize_lambda(point_fn, lo: float, hi: float, tol: float = 1e-4):
    """Golden-section minimization of error over lambda for solvers without a
    closed-form optimum (random features, logistic, ridge classification).

    ``point_fn(lam, cfg)`` must return a CurvePoint; every solve warm-starts
    from the previous fixed point, which keeps sweeps cheap.  Returns
    (lambda_opt, CurvePoint at the optimum).
    """
    state: dict = {}

    def err(lam):
        cfg = state.get("cfg", DEFAULT_CONFIG)
        pt = point_fn(lam, cfg)
        # the fixed point does not depend on the damping path, so continuation
        # solves can run lightly damped from the neighbouring solution
        state["cfg"] = SolverConfig(damping=0.85, tol=cfg.tol,
                                    max_iter=cfg.max_iter, init=pt.overlaps)
        state[lam] = pt
        return pt.error

    lam_opt, _ = golden_section(err, lo, hi, tol=tol)
    return lam_opt, state[lam_opt]


def golden_section(fn, lo: float, hi: float, tol: float = 1e-8, max_iter: int = 200):
    """Minimize a unimodal scalar function on [lo, hi]; returns (x, fn(x))."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)
