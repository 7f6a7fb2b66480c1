"""Closed-form rate-distortion curves, penalty formulas and gap bounds.

Covers the binary Hamming family with distortion ``alpha_q + beta_q * [x != xhat]``,
Gaussian sources with scaled quadratic distortion ``q (x - xhat)^2`` (reverse
water-filling), the high-resolution rate gap ``(k/r) (ln E[q] - E[ln q])``,
Fisher-information and low-resolution bounds on the encoder-only penalty, and
the conditional Shannon lower bound for group Hamming distortions.

Hamming-family functions report bits by default, everything else nats; every
rate-returning function takes a ``units`` keyword.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, InfeasibleError, ModelError
from .model import (
    LN2,
    QDistribution,
    as_prob_vec,
    binary_entropy,
    to_units,
)

BISECT_ITERS = 200
D_TOL = 1e-10
# distortions this close (relative) to the zero-rate point snap to rate 0
ZERO_RATE_RTOL = 1e-12


def _bisect_decreasing(f, target, lo=0.0):
    """Find lam >= lo with f(lam) = target for f continuous and decreasing.

    The upper bracket starts at 1 and doubles until f drops below target.
    """
    hi = max(1.0, 2.0 * lo)
    while f(hi) > target:
        hi *= 2.0
        if hi > 1e300:
            raise ConvergenceError("could not bracket the multiplier")
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# binary source, Hamming family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HammingSideModel:
    """d(x, xhat; q) = alphas[q] + betas[q] * [x != xhat], symmetric binary x."""

    alphas: np.ndarray
    betas: np.ndarray
    pq: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        b = np.asarray(self.betas, dtype=float)
        pq = as_prob_vec(self.pq, "pq")
        if not (a.shape == b.shape == pq.shape):
            raise ModelError("alphas, betas and pq must have equal length")
        if np.any(a < 0) or np.any(b < 0):
            raise ModelError("alphas and betas must be non-negative")
        if not np.any(b[pq > 0] > 0):
            raise ModelError("at least one beta with positive probability must be > 0")
        for name, v in (("alphas", a), ("betas", b), ("pq", pq)):
            v = np.array(v)
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def mean_alpha(self):
        return float(self.pq @ self.alphas)

    @property
    def mean_beta(self):
        return float(self.pq @ self.betas)

    @property
    def d_min(self):
        return self.mean_alpha

    @property
    def d_max(self):
        return self.mean_alpha + 0.5 * self.mean_beta


def model_noisy_obs(N) -> HammingSideModel:
    """Binary source seen through a BSC with crossover (q-1)/(2(N-1)), q uniform on 1..N."""
    if N < 2:
        raise ModelError("noisy-observation model needs N >= 2")
    q = np.arange(1, N + 1)
    frac = (q - 1) / (N - 1)
    return HammingSideModel(frac / 2.0, 1.0 - frac, np.full(N, 1.0 / N))


def model_weighted(N, gamma) -> HammingSideModel:
    """Weighted Hamming: alpha = 0, beta_k = exp(gamma k / N), k uniform on 0..N-1."""
    if N < 1:
        raise ModelError("weighted model needs N >= 1")
    k = np.arange(N)
    return HammingSideModel(np.zeros(N), np.exp(gamma * k / N), np.full(N, 1.0 / N))


def rd_hamming_none(model: HammingSideModel, D, units="bits"):
    """Rate without side information at the encoder (also decoder-only)."""
    if D < model.d_min - D_TOL:
        raise InfeasibleError(f"D={D} below minimum distortion {model.d_min}")
    frac = min(max((D - model.d_min) / model.mean_beta, 0.0), 0.5)
    return to_units(max(0.0, LN2 - float(binary_entropy(frac))), units)


def _crossover(lam, betas):
    # 2^{-lam b} / (1 + 2^{-lam b}) computed without overflow
    return special.expit(-lam * betas * LN2)


@dataclass(frozen=True)
class HammingBothResult:
    R: float
    lam: float
    crossovers: np.ndarray
    D: float


def rd_hamming_both(model: HammingSideModel, D, units="bits") -> HammingBothResult:
    """Rate with side information at the encoder (equivalently at both ends).

    Solves for the multiplier ``lam`` (base-2 convention) by bisection and
    returns the per-q crossover probabilities of the optimal test channel.
    """
    lo_d, hi_d = model.d_min, model.d_max
    if D < lo_d - D_TOL or D > hi_d + D_TOL:
        raise InfeasibleError(f"D={D} outside feasible range [{lo_d}, {hi_d}]")
    a, b, p = model.alphas, model.betas, model.pq

    def dist(lam):
        return float(p @ (a + b * _crossover(lam, b)))

    if D >= hi_d:
        lam = 0.0
        cross = np.full(b.shape, 0.5)
    elif D <= lo_d:
        lam = math.inf
        cross = np.where(b > 0, 0.0, 0.5)
    else:
        lam = _bisect_decreasing(dist, D)
        cross = _crossover(lam, b)
    cross.setflags(write=False)
    R = max(0.0, LN2 - float(p @ binary_entropy(cross)))
    achieved = float(p @ (a + b * cross))
    return HammingBothResult(to_units(R, units), lam, cross, achieved)


# ---------------------------------------------------------------------------
# Gaussian source, scaled quadratic distortion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussQModel:
    """Unit-variance Gaussian source, distortion q (x - xhat)^2, discrete q."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        p = np.array(as_prob_vec(self.probs, "q probabilities"))
        if v.shape != p.shape:
            raise ModelError("q values and probabilities differ in length")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ModelError("q values must be positive and finite")
        v.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_q(cls, q: QDistribution):
        v, p = q.atoms()
        return cls(v, p)

    @property
    def mean_q(self):
        return float(self.probs @ self.values)

    @property
    def mean_log_q(self):
        return float(self.probs @ np.log(self.values))

    @property
    def q_min(self):
        return float(self.values[self.probs > 0].min())


def two_point_example():
    """Pr[q=1] = 0.6, Pr[q=10] = 0.4."""
    return GaussQModel([1.0, 10.0], [0.6, 0.4])


def rd_gauss_none(model: GaussQModel, D, units="nats"):
    if not D > 0:
        raise InfeasibleError("D must be positive")
    if D >= model.mean_q * (1.0 - ZERO_RATE_RTOL):
        return 0.0
    return to_units(0.5 * math.log(model.mean_q / D), units)


@dataclass(frozen=True)
class GaussBothResult:
    R: float
    per_q_mse: np.ndarray
    D_star: float
    water_level: float


def water_level(model: GaussQModel, D):
    """theta with sum_j p_j min(q_j, theta) = D (exact piecewise-linear inverse)."""
    order = np.argsort(model.values)
    q = model.values[order]
    p = model.probs[order]
    if D >= model.mean_q * (1.0 - ZERO_RATE_RTOL):
        return float(q[-1])
    # breakpoints theta = q_i, D_i = sum_j p_j min(q_j, q_i)
    prev_theta, prev_D = 0.0, 0.0
    for i in range(q.size):
        Di = float(p @ np.minimum(q, q[i]))
        if D <= Di:
            slope = float(p[i:].sum())
            return prev_theta + (D - prev_D) / slope
        prev_theta, prev_D = float(q[i]), Di
    return float(q[-1])


def per_q_mse(model: GaussQModel, theta):
    """Water-pouring MSE per q value, clamped at the source variance 1."""
    return np.minimum(1.0, theta / model.values)


def rd_gauss_both(model: GaussQModel, D, units="nats") -> GaussBothResult:
    """Rate with q at encoder and decoder via reverse water-filling.

    Each q component gets MSE ``min(1, theta / q)`` so that ``q * mse`` is
    equalised across active components; ``D_star`` is the distortion below which
    every component is active.
    """
    if not D > 0:
        raise InfeasibleError("D must be positive")
    theta = water_level(model, D)
    d = per_q_mse(model, theta)
    R = float(model.probs @ (-0.5 * np.log(d)))
    d.setflags(write=False)
    return GaussBothResult(to_units(max(R, 0.0), units), d, model.q_min, theta)


def gauss_asymptotic_gap(model: GaussQModel, units="nats"):
    """1/2 ln E[q] - 1/2 E[ln q], the constant gap below D_star."""
    return to_units(0.5 * (math.log(model.mean_q) - model.mean_log_q), units)


# ---------------------------------------------------------------------------
# high-resolution rate gap
# ---------------------------------------------------------------------------

def _closed_form_log_gap(q: QDistribution):
    """ln E[q] - E[ln q] in closed form."""
    f, p = q.family, q.params
    if f == "constant":
        return 0.0
    if f == "exponential":
        return float(np.euler_gamma)
    if f == "uniform01":
        return 1.0 - math.log(2.0)
    if f == "lognormal":
        return p[1] / 2.0
    if f == "pareto":
        a = p[0]
        return math.log(a / (a - 1.0)) - 1.0 / a
    if f == "gamma":
        a = p[0]
        return math.log(a) - float(special.digamma(a))
    if f == "pathological":
        e = p[0]
        return math.log(1.0 + e - e * e) - (1.0 - 2.0 * e) * math.log(e)
    if f == "positive-cauchy":
        return math.inf
    v, pr = q.atoms()
    return math.log(float(pr @ v)) - float(pr @ np.log(v))


def _log_domain_moments(q: QDistribution, epsrel=1e-10):
    """(E[q], E[ln q]) by adaptive Gauss-Kronrod quadrature over u = ln q.

    Returns E[q] = inf when the truncated mean keeps growing with the
    truncation point.
    """
    dist = q.scipy_dist()
    lo, hi = dist.support()
    ulo = math.log(lo) if lo > 0 else -math.inf
    uhi = math.log(hi) if math.isfinite(hi) else math.inf

    def density_u(u):
        if abs(u) > 700.0:
            return 0.0
        x = math.exp(u)
        return float(dist.pdf(x)) * x

    def quad(fun, a, b):
        val, err = integrate.quad(fun, a, b, epsabs=1e-13, epsrel=epsrel, limit=500)
        return val

    # mean of ln q is finite for every supported family
    mean_log = quad(lambda u: u * density_u(u), ulo, uhi)
    if math.isfinite(uhi):
        return quad(lambda u: math.exp(u) * density_u(u), ulo, uhi), mean_log
    # equal-width pieces of the upper tail in u: a convergent tail decays
    # geometrically across pieces, a divergent one (E[q] = inf) does not
    start = math.log(max(float(dist.median()), 1e-300))
    cuts = [start + 10.0 * i for i in range(5)]
    tail = [quad(lambda u: math.exp(u) * density_u(u), a, b) for a, b in zip(cuts[:-1], cuts[1:])]
    if tail[-1] > 0 and tail[-1] >= 0.9 * tail[-2] and tail[-2] >= 0.9 * tail[-3]:
        return math.inf, mean_log
    body = quad(lambda u: math.exp(u) * density_u(u), ulo, cuts[0])
    rest = quad(lambda u: math.exp(u) * density_u(u), cuts[-1], 700.0)
    return body + sum(tail) + rest, mean_log


def _quadrature_log_gap(q: QDistribution):
    if q.is_atomic:
        v, pr = q.atoms()
        return math.log(float(pr @ v)) - float(pr @ np.log(v))
    with warnings.catch_warnings(), np.errstate(over="ignore"):
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        mean, mean_log = _log_domain_moments(q)
    if not math.isfinite(mean):
        return math.inf
    return math.log(mean) - mean_log


def rate_gap_hr(q: QDistribution, k=1, r=2, method="auto", units="nats"):
    """High-resolution penalty for not knowing q at the decoder.

    ``(k / r) * (ln E[q] - E[ln q])``; with the defaults this is the squared
    error case. ``method`` selects ``"closed"``, ``"quadrature"`` or ``"auto"``
    (closed form, which exists for every supported family). Returns ``inf`` when
    E[q] diverges.
    """
    if k < 1 or not r > 0:
        raise ModelError("need k >= 1 and r > 0")
    if method in ("auto", "closed"):
        gap = _closed_form_log_gap(q)
    elif method == "quadrature":
        gap = _quadrature_log_gap(q)
    else:
        raise ValueError(f"unknown method {method!r}")
    return to_units((k / r) * max(gap, 0.0), units)


# ---------------------------------------------------------------------------
# finite-resolution bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FisherSpec:
    J: float
    q_min: float

    def __post_init__(self):
        if not self.J > 0:
            raise ModelError("Fisher information must be positive")
        if not self.q_min > 0:
            raise ModelError("q_min must be positive")


def fisher_bound(spec: FisherSpec, D, units="nats"):
    """Upper bound (J/2) min(1, D/q_min) on the encoder-only rate penalty."""
    if D < 0:
        raise InfeasibleError("D must be non-negative")
    return to_units(0.5 * spec.J * min(1.0, D / spec.q_min), units)


def fisher_information_numeric(pdf, dpdf, lo=-math.inf, hi=math.inf, rtol=1e-8):
    """J = integral of p'(x)^2 / p(x) by adaptive quadrature."""

    def integrand(x):
        p = pdf(x)
        if p <= 0.0:
            return 0.0
        return dpdf(x) ** 2 / p

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=rtol, limit=1000)
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(f"Fisher information quadrature failed: {exc}") from exc
    if err > rtol * abs(val) * 10:
        raise ConvergenceError(f"Fisher information quadrature reached only {err / abs(val):.2e}")
    return val


def relative_entropy_to_gaussian(pdf, lo=-math.inf, hi=math.inf):
    """D(p || N(mean_p, var_p)) in nats by quadrature."""

    def q(fun):
        return integrate.quad(fun, lo, hi, epsabs=1e-13, epsrel=1e-10, limit=500)[0]

    mean = q(lambda x: x * pdf(x))
    var = q(lambda x: (x - mean) ** 2 * pdf(x))

    def integrand(x):
        p = pdf(x)
        if p <= 0.0:
            return 0.0
        return -p * math.log(p)

    h = q(integrand)
    return 0.5 * math.log(2 * math.pi * math.e * var) - h


@dataclass(frozen=True)
class LowResSpec:
    kl: float
    sig2_min: float
    sig2_max: float

    def __post_init__(self):
        if not 0 < self.sig2_min <= self.sig2_max:
            raise ModelError("need 0 < sig2_min <= sig2_max")
        if self.kl < 0:
            raise ModelError("relative entropy must be non-negative")


def lowres_bound(spec: LowResSpec, units="nats"):
    """kl + 1/2 ln(1 + sig2_max / sig2_min)."""
    return to_units(spec.kl + 0.5 * math.log1p(spec.sig2_max / spec.sig2_min), units)


# ---------------------------------------------------------------------------
# conditional Shannon lower bound, group Hamming distortion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlbResult:
    R: float
    mu: float
    z_error_probs: np.ndarray


def slb_group_hamming(m, values, probs, D, units="nats") -> SlbResult:
    """log m - max H(z|q) subject to sum_q p_q q P(z_q != 0) = D.

    ``values`` are the q values weighting ``rho(z; q) = q [z != 0]``. The
    maximiser puts error probability ``(m-1) e^{-mu q} / (1 + (m-1) e^{-mu q})``
    on each q, with ``mu`` found by bisection.
    """
    if m < 2:
        raise ModelError("group order must be >= 2")
    v = np.asarray(values, dtype=float)
    p = as_prob_vec(probs, "q probabilities")
    if v.shape != p.shape or np.any(v <= 0):
        raise ModelError("q values must be positive and match probabilities")
    d_max = float(p @ v) * (m - 1) / m
    if not 0 < D < d_max:
        raise InfeasibleError(f"D={D} outside (0, {d_max})")
    lm1 = math.log(m - 1) if m > 2 else 0.0

    def errs(mu):
        return special.expit(lm1 - mu * v)

    mu = _bisect_decreasing(lambda mu: float(p @ (v * errs(mu))), D)
    z = errs(mu)
    h = float(p @ (binary_entropy(z) + z * lm1))
    z.setflags(write=False)
    return SlbResult(to_units(math.log(m) - h, units), mu, z)
