"""Shared domain types, model validation and probability utilities.

Rates are carried internally in nats. Conversion to bits happens at the
output boundary through :func:`to_units`.

Index conventions used throughout the package:

* ``p_w_given_x[x, w]`` -- row index is the source symbol, column is ``w``.
* ``p_q_given_w[w, q]`` -- row index is ``w``, column is ``q``.
* ``d[x, xhat, q]``     -- distortion tensor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special, stats

from .errors import ModelError

PROB_TOL = 1e-12
DERIVED_TOL = 1e-9
SCALED_FORM_RTOL = 1e-12
LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# probability helpers
# ---------------------------------------------------------------------------

def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def as_prob_vec(weights, name="probability vector", tol=PROB_TOL):
    """Validate ``weights`` as a probability vector and return a read-only array."""
    p = np.asarray(weights, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ModelError(f"{name} must be a non-empty 1-D array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ModelError(f"{name} has non-finite entries")
    if np.any(p < 0):
        raise ModelError(f"{name} has negative entries (min {p.min():.3g})")
    residual = abs(p.sum() - 1.0)
    if residual > tol:
        raise ModelError(f"{name} sums to {p.sum():.15g} (residual {residual:.3g})")
    return _frozen(p)


def as_stochastic(table, name="stochastic table", tol=PROB_TOL):
    """Validate a row-stochastic matrix. Errors name the offending row."""
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.size == 0:
        raise ModelError(f"{name} must be a non-empty 2-D array, got shape {t.shape}")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        bad = int(np.argwhere(~np.isfinite(t) | (t < 0))[0, 0])
        raise ModelError(f"{name} row {bad} has negative or non-finite entries")
    residuals = np.abs(t.sum(axis=1) - 1.0)
    if np.any(residuals > tol):
        row = int(np.argmax(residuals))
        raise ModelError(
            f"{name} row {row} is not stochastic (residual {residuals[row]:.3g})"
        )
    return _frozen(t)


def entropy(p, axis=None):
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    return -np.sum(special.xlogy(p, p), axis=axis)


def binary_entropy(p):
    """Binary entropy in nats. Vectorised."""
    p = np.asarray(p, dtype=float)
    return -(special.xlogy(p, p) + special.xlogy(1.0 - p, 1.0 - p))


def binary_entropy_bits(p):
    return binary_entropy(p) / LN2


def mutual_information(joint):
    """I(A;B) in nats for a 2-D joint table."""
    joint = np.asarray(joint, dtype=float)
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, joint / (pa * pb), 1.0)
    return float(np.sum(special.xlogy(joint, ratio)))


def to_units(nats, units):
    """Convert a rate from nats to ``units`` ('nats' or 'bits')."""
    if units == "nats":
        return nats
    if units == "bits":
        return nats / LN2
    raise ValueError(f"unknown units {units!r}")


def from_units(value, units):
    if units == "nats":
        return value
    if units == "bits":
        return value * LN2
    raise ValueError(f"unknown units {units!r}")


# ---------------------------------------------------------------------------
# joint model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SideInfoModel:
    """Finite joint law p(x) p(w|x) p(q|w).

    Build through :func:`build_model`, which validates dimensions and rows.
    """

    px: np.ndarray
    p_w_given_x: np.ndarray
    p_q_given_w: np.ndarray

    @property
    def nx(self):
        return self.px.size

    @property
    def nw(self):
        return self.p_w_given_x.shape[1]

    @property
    def nq(self):
        return self.p_q_given_w.shape[1]

    @property
    def joint_xqw(self):
        """p(x, q, w) as an array indexed [x, q, w]."""
        return np.einsum("x,xw,wq->xqw", self.px, self.p_w_given_x, self.p_q_given_w)

    @property
    def joint_xq(self):
        return self.joint_xqw.sum(axis=2)

    @property
    def p_w(self):
        return self.px @ self.p_w_given_x

    @property
    def p_q(self):
        return self.p_w @ self.p_q_given_w


def build_model(px, p_w_given_x, p_q_given_w) -> SideInfoModel:
    px = as_prob_vec(px, "px")
    pwx = as_stochastic(p_w_given_x, "p_w_given_x")
    pqw = as_stochastic(p_q_given_w, "p_q_given_w")
    if pwx.shape[0] != px.size:
        raise ModelError(
            f"p_w_given_x has {pwx.shape[0]} rows but |X| = {px.size}"
        )
    if pqw.shape[0] != pwx.shape[1]:
        raise ModelError(
            f"p_q_given_w has {pqw.shape[0]} rows but |W| = {pwx.shape[1]}"
        )
    return SideInfoModel(px, pwx, pqw)


def independent_model(px, pq) -> SideInfoModel:
    """Model with degenerate ``w`` so that q is independent of x."""
    px = as_prob_vec(px, "px")
    pq = as_prob_vec(pq, "pq")
    return build_model(px, np.ones((px.size, 1)), pq[None, :])


# ---------------------------------------------------------------------------
# distortion tensor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistortionTensor:
    """Dense non-negative table ``d[x, xhat, q]``."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 3:
            raise ModelError(f"distortion tensor must be 3-D [x][xhat][q], got {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ModelError("distortion entries must be finite and non-negative")
        object.__setattr__(self, "d", _frozen(d))

    @property
    def shape(self):
        return self.d.shape

    @classmethod
    def from_difference(cls, m, rho):
        """Group difference distortion on Z_m: ``d[x, xhat, q] = rho[(xhat - x) mod m, q]``."""
        rho = np.asarray(rho, dtype=float)
        if rho.ndim == 1:
            rho = rho[:, None]
        if rho.shape[0] != m:
            raise ModelError(f"rho must have {m} rows, got {rho.shape[0]}")
        x = np.arange(m)
        delta = (x[None, :] - x[:, None]) % m
        return cls(rho[delta, :])

    @classmethod
    def erasure(cls, rho):
        """Distortion of the form ``rho(x, xhat) * q`` with q in {0, 1}."""
        rho = np.asarray(rho, dtype=float)
        return cls(np.stack([np.zeros_like(rho), rho], axis=2))

    @classmethod
    def hamming_side(cls, alphas, betas):
        """Binary Hamming family ``alpha_q + beta_q * [x != xhat]``."""
        alphas = np.asarray(alphas, dtype=float)
        betas = np.asarray(betas, dtype=float)
        ham = 1.0 - np.eye(2)
        return cls(alphas[None, None, :] + betas[None, None, :] * ham[:, :, None])


@dataclass(frozen=True)
class DecompositionReport:
    q_independent_of_x: bool
    erasure_form: bool
    scaled_form: bool
    max_dependence: float = 0.0
    scaled_residual: float = 0.0


def _is_scaled_form(d, rtol=SCALED_FORM_RTOL):
    # rank-1 test on M[q, (x, xhat)]
    mat = np.moveaxis(d, 2, 0).reshape(d.shape[2], -1)
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size < 2 or s[0] == 0.0:
        return True, 0.0
    resid = float(s[1] / s[0])
    return resid <= rtol, resid


def check_decomposition(model: SideInfoModel, d: DistortionTensor) -> DecompositionReport:
    """Structural analysis of a (model, distortion) pair.

    Reports marginal independence of q and x, whether ``d`` has erasure form
    (binary q, one slice identically zero) and whether it factors as
    ``d0(q) * d1(x, xhat)``.
    """
    dd = d.d
    if dd.shape[0] != model.nx or dd.shape[2] != model.nq:
        raise ModelError(
            f"distortion shape {dd.shape} inconsistent with |X|={model.nx}, |Q|={model.nq}"
        )
    joint = model.joint_xq
    dep = float(np.max(np.abs(joint - np.outer(model.px, model.p_q))))
    erasure = dd.shape[2] == 2 and (not dd[:, :, 0].any() or not dd[:, :, 1].any())
    scaled, resid = _is_scaled_form(dd)
    return DecompositionReport(
        q_independent_of_x=dep <= DERIVED_TOL,
        erasure_form=bool(erasure),
        scaled_form=scaled,
        max_dependence=dep,
        scaled_residual=resid,
    )


# ---------------------------------------------------------------------------
# distributions of the distortion side information
# ---------------------------------------------------------------------------

QFAMILIES = (
    "constant",
    "exponential",
    "uniform01",
    "lognormal",
    "pareto",
    "gamma",
    "pathological",
    "positive-cauchy",
    "discrete",
)


@dataclass(frozen=True)
class QDistribution:
    """Distribution of a positive scalar q.

    Parameterisations follow the usual conventions: exponential(tau) has rate
    tau; lognormal(M, Q2) is exp of N(M, Q2); pareto(a, b) has shape a and
    minimum b; gamma(a, b) has shape a and rate b; pathological(eps) puts mass
    1-eps at eps and eps at 1/eps.
    """

    family: str
    params: tuple = ()
    values: tuple = field(default=())
    probs: tuple = field(default=())

    def __post_init__(self):
        f, p = self.family, self.params
        if f not in QFAMILIES:
            raise ModelError(f"unknown q family {f!r}")
        nparams = {"constant": 1, "exponential": 1, "uniform01": 0, "lognormal": 2,
                   "pareto": 2, "gamma": 2, "pathological": 1, "positive-cauchy": 0,
                   "discrete": 0}[f]
        if len(p) != nparams:
            raise ModelError(f"{f} takes {nparams} parameter(s), got {len(p)}")
        if any(not math.isfinite(v) for v in p):
            raise ModelError(f"{f} parameters must be finite")
        if f in ("constant", "exponential") and p[0] <= 0:
            raise ModelError(f"{f} parameter must be positive")
        if f == "lognormal" and p[1] <= 0:
            raise ModelError("lognormal variance Q2 must be positive")
        if f == "pareto" and not (p[0] > 1 and p[1] > 0):
            raise ModelError("pareto requires a > 1 and b > 0")
        if f == "gamma" and not (p[0] > 0 and p[1] > 0):
            raise ModelError("gamma requires a > 0 and b > 0")
        if f == "pathological" and not (0 < p[0] < 0.5):
            raise ModelError("pathological requires 0 < eps < 1/2")
        if f == "discrete":
            probs = as_prob_vec(self.probs, "discrete q probabilities")
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != probs.shape:
                raise ModelError("discrete q: values and probs differ in length")
            if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
                raise ModelError("discrete q values must be positive and finite")
            object.__setattr__(self, "values", tuple(float(v) for v in vals))
            object.__setattr__(self, "probs", tuple(float(v) for v in probs))

    # constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", (float(c),))

    @classmethod
    def exponential(cls, tau=1.0):
        return cls("exponential", (float(tau),))

    @classmethod
    def uniform01(cls):
        return cls("uniform01")

    @classmethod
    def lognormal(cls, M=0.0, Q2=1.0):
        return cls("lognormal", (float(M), float(Q2)))

    @classmethod
    def pareto(cls, a, b):
        return cls("pareto", (float(a), float(b)))

    @classmethod
    def gamma(cls, a, b):
        return cls("gamma", (float(a), float(b)))

    @classmethod
    def pathological(cls, eps):
        return cls("pathological", (float(eps),))

    @classmethod
    def positive_cauchy(cls):
        return cls("positive-cauchy")

    @classmethod
    def discrete(cls, values, probs):
        return cls("discrete", (), tuple(values), tuple(probs))

    # derived -------------------------------------------------------------
    @property
    def is_atomic(self):
        return self.family in ("constant", "pathological", "discrete")

    def atoms(self):
        """(values, probs) for atomic families."""
        if self.family == "constant":
            return np.array([self.params[0]]), np.array([1.0])
        if self.family == "pathological":
            e = self.params[0]
            return np.array([e, 1.0 / e]), np.array([1.0 - e, e])
        if self.family == "discrete":
            return np.array(self.values), np.array(self.probs)
        raise ModelError(f"{self.family} is not atomic")

    def scipy_dist(self):
        """Frozen scipy distribution for the continuous families."""
        f, p = self.family, self.params
        if f == "exponential":
            return stats.expon(scale=1.0 / p[0])
        if f == "uniform01":
            return stats.uniform(0.0, 1.0)
        if f == "lognormal":
            return stats.lognorm(s=math.sqrt(p[1]), scale=math.exp(p[0]))
        if f == "pareto":
            return stats.pareto(p[0], scale=p[1])
        if f == "gamma":
            return stats.gamma(p[0], scale=1.0 / p[1])
        if f == "positive-cauchy":
            return stats.halfcauchy()
        raise ModelError(f"{f} has no continuous density")

    def scaled(self, c):
        """Distribution of c*q."""
        if c <= 0:
            raise ModelError("scale must be positive")
        f, p = self.family, self.params
        if f == "constant":
            return QDistribution.constant(c * p[0])
        if f == "exponential":
            return QDistribution.exponential(p[0] / c)
        if f == "lognormal":
            return QDistribution.lognormal(p[0] + math.log(c), p[1])
        if f == "pareto":
            return QDistribution.pareto(p[0], c * p[1])
        if f == "gamma":
            return QDistribution.gamma(p[0], p[1] / c)
        if f in ("pathological", "discrete"):
            v, pr = self.atoms()
            return QDistribution.discrete(c * v, pr)
        raise ModelError(f"{f} is not closed under scaling in this parameterisation")


def parse_discrete_q(text):
    """Parse ``"1:0.6,10:0.4"`` into a discrete :class:`QDistribution`."""
    values, probs = [], []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            v, p = item.split(":")
            values.append(float(v))
            probs.append(float(p))
        except ValueError as exc:
            raise ModelError(f"bad q entry {item!r}; expected value:prob") from exc
    return QDistribution.discrete(values, probs)


# ---------------------------------------------------------------------------
# rate-distortion curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RDCurve:
    """Points (D, R) sorted by D with a units tag."""

    D: np.ndarray
    R: np.ndarray
    units: str = "nats"

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if D.shape != R.shape or D.ndim != 1:
            raise ModelError("D and R must be 1-D arrays of equal length")
        if self.units not in ("nats", "bits"):
            raise ModelError(f"unknown units {self.units!r}")
        order = np.argsort(D, kind="stable")
        object.__setattr__(self, "D", _frozen(D[order]))
        object.__setattr__(self, "R", _frozen(R[order]))

    def to(self, units):
        if units == self.units:
            return self
        return RDCurve(self.D, to_units(from_units(self.R, self.units), units), units)

    def violations(self, tol=DERIVED_TOL):
        """List of invariant violations (empty when the curve is valid)."""
        out = []
        D, R = self.D, self.R
        scale = max(1.0, float(np.max(np.abs(R))) if R.size else 1.0)
        if np.any(np.diff(R) > tol * scale):
            i = int(np.argmax(np.diff(R)))
            out.append(f"R increases between D={D[i]:.6g} and D={D[i + 1]:.6g}")
        for i in range(1, D.size - 1):
            d0, d1, d2 = D[i - 1], D[i], D[i + 1]
            if d2 == d0:
                continue
            chord = R[i - 1] + (R[i + 1] - R[i - 1]) * (d1 - d0) / (d2 - d0)
            if R[i] > chord + tol * scale:
                out.append(f"not convex at D={d1:.6g} (excess {R[i] - chord:.3g})")
                break
        return out

    def validate(self, tol=DERIVED_TOL):
        problems = self.violations(tol)
        if problems:
            raise ModelError("invalid RD curve: " + "; ".join(problems))
        return self


# ---------------------------------------------------------------------------
# JSON model files
# ---------------------------------------------------------------------------

def load_model_json(source):
    """Read a model file. Returns ``(SideInfoModel, DistortionTensor)``.

    ``source`` is a path or an already-parsed dict.
    """
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        data = source
    missing = {"px", "p_w_given_x", "p_q_given_w", "d"} - set(data)
    if missing:
        raise ModelError(f"model file missing keys: {sorted(missing)}")
    model = build_model(data["px"], data["p_w_given_x"], data["p_q_given_w"])
    d = DistortionTensor(data["d"])
    if d.shape[0] != model.nx or d.shape[2] != model.nq:
        raise ModelError(
            f"d has shape {d.shape}; expected [{model.nx}][*][{model.nq}]"
        )
    return model, d


def dump_model_json(model: SideInfoModel, d: DistortionTensor):
    return json.dumps(
        {
            "px": model.px.tolist(),
            "p_w_given_x": model.p_w_given_x.tolist(),
            "p_q_given_w": model.p_q_given_w.tolist(),
            "d": d.d.tolist(),
        }
    )
