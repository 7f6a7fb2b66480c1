"""Numerical rate-distortion solvers for finite alphabets.

Blahut-Arimoto at a fixed slope in three flavours (no side information,
side information at both ends, side information at the encoder only through
the super-source (x, q)), a brute-force Wyner-Ziv oracle for tiny alphabets,
and the encoder-only upper bound for the Gaussian example.

Slopes ``s`` are in nats per distortion unit: each run returns the point where
the line of slope ``-s`` supports the curve.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .analytic import GaussQModel, per_q_mse, rd_gauss_both
from .errors import BudgetError, ConvergenceError, ModelError
from .model import (
    DistortionTensor,
    RDCurve,
    SideInfoModel,
    as_prob_vec,
    check_decomposition,
    entropy,
    mutual_information,
)

log = logging.getLogger(__name__)

BA_TOL = 1e-12
BA_MAX_ITER = 100_000


@dataclass(frozen=True)
class BaProblem:
    px: np.ndarray
    d: np.ndarray
    slope: float

    def __post_init__(self):
        px = as_prob_vec(self.px, "px")
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != px.size:
            raise ModelError(f"distortion matrix must be |X| x |Xhat|, got {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ModelError("distortion entries must be finite and non-negative")
        if not (self.slope >= 0 and math.isfinite(self.slope)):
            raise ModelError("slope must be finite and >= 0")
        object.__setattr__(self, "px", px)
        object.__setattr__(self, "d", d)


@dataclass(frozen=True)
class BaResult:
    R: float
    D: float
    output_marginal: np.ndarray
    iterations: int
    converged: bool
    test_channel: np.ndarray = field(repr=False, default=None)
    I_xhat_q: float | None = None
    per_q_marginals: np.ndarray | None = field(repr=False, default=None)
    I_x_xhat_given_q: float | None = None


def _ba_core(px, d, s, tol=BA_TOL, max_iter=BA_MAX_ITER, debug=False, init=None):
    """Alternating minimisation; returns (Q, r, iterations, converged).

    ``init`` is the starting output marginal (uniform by default); it must
    have full support or the missing symbols stay unused.
    """
    nxh = d.shape[1]
    if s == 0.0:
        # every zero-rate channel ties; take the s -> 0+ limit, the best single output
        r = np.zeros(nxh)
        r[int(np.argmin(px @ d))] = 1.0
        return np.tile(r, (px.size, 1)), r, 0, True
    # the per-row shift cancels in the row normalisation
    A = np.exp(-s * (d - d.min(axis=1, keepdims=True)))
    if init is None:
        r = np.full(nxh, 1.0 / nxh)
    else:
        r = np.array(as_prob_vec(init, "initial output marginal"))
        if r.size != nxh:
            raise ModelError(f"initial output marginal needs {nxh} entries")
    prev_f = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = A @ r
        if debug:
            f = -float(px @ np.log(z))
            if f > prev_f + 1e-12 * max(1.0, abs(prev_f)):
                raise AssertionError(f"Blahut functional increased at iteration {it}")
            prev_f = f
        r_new = r * ((px / z) @ A)
        r_new /= r_new.sum()
        change = float(np.max(np.abs(r_new - r)))
        r = r_new
        if change < tol:
            converged = True
            break
    Q = A * r[None, :]
    Q /= Q.sum(axis=1, keepdims=True)
    return Q, r, it, converged


def _rate_distortion(px, Q, d):
    joint = px[:, None] * Q
    return mutual_information(joint), float(np.sum(joint * d))


def _flag(converged, what, iterations):
    if not converged:
        log.warning("%s did not converge after %d iterations", what, iterations)
        warnings.warn(f"{what} did not converge after {iterations} iterations", RuntimeWarning)


def ba_solve(prob: BaProblem, tol=BA_TOL, max_iter=BA_MAX_ITER, debug=False, init=None) -> BaResult:
    """Standard Blahut-Arimoto at slope ``prob.slope``."""
    Q, r, it, ok = _ba_core(prob.px, prob.d, prob.slope, tol, max_iter, debug, init)
    _flag(ok, "Blahut-Arimoto", it)
    R, D = _rate_distortion(prob.px, Q, prob.d)
    return BaResult(max(R, 0.0), D, r, it, ok, Q)


def _check_tensor(px, pq, d):
    px = as_prob_vec(px, "px")
    pq = as_prob_vec(pq, "pq")
    dd = d.d if isinstance(d, DistortionTensor) else DistortionTensor(d).d
    if dd.shape[0] != px.size or dd.shape[2] != pq.size:
        raise ModelError(f"distortion shape {dd.shape} does not match |X|={px.size}, |Q|={pq.size}")
    return px, pq, dd


def ba_solve_conditional(px, pq, d, slope, tol=BA_TOL, max_iter=BA_MAX_ITER, debug=False,
                         init=None) -> BaResult:
    """Side information at both ends: one BA run per q at a common slope."""
    px, pq, dd = _check_tensor(px, pq, d)
    R = D = 0.0
    per_q = np.zeros((pq.size, dd.shape[1]))
    channels = np.zeros((px.size, pq.size, dd.shape[1]))
    iters, ok = 0, True
    for j in range(pq.size):
        Q, r, it, conv = _ba_core(px, dd[:, :, j], slope, tol, max_iter, debug, init)
        Rj, Dj = _rate_distortion(px, Q, dd[:, :, j])
        R += pq[j] * Rj
        D += pq[j] * Dj
        per_q[j] = r
        channels[:, j, :] = Q
        iters = max(iters, it)
        ok = ok and conv
    _flag(ok, "conditional Blahut-Arimoto", iters)
    return BaResult(max(R, 0.0), D, pq @ per_q, iters, ok, channels,
                    per_q_marginals=per_q, I_x_xhat_given_q=max(R, 0.0))


def ba_solve_enc(px, pq, d, slope, tol=BA_TOL, max_iter=BA_MAX_ITER, debug=False,
                 init=None) -> BaResult:
    """Side information at the encoder only: BA on the super-source (x, q).

    ``R = I(x, q; xhat)``; the result also carries ``I(xhat; q)`` and
    ``I(x; xhat | q)``, whose sum reproduces ``R``.
    """
    px, pq, dd = _check_tensor(px, pq, d)
    nx, nxh, nq = dd.shape
    p_super = np.outer(px, pq).ravel()          # index x * nq + q
    d_super = np.transpose(dd, (0, 2, 1)).reshape(nx * nq, nxh)
    Q, r, it, ok = _ba_core(p_super, d_super, slope, tol, max_iter, debug, init)
    _flag(ok, "super-source Blahut-Arimoto", it)
    R, D = _rate_distortion(p_super, Q, d_super)
    joint = (p_super[:, None] * Q).reshape(nx, nq, nxh)
    joint_q_xh = joint.sum(axis=0)
    i_q = mutual_information(joint_q_xh)
    i_cond = 0.0
    for j in range(nq):
        if pq[j] > 0:
            i_cond += pq[j] * mutual_information(joint[:, j, :] / pq[j])
    with np.errstate(invalid="ignore", divide="ignore"):
        per_q = np.where(pq[:, None] > 0, joint_q_xh / pq[:, None], r[None, :])
    return BaResult(max(R, 0.0), D, r, it, ok, Q.reshape(nx, nq, nxh),
                    I_xhat_q=i_q, per_q_marginals=per_q, I_x_xhat_given_q=i_cond)


def codebook_uniformity(result: BaResult) -> float:
    """Largest total-variation distance between the per-q codebook distributions."""
    per_q = result.per_q_marginals
    if per_q is None:
        raise ModelError("result carries no per-q output marginals")
    worst = 0.0
    for a, b in itertools.combinations(range(per_q.shape[0]), 2):
        worst = max(worst, 0.5 * float(np.abs(per_q[a] - per_q[b]).sum()))
    return worst


def solve_model(model: SideInfoModel, d: DistortionTensor, slope, mode):
    """Dispatch BA for a model file. ``mode`` is 'none', 'both' or 'enc'."""
    report = check_decomposition(model, d)
    if mode in ("both", "enc") and not report.q_independent_of_x:
        raise ModelError(
            "q depends on x through w (max deviation "
            f"{report.max_dependence:.3g}); only independent q is supported here"
        )
    if mode == "none":
        # q unknown anywhere: average the distortion over q given x
        pqx = model.joint_xq / model.px[:, None]
        pqx = np.where(np.isfinite(pqx), pqx, 0.0)
        d_avg = np.einsum("xhq,xq->xh", d.d, pqx)
        return ba_solve(BaProblem(model.px, d_avg, slope))
    if mode == "both":
        return ba_solve_conditional(model.px, model.p_q, d, slope)
    if mode == "enc":
        return ba_solve_enc(model.px, model.p_q, d, slope)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# lower convex envelope
# ---------------------------------------------------------------------------

def convex_lower_envelope(points):
    """Lower convex hull of (D, R) points, cut at its minimum rate.

    Equal-D duplicates keep the lowest R. Collinear hull points are kept.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ModelError("points must be an (n, 2) array of (D, R)")
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = pts[1:, 0] != pts[:-1, 0]
    pts = pts[keep]
    if len(pts) < 2:
        raise ModelError("need at least two distinct distortion values")
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            cross = (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1)
            if cross < 0:
                hull.pop()
            else:
                break
        hull.append((float(p[0]), float(p[1])))
    hull = np.array(hull)
    stop = int(np.argmin(hull[:, 1]))
    return hull[: stop + 1]


def envelope_rate(envelope, D):
    """Piecewise-linear rate of an envelope at distortion(s) ``D``.

    Beyond the last point the rate stays flat; below the first it is inf.
    """
    env = np.asarray(envelope, dtype=float)
    D = np.asarray(D, dtype=float)
    R = np.interp(D, env[:, 0], env[:, 1], left=np.inf, right=env[-1, 1])
    R = np.where(D == env[0, 0], env[0, 1], R)
    return R if R.ndim else float(R)


# ---------------------------------------------------------------------------
# Wyner-Ziv brute force
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WzGrid:
    u_size: int = 3
    resolution: int = 33

    def __post_init__(self):
        if self.resolution < 3:
            raise ModelError("grid resolution must be >= 3")
        if self.u_size < 1:
            raise ModelError("auxiliary alphabet must be non-empty")


@dataclass(frozen=True)
class WzResult:
    R: float
    D: float
    candidates: int
    envelope: np.ndarray = field(repr=False)


def simplex_grid(dim, resolution):
    """All probability vectors of length ``dim`` with entries in multiples of 1/(resolution-1)."""
    n = resolution - 1
    rows = [c for c in itertools.product(range(n + 1), repeat=dim - 1) if sum(c) <= n]
    rows = np.array(rows, dtype=float).reshape(len(rows), dim - 1)
    return np.column_stack([rows, n - rows.sum(axis=1)]) / n


WZ_BUDGET = 10**8


def wz_bruteforce(model: SideInfoModel, d: DistortionTensor, D, grid: WzGrid = WzGrid(),
                  chunk=20_000) -> WzResult:
    """Upper bound on the decoder-side-information rate at distortion ``D``.

    Enumerates every gridded test channel p(u|x) and every deterministic
    reconstruction v(u, q). Because the distortion is additive over (u, q)
    cells and the rate does not depend on v, the best map is found cell by
    cell, which visits the same optimum as listing all |Xhat|^(|U||Q|) maps.
    The achievable (D, R) points are time-shared through their lower convex
    envelope.
    """
    nx, nq = model.nx, model.nq
    dd = d.d
    nxh = dd.shape[1]
    if dd.shape[0] != nx or dd.shape[2] != nq:
        raise ModelError("distortion tensor does not match the model")
    if nx * nq > 6:
        raise ModelError(f"|X||Q| = {nx * nq} exceeds the oracle limit of 6")
    nu = grid.u_size
    if nu > nx + 1:
        raise ModelError(f"|U| = {nu} exceeds the cardinality bound |X|+1 = {nx + 1}")
    simplex = simplex_grid(nu, grid.resolution)
    n_chan = simplex.shape[0] ** nx
    candidates = n_chan * nxh ** (nu * nq)
    if candidates > WZ_BUDGET:
        raise BudgetError(f"search needs {candidates:.3g} candidates (budget {WZ_BUDGET:.0e})")

    pxq = model.joint_xq
    pq = pxq.sum(axis=0)
    px = pxq.sum(axis=1)
    h_q = float(entropy(pq))
    Ds, Rs = [], []
    index = np.indices((simplex.shape[0],) * nx).reshape(nx, -1).T
    for start in range(0, n_chan, chunk):
        idx = index[start:start + chunk]
        P = simplex[idx]                                   # (C, x, u)
        joint = pxq[None, :, None, :] * P[:, :, :, None]   # (C, x, u, q)
        h_u_given_x = -np.einsum("x,cxu->c", px, special.xlogy(P, P))
        p_uq = joint.sum(axis=1)
        h_uq = -special.xlogy(p_uq, p_uq).sum(axis=(1, 2))
        rate = (h_uq - h_q) - h_u_given_x
        cost = np.einsum("cxuq,xhq->cuqh", joint, dd)
        dist = cost.min(axis=3).sum(axis=(1, 2))
        Ds.append(dist)
        Rs.append(np.maximum(rate, 0.0))
    Ds = np.concatenate(Ds)
    Rs = np.concatenate(Rs)
    env = convex_lower_envelope(np.column_stack([Ds, Rs]))
    R = envelope_rate(env, D)
    if not np.isfinite(R):
        raise ModelError(f"D={D} is below the smallest distortion reachable on the grid")
    return WzResult(float(R), float(D), int(candidates), env)


# ---------------------------------------------------------------------------
# Gaussian example: encoder-only upper bound
# ---------------------------------------------------------------------------

def _gauss_mixture_info(probs, variances):
    """I(xhat; q) where xhat | q ~ N(0, variances[q]); zero variance is a point mass at 0."""
    probs = np.asarray(probs, dtype=float)
    variances = np.asarray(variances, dtype=float)
    live = probs > 0
    probs, variances = probs[live], variances[live]
    h_q = float(entropy(probs))
    atom = variances <= 0.0
    p_atom = float(probs[atom].sum())
    # given xhat = 0 exactly, q is one of the point-mass components
    h_atom = float(entropy(probs[atom] / p_atom)) if p_atom > 0 else 0.0
    cont_p = probs[~atom]
    cont_v = variances[~atom]
    if cont_p.size <= 1:
        return h_q - p_atom * h_atom
    sig = np.sqrt(cont_v)
    logw = np.log(cont_p) - 0.5 * np.log(2 * np.pi * cont_v)

    def integrand(y):
        logs = logw - 0.5 * y * y / cont_v
        lse = special.logsumexp(logs)
        post = np.exp(logs - lse)
        return math.exp(lse) * float(entropy(post))

    lim = 8.0 * float(sig.max())
    brk = sorted({float(s) * c for s in sig for c in (1.0, 4.0) if s * c < lim})
    val, err = integrate.quad(integrand, 0.0, lim, points=brk or None, limit=500,
                              epsabs=1e-12, epsrel=1e-10)
    if not np.isfinite(val) or err > 1e-6:
        raise ConvergenceError(f"mixture entropy quadrature error {err:.3g}")
    return max(h_q - p_atom * h_atom - 2.0 * val, 0.0)


def default_slopes(model: GaussQModel, count=200):
    """Log-spaced slopes covering water levels from 1e-4 min(q) to max(q)."""
    theta = np.logspace(math.log10(1e-4 * model.q_min), math.log10(model.values.max()), count)
    return np.sort(1.0 / (2.0 * theta))


@dataclass(frozen=True)
class EncPoint:
    slope: float
    D: float
    R_both: float
    I_xhat_q: float


def gauss_enc_points(model: GaussQModel, slopes=None):
    """Raw (un-enveloped) points R_both + I(xhat; q) along the slope sweep."""
    slopes = default_slopes(model) if slopes is None else np.asarray(slopes, dtype=float)
    out = []
    for s in slopes:
        if not s > 0:
            raise ModelError("slopes must be positive")
        theta = 1.0 / (2.0 * s)
        mse = per_q_mse(model, theta)
        D = float(model.probs @ (model.values * mse))
        both = rd_gauss_both(model, D)
        # backward channel x = xhat + z: xhat | q has variance 1 - mse
        info = _gauss_mixture_info(model.probs, 1.0 - mse)
        out.append(EncPoint(float(s), D, both.R, info))
    return out


def gauss_enc_upper_curve(model: GaussQModel, slopes=None, include_blind=True,
                          eval_D=None) -> RDCurve:
    """Upper bound on the encoder-only rate using the both-ends codebook law.

    Each slope gives the water-pouring test channel; its rate with q unknown
    at the decoder is R_both + I(xhat; q). The zero-rate point (E[q], 0) is
    added and the lower convex envelope taken.

    With ``include_blind`` the q-blind Gaussian test channels (rate
    1/2 ln(E[q]/D)) join the candidate set before enveloping. They are always
    available to an encoder that may ignore q, and they matter where one q
    component is reconstructed as a point mass: there I(xhat; q) = H(q).
    The blind curve is sampled densely and at every distortion in ``eval_D``
    so that chords of the envelope do not cut above it.
    """
    enc = gauss_enc_points(model, slopes)
    pts = [(p.D, p.R_both + p.I_xhat_q) for p in enc]
    pts.append((model.mean_q, 0.0))
    if include_blind:
        lo = min(p.D for p in enc)
        blind_D = np.geomspace(lo, model.mean_q, 10_000)
        if eval_D is not None:
            blind_D = np.concatenate([blind_D, np.asarray(eval_D, dtype=float)])
        blind_D = blind_D[(blind_D > 0) & (blind_D <= model.mean_q)]
        pts.extend(zip(blind_D, 0.5 * np.log(model.mean_q / blind_D)))
    env = convex_lower_envelope(pts)
    return RDCurve(env[:, 0], env[:, 1], "nats").validate()
