"""Seeded Monte Carlo experiments for the codecs.

Randomness is counter based: trial ``t`` of an experiment reads Philox blocks
``t*B .. t*B + B - 1`` under key ``seed``, where ``B`` is fixed by the
experiment's parameters. A trial's draws are therefore a pure function of
(seed, t) and results do not depend on chunking or scheduling. Estimates are
reduced in ascending trial order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import dft
from .erasure import ErasurePayload, RelevanceMask, encode_relevant, gf_context, reconstruct
from .errors import ModelError, SingularSystemError

CHUNK = 8192


@dataclass(frozen=True)
class McConfig:
    seed: int = 0
    trials: int = 10_000

    def __post_init__(self):
        if self.trials < 1:
            raise ModelError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ModelError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    trials: int
    seed: int

    @classmethod
    def from_samples(cls, samples, seed):
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        sd = float(samples.std(ddof=1)) if n > 1 else 0.0
        return cls(float(samples.mean()), sd / math.sqrt(n), n, seed)

    def within(self, target, nsigma=5.0, floor=0.0):
        return abs(self.mean - target) <= nsigma * self.stderr + floor


def trial_uniforms(seed, trials, width, start=0):
    """Uniforms in (0, 1), shape (trials, width); row t depends only on (seed, start + t)."""
    blocks = -(-width // 4)
    gen = np.random.Philox(key=seed, counter=start * blocks)
    raw = gen.random_raw(trials * blocks * 4).reshape(trials, blocks * 4)[:, :width]
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


def _chunks(trials):
    for start in range(0, trials, CHUNK):
        yield start, min(CHUNK, trials - start)


def exact_k_masks(u, n, k):
    """Masks with exactly k ones from a Fisher-Yates prefix shuffle.

    ``u`` has shape (trials, k); returns a (trials, n) 0/1 array.
    """
    trials = u.shape[0]
    perm = np.tile(np.arange(n), (trials, 1))
    rows = np.arange(trials)
    for i in range(k):
        j = i + np.minimum((u[:, i] * (n - i)).astype(np.int64), n - i - 1)
        a = perm[rows, i].copy()
        perm[rows, i] = perm[rows, j]
        perm[rows, j] = a
    masks = np.zeros((trials, n), dtype=np.int8)
    np.put_along_axis(masks, perm[:, :k], 1, axis=1)
    return masks


def gaussian(u):
    """Standard normal draws by inverse CDF."""
    return special.ndtri(u)


def surprisal_estimate(symbols, seed):
    """Plug-in entropy (bits) with the delta-method standard error.

    The mean of per-sample surprisals -log2 p_hat(symbol) is the plug-in
    entropy, so the usual McEstimate recipe applies.
    """
    symbols = np.asarray(symbols)
    axis = 0 if symbols.ndim > 1 else None
    _, inverse, counts = np.unique(symbols, axis=axis, return_inverse=True, return_counts=True)
    p = counts / counts.sum()
    return McEstimate.from_samples(-np.log2(p[inverse.ravel()]), seed)


# ---------------------------------------------------------------------------
# erasure codec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErasureReport:
    bits_per_relevant_symbol: McEstimate
    relevant_errors: int
    payload_bits: int
    uninformed_bits_per_relevant_symbol: float
    wire_bytes: int
    n: int
    k: int
    m: int


def mc_erasure(n, k, m, cfg: McConfig) -> ErasureReport:
    """Random uniform sources and exactly-k masks through the GF(2^m) codec."""
    ctx = gf_context(m)
    if n > ctx.order:
        raise ModelError(f"n={n} exceeds field order {ctx.order}")
    if not 1 <= k <= n:
        raise ModelError("need 1 <= k <= n")
    errors = 0
    bits = np.empty(cfg.trials)
    payload_bits = None
    wire = None
    for start, count in _chunks(cfg.trials):
        u = trial_uniforms(cfg.seed, count, n + k, start)
        symbols = np.minimum((u[:, :n] * ctx.order).astype(np.int64), ctx.order - 1)
        masks = exact_k_masks(u[:, n:], n, k)
        for t in range(count):
            x = symbols[t].tolist()
            mask = RelevanceMask(tuple(masks[t].tolist()))
            payload = encode_relevant(x, mask, ctx)
            blob = payload.to_bytes()
            xhat = reconstruct(ErasurePayload.from_bytes(blob), ctx)
            errors += sum(1 for i in mask.positions if xhat[i] != x[i])
            bits[start + t] = payload.bit_length / mask.k
            payload_bits = payload.bit_length
            wire = len(blob)
    return ErasureReport(
        McEstimate.from_samples(bits, cfg.seed), errors, payload_bits,
        n * m / k, wire, n, k, m,
    )


# ---------------------------------------------------------------------------
# DFT codec
# ---------------------------------------------------------------------------

KAPPA_BINS = np.array([0, 1, 2, 3, 4, 6, 8, 10, 12, np.inf])


@dataclass(frozen=True)
class DftReport:
    relevant_mse: McEstimate
    coeff_mse: McEstimate
    ratio: McEstimate
    kappa_hist: dict = field(repr=False)
    singular: int
    max_identity_error: float
    max_roundtrip_error: float
    index_entropy_bits: float


def mc_dft(n, k, step, cfg: McConfig) -> DftReport:
    """Unit complex Gaussian sources, random exactly-k masks, quantized coefficients.

    ``relevant_mse`` is the decoder's mean squared error per relevant sample,
    ``coeff_mse`` the quantization error per coefficient; their per-trial ratio
    would be 1 for a unitary system. Trials whose system is numerically
    singular are excluded and counted.
    """
    if not 1 <= k <= n:
        raise ModelError("need 1 <= k <= n")
    quant = dft.CoeffQuantizer(step)
    rel, coef, ratio, kappas = [], [], [], []
    singular = 0
    ident = 0.0
    roundtrip = 0.0
    indices = []
    for start, count in _chunks(cfg.trials):
        u = trial_uniforms(cfg.seed, count, 2 * n + k, start)
        z = gaussian(u[:, : 2 * n])
        # unit variance complex: each part has variance 1/2
        x = (z[:, :n] + 1j * z[:, n:]) / math.sqrt(2.0)
        masks = exact_k_masks(u[:, 2 * n:], n, k)
        for t in range(count):
            mask = RelevanceMask(tuple(masks[t].tolist()))
            sys = dft.InterpSystem.build(mask)
            kappas.append(sys.kappa)
            pos = list(mask.positions)
            try:
                X = dft.interpolate_coeffs(x[t, pos], sys)
            except SingularSystemError:
                singular += 1
                continue
            back = dft.synthesize(X, n)[pos]
            roundtrip = max(roundtrip, float(np.max(np.abs(back - x[t, pos]))))
            X_hat, idx, _ = dft.quantize_coeffs(X, quant)
            indices.append(idx)
            s_err, c_err, r = dft.relevant_error_identity(X, X_hat, sys)
            mapped = dft.mapped_error(X, X_hat, sys)
            if s_err > 0:
                ident = max(ident, abs(s_err - mapped) / s_err)
            rel.append(s_err)
            coef.append(c_err)
            ratio.append(r)
    if not rel:
        raise SingularSystemError("every trial was singular", max(kappas))
    counts, _ = np.histogram(np.log10(kappas), bins=KAPPA_BINS)
    hist = {f"{lo:g}-{hi:g}": int(c) for lo, hi, c in zip(KAPPA_BINS[:-1], KAPPA_BINS[1:], counts)}
    ent = dft.empirical_entropy_bits(np.concatenate(indices).ravel())
    return DftReport(
        McEstimate.from_samples(rel, cfg.seed),
        McEstimate.from_samples(coef, cfg.seed),
        McEstimate.from_samples(ratio, cfg.seed),
        hist, singular, ident, roundtrip, 2.0 * ent,
    )


# ---------------------------------------------------------------------------
# 2-D fixed codebook / variable partition quantizer
# ---------------------------------------------------------------------------

LATTICE_MODES = ("encoder-informed", "decoder-informed", "blind")


@dataclass(frozen=True)
class LatticeReport:
    rate_bits: McEstimate
    relevant_mse: McEstimate
    mode: str


def lattice2d_sim(mode, delta, p_axis, cfg: McConfig, both_relevant=False,
                  irrelevant_index="center") -> LatticeReport:
    """Square-grid quantizer of a 2-D standard Gaussian with one relevant axis.

    Each sample's q is (1, 0) with probability ``p_axis`` and (0, 1) otherwise;
    ``both_relevant`` forces q = (1, 1). The codebook is the grid
    ``delta * Z^2`` in every mode.

    * encoder-informed: the encoder quantizes the relevant coordinate and
      fills the irrelevant index without looking at that coordinate. The
      default ``irrelevant_index="center"`` sends index 0; because the pair
      (i, 0) differs from (0, i), the emitted pair reveals which axis was
      relevant whenever i != 0. ``"copy"`` repeats the relevant index instead,
      so the reconstruction lies on the grid diagonal and the emitted pair has
      the same law for either axis.
    * decoder-informed: only the relevant-axis index is sent.
    * blind: both coordinates are quantized.

    ``rate_bits`` is the plug-in entropy of the emitted index (pair) and
    ``relevant_mse`` the squared error on the relevant axes per sample.
    """
    if mode not in LATTICE_MODES:
        raise ModelError(f"mode must be one of {LATTICE_MODES}")
    if not delta > 0:
        raise ModelError("delta must be positive")
    if not 0.0 <= p_axis <= 1.0:
        raise ModelError("p_axis must lie in [0, 1]")
    if irrelevant_index not in ("copy", "center"):
        raise ModelError("irrelevant_index must be 'copy' or 'center'")
    emitted, errs = [], []
    for start, count in _chunks(cfg.trials):
        u = trial_uniforms(cfg.seed, count, 3, start)
        x = gaussian(u[:, :2])
        if both_relevant:
            w = np.ones((count, 2))
        else:
            horiz = u[:, 2] < p_axis
            w = np.column_stack([horiz, ~horiz]).astype(float)
        cells = np.rint(x / delta).astype(np.int64)
        if mode == "blind" or both_relevant:
            idx = cells
            xhat = delta * idx
            sent = idx
        else:
            rel_axis = np.argmax(w, axis=1)
            rel_cell = cells[np.arange(count), rel_axis]
            if mode == "decoder-informed":
                sent = rel_cell
                xhat = delta * np.column_stack([rel_cell, rel_cell])
            else:
                other = rel_cell if irrelevant_index == "copy" else np.zeros_like(rel_cell)
                idx = np.where(rel_axis[:, None] == 0,
                               np.column_stack([rel_cell, other]),
                               np.column_stack([other, rel_cell]))
                sent = idx
                xhat = delta * idx
        emitted.append(sent)
        errs.append(np.sum(w * (x - xhat) ** 2, axis=1))
    return LatticeReport(
        surprisal_estimate(np.concatenate(emitted), cfg.seed),
        McEstimate.from_samples(np.concatenate(errs), cfg.seed),
        mode,
    )
