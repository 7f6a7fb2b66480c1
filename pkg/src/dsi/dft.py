"""Quantize k relevant complex samples through k band-limited DFT coefficients.

The encoder finds the k lowest-frequency DFT coefficients whose periodic
band-limited interpolant passes through the relevant samples, quantizes them
and sends the indices. The decoder synthesizes all n samples from the
quantized coefficients without knowing which samples were relevant.

DFT normalisation is 1/sqrt(n) in both directions, so k = n is exactly
unitary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ModelError, SingularSystemError
from .erasure import RelevanceMask

KAPPA_MAX = 1e12


def _basis(positions, k, n):
    positions = np.asarray(positions, dtype=float)
    f = np.arange(k, dtype=float)
    return np.exp(2j * np.pi * np.outer(positions, f) / n) / np.sqrt(n)


@dataclass(frozen=True)
class InterpSystem:
    """The k x k matrix mapping coefficients to relevant samples."""

    n: int
    mask: RelevanceMask
    A: np.ndarray = field(repr=False)
    kappa: float
    _lu: tuple = field(repr=False, compare=False)

    @classmethod
    def build(cls, mask: RelevanceMask, matrix=None):
        """Build from a mask. ``matrix`` optionally replaces the DFT basis.

        ``matrix(positions, k, n)`` must return the k x k system matrix.
        """
        n, k = mask.n, mask.k
        A = (matrix or _basis)(mask.positions, k, n)
        A = np.asarray(A, dtype=complex)
        if A.shape != (k, k):
            raise ModelError(f"system matrix must be {k}x{k}, got {A.shape}")
        kappa = float(np.linalg.cond(A))
        A.setflags(write=False)
        lu = scipy.linalg.lu_factor(A, check_finite=True) if np.isfinite(kappa) else None
        return cls(n, mask, A, kappa, lu)

    @property
    def k(self):
        return self.mask.k

    @property
    def positions(self):
        return self.mask.positions


@dataclass(frozen=True)
class CoeffQuantizer:
    """Midtread uniform quantizer applied to real and imaginary parts."""

    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ModelError("quantizer step must be positive")


def interpolate_coeffs(x_relevant, sys: InterpSystem):
    """Solve A X = x_relevant by LU with partial pivoting."""
    x_relevant = np.asarray(x_relevant, dtype=complex)
    if x_relevant.shape != (sys.k,):
        raise ModelError(f"expected {sys.k} relevant samples, got {x_relevant.shape}")
    if not np.isfinite(sys.kappa) or sys.kappa > KAPPA_MAX:
        raise SingularSystemError(
            f"interpolation system is numerically singular (kappa={sys.kappa:.3g})", sys.kappa
        )
    X = scipy.linalg.lu_solve(sys._lu, x_relevant)
    resid = np.linalg.norm(sys.A @ X - x_relevant)
    if resid > 1e-9 * max(np.linalg.norm(x_relevant), np.finfo(float).tiny):
        raise SingularSystemError(
            f"interpolation residual {resid:.3g} too large (kappa={sys.kappa:.3g})", sys.kappa
        )
    return X


def synthesize(X, n):
    """x_hat[i] = sum_{f<k} X[f] exp(2j pi f i / n) / sqrt(n), i = 0..n-1."""
    X = np.asarray(X, dtype=complex)
    k = X.size
    if k > n:
        raise ModelError(f"k={k} coefficients cannot exceed n={n}")
    return _basis(np.arange(n), k, n) @ X


def quantize_coeffs(X, quant: CoeffQuantizer):
    """Return (X_hat, indices, bits_estimate).

    ``indices`` has shape (k, 2) holding real and imaginary cell indices;
    ``bits_estimate`` is the plug-in entropy of all emitted integers, in bits
    per coefficient.
    """
    X = np.asarray(X, dtype=complex)
    idx = np.stack([np.rint(X.real / quant.step), np.rint(X.imag / quant.step)], axis=-1)
    idx = idx.astype(np.int64)
    X_hat = quant.step * (idx[..., 0] + 1j * idx[..., 1])
    return X_hat, idx, 2.0 * empirical_entropy_bits(idx.ravel())


def empirical_entropy_bits(symbols):
    """Plug-in entropy in bits of a sequence of hashable integers or rows."""
    symbols = np.asarray(symbols)
    if symbols.size == 0:
        return 0.0
    axis = 0 if symbols.ndim > 1 else None
    _, counts = np.unique(symbols, axis=axis, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def relevant_error_identity(X, X_hat, sys: InterpSystem):
    """(sample-domain error, coefficient-domain error, ratio), each per relevant sample.

    The sample-domain error is the decoder's error at the relevant positions,
    obtained by synthesizing the coefficient error over all n samples.
    """
    delta = np.asarray(X, dtype=complex) - np.asarray(X_hat, dtype=complex)
    diff = synthesize(delta, sys.n)[list(sys.positions)]
    sample_err = float(np.vdot(diff, diff).real) / sys.k
    coeff_err = float(np.vdot(delta, delta).real) / sys.k
    ratio = 1.0 if coeff_err == 0.0 else sample_err / coeff_err
    return sample_err, coeff_err, ratio


def mapped_error(X, X_hat, sys: InterpSystem):
    """||A (X - X_hat)||^2 / k, the algebraic form of the sample-domain error."""
    v = sys.A @ (np.asarray(X, dtype=complex) - np.asarray(X_hat, dtype=complex))
    return float(np.vdot(v, v).real) / sys.k
