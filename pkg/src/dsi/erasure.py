"""Lossless coding of the relevant samples only, by curve fitting in GF(2^m).

The encoder fits the unique polynomial of degree < k through the k relevant
(position, value) pairs and sends its coefficients. The decoder evaluates the
polynomial at every position 0..n-1, which reproduces the relevant samples
exactly and fills the irrelevant ones with whatever the curve gives.

Wire format of a payload::

    octet 0   n
    octet 1   k
    octet 2   m
    octet 3   reserved, 0
    then ceil(k*m/8) octets: coefficients in ascending degree, each m bits,
    packed MSB-first, zero padded at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import ModelError

PRIMITIVE_POLYS = {
    3: 0b1011,        # x^3 + x + 1
    4: 0b10011,       # x^4 + x + 1
    8: 0x11D,         # x^8 + x^4 + x^3 + x^2 + 1
}

HEADER_OCTETS = 4


class GfContext:
    """Arithmetic in GF(2^m) through exp/log tables."""

    def __init__(self, m=8, poly=None):
        if m not in PRIMITIVE_POLYS:
            raise ModelError(f"unsupported extension degree m={m}; use one of {sorted(PRIMITIVE_POLYS)}")
        self.m = m
        self.order = 1 << m
        self.poly = PRIMITIVE_POLYS[m] if poly is None else poly
        q = self.order - 1
        exp = [0] * (2 * q)
        log = [0] * self.order
        x = 1
        for i in range(q):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.order:
                x ^= self.poly
        if x != 1 or len(set(exp[:q])) != q:
            raise ModelError(f"polynomial {self.poly:#x} is not primitive for m={m}")
        exp[q:] = exp[:q]
        self._exp = tuple(exp)
        self._log = tuple(log)
        # full product table; rows are indexed by the left operand
        self._mul = tuple(
            tuple(0 if a == 0 or b == 0 else exp[log[a] + log[b]] for b in range(self.order))
            for a in range(self.order)
        )

    def __repr__(self):
        return f"GfContext(m={self.m}, poly={self.poly:#x})"

    def check(self, a):
        if not 0 <= a < self.order:
            raise ModelError(f"{a} is not an element of GF(2^{self.m})")
        return a

    @staticmethod
    def add(a, b):
        return a ^ b

    def mul(self, a, b):
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("0 has no inverse in GF(2^m)")
        return self._exp[(self.order - 1 - self._log[a]) % (self.order - 1)]

    def div(self, a, b):
        if b == 0:
            raise ZeroDivisionError("division by 0 in GF(2^m)")
        if a == 0:
            return 0
        return self._exp[self._log[a] - self._log[b] + self.order - 1]


@lru_cache(maxsize=None)
def gf_context(m):
    """Shared immutable context for the default polynomial of degree ``m``."""
    return GfContext(m)


@dataclass(frozen=True)
class RelevanceMask:
    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ModelError("mask entries must be 0 or 1")
        k = sum(bits)
        if not 1 <= k <= len(bits):
            raise ModelError(f"mask must have between 1 and n ones, got k={k}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_positions(cls, n, positions):
        bits = [0] * n
        for p in positions:
            bits[p] = 1
        return cls(tuple(bits))

    @property
    def n(self):
        return len(self.bits)

    @property
    def k(self):
        return sum(self.bits)

    @property
    def positions(self):
        return tuple(i for i, b in enumerate(self.bits) if b)


@dataclass(frozen=True)
class ErasurePayload:
    n: int
    k: int
    m: int
    coeffs: tuple

    @property
    def bit_length(self):
        """Coefficient bits, excluding the fixed header."""
        return self.k * self.m

    def to_bytes(self):
        acc = 0
        for c in self.coeffs:
            acc = (acc << self.m) | c
        nbytes = (self.bit_length + 7) // 8
        acc <<= nbytes * 8 - self.bit_length
        return bytes((self.n, self.k, self.m, 0)) + acc.to_bytes(nbytes, "big")

    @classmethod
    def from_bytes(cls, data):
        if len(data) < HEADER_OCTETS:
            raise ModelError("payload shorter than its header")
        n, k, m, reserved = data[:HEADER_OCTETS]
        if reserved != 0:
            raise ModelError("reserved header octet must be 0")
        nbytes = (k * m + 7) // 8
        body = data[HEADER_OCTETS:]
        if len(body) != nbytes:
            raise ModelError(f"payload body has {len(body)} octets, expected {nbytes}")
        acc = int.from_bytes(body, "big") >> (nbytes * 8 - k * m)
        mask = (1 << m) - 1
        coeffs = tuple((acc >> (m * (k - 1 - i))) & mask for i in range(k))
        return cls(n, k, m, coeffs)


def poly_evaluate(coeffs, positions, ctx: GfContext):
    """Horner evaluation of ascending-degree ``coeffs`` at each position."""
    rev = tuple(reversed(coeffs))
    out = []
    for x in positions:
        row = ctx._mul[x]
        acc = 0
        for c in rev:
            acc = row[acc] ^ c
        out.append(acc)
    return out


def poly_interpolate(points, ctx: GfContext):
    """Coefficients (ascending) of the unique polynomial of degree < k through ``points``.

    Lagrange form: with P(x) = prod(x - s_i), each basis numerator is
    P(x) / (x - s_i), obtained by synthetic division.
    """
    xs = [ctx.check(p[0]) for p in points]
    ys = [ctx.check(p[1]) for p in points]
    k = len(xs)
    if k == 0:
        raise ModelError("need at least one point")
    if k > ctx.order:
        raise ModelError(f"{k} points exceed the field order {ctx.order}")
    if len(set(xs)) != k:
        raise ModelError("interpolation positions must be distinct")
    table = ctx._mul

    master = [1]
    for s in xs:
        row = table[s]
        nxt = [0] * (len(master) + 1)
        for j, c in enumerate(master):
            nxt[j + 1] ^= c
            nxt[j] ^= row[c]
        master = nxt

    coeffs = [0] * k
    for i, (s, y) in enumerate(zip(xs, ys)):
        if y == 0:
            continue
        # divide master (degree k) by (x + s); characteristic 2 so minus is plus
        row = table[s]
        quot = [0] * k
        carry = master[k]
        quot[k - 1] = carry
        for j in range(k - 1, 0, -1):
            carry = master[j] ^ row[carry]
            quot[j - 1] = carry
        denom = 1
        for j, t in enumerate(xs):
            if j != i:
                denom = table[denom][s ^ t]
        srow = table[ctx.div(y, denom)]
        for j in range(k):
            coeffs[j] ^= srow[quot[j]]
    return coeffs


def _check_fits(n, ctx):
    if n > ctx.order:
        raise ModelError(f"block length n={n} exceeds field order 2^{ctx.m}={ctx.order}")


def encode_relevant(x, mask: RelevanceMask, ctx: GfContext) -> ErasurePayload:
    """Fit the relevant samples of ``x`` and return the coefficient payload."""
    n = len(x)
    if mask.n != n:
        raise ModelError(f"mask length {mask.n} != block length {n}")
    _check_fits(n, ctx)
    if n > 255:
        raise ModelError("header stores n in one octet; n must be <= 255")
    coeffs = poly_interpolate([(p, x[p]) for p in mask.positions], ctx)
    return ErasurePayload(n, mask.k, ctx.m, tuple(coeffs))


def reconstruct(payload: ErasurePayload, ctx: GfContext):
    """Evaluate the transmitted curve at positions 0..n-1."""
    if payload.m != ctx.m:
        raise ModelError(f"payload built for m={payload.m}, context has m={ctx.m}")
    if len(payload.coeffs) != payload.k:
        raise ModelError("payload coefficient count does not match k")
    _check_fits(payload.n, ctx)
    return poly_evaluate(payload.coeffs, range(payload.n), ctx)
