import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsi.erasure import (
    ErasurePayload,
    GfContext,
    RelevanceMask,
    encode_relevant,
    gf_context,
    poly_evaluate,
    poly_interpolate,
    reconstruct,
)
from dsi.errors import ModelError


def _slow_mul(a, b, m, poly):
    # carry-less multiply then reduce, independent of the log tables
    r = 0
    for i in range(m):
        if (b >> i) & 1:
            r ^= a << i
    for i in range(2 * m - 2, m - 1, -1):
        if (r >> i) & 1:
            r ^= poly << (i - m)
    return r


@pytest.mark.parametrize("m", [3, 4, 8])
def test_mul_matches_carryless_reference(m):
    ctx = gf_context(m)
    elems = range(ctx.order) if m < 8 else range(0, 256, 7)
    for a, b in itertools.product(elems, repeat=2):
        assert ctx.mul(a, b) == _slow_mul(a, b, m, ctx.poly)


def test_field_axioms_gf8():
    ctx = gf_context(3)
    F = range(8)
    for a, b, c in itertools.product(F, repeat=3):
        assert ctx.mul(a, ctx.mul(b, c)) == ctx.mul(ctx.mul(a, b), c)
        assert ctx.mul(a, b ^ c) == ctx.mul(a, b) ^ ctx.mul(a, c)
    for a in F:
        assert ctx.mul(a, 1) == a
        if a:
            assert ctx.mul(a, ctx.inv(a)) == 1


@pytest.mark.parametrize("m", [4, 8])
def test_inverse_and_division(m):
    ctx = gf_context(m)
    for a in range(1, ctx.order):
        assert ctx.mul(a, ctx.inv(a)) == 1
        assert ctx.div(a, a) == 1
    with pytest.raises(ZeroDivisionError):
        ctx.inv(0)


def test_non_primitive_polynomial_rejected():
    # x^4 + x^3 + x^2 + x + 1 is irreducible but has order 5
    with pytest.raises(ModelError):
        GfContext(4, 0b11111)
    with pytest.raises(ModelError):
        GfContext(5)


def test_single_point_is_constant():
    ctx = gf_context(3)
    assert poly_interpolate([(5, 6)], ctx) == [6]


def test_evaluate_trivial():
    ctx = gf_context(8)
    assert poly_evaluate([7], [0, 1, 200], ctx) == [7, 7, 7]
    assert poly_evaluate([0, 1], [0, 3, 200], ctx) == [0, 3, 200]


def test_duplicate_positions_rejected():
    with pytest.raises(ModelError):
        poly_interpolate([(1, 2), (1, 3)], gf_context(3))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_random_polynomial_recovered(data):
    m = data.draw(st.sampled_from([3, 4, 8]))
    ctx = gf_context(m)
    k = data.draw(st.integers(1, min(ctx.order, 20)))
    coeffs = data.draw(st.lists(st.integers(0, ctx.order - 1), min_size=k, max_size=k))
    pos = data.draw(st.lists(st.integers(0, ctx.order - 1), min_size=k, max_size=k, unique=True))
    vals = poly_evaluate(coeffs, pos, ctx)
    assert poly_interpolate(list(zip(pos, vals)), ctx) == coeffs


def test_interpolate_evaluate_roundtrip_many(rng):
    ctx = gf_context(8)
    for _ in range(1000):
        k = int(rng.integers(1, 17))
        pos = rng.choice(256, size=k, replace=False).tolist()
        ys = rng.integers(0, 256, size=k).tolist()
        c = poly_interpolate(list(zip(pos, ys)), ctx)
        assert poly_evaluate(c, pos, ctx) == ys


def test_seven_five_three_payload():
    ctx = gf_context(3)
    x = [3, 1, 4, 1, 5, 2, 6]
    mask = RelevanceMask((1, 0, 1, 1, 0, 1, 1))
    payload = encode_relevant(x, mask, ctx)
    assert payload.bit_length == 15
    assert 7 * 3 == 21
    xhat = reconstruct(payload, ctx)
    assert all(xhat[i] == x[i] for i in mask.positions)


def test_full_mask_lossless_and_k1_constant():
    ctx = gf_context(4)
    x = list(range(3, 16))
    full = RelevanceMask((1,) * len(x))
    assert reconstruct(encode_relevant(x, full, ctx), ctx) == x
    one = RelevanceMask.from_positions(len(x), [4])
    p = encode_relevant(x, one, ctx)
    assert p.coeffs == (x[4],)
    assert reconstruct(p, ctx) == [x[4]] * len(x)


def test_mask_validation():
    with pytest.raises(ModelError):
        RelevanceMask((0, 0, 0))
    with pytest.raises(ModelError):
        RelevanceMask((0, 2))


def test_block_longer_than_field():
    with pytest.raises(ModelError):
        encode_relevant([0] * 9, RelevanceMask((1,) * 9), gf_context(3))


def test_wire_format_layout():
    p = ErasurePayload(7, 3, 3, (0b101, 0b011, 0b110))
    blob = p.to_bytes()
    # header then 101 011 110 packed MSB first and padded to two octets
    assert blob[:4] == bytes([7, 3, 3, 0])
    assert blob[4:] == bytes([0b10101111, 0b00000000])
    assert ErasurePayload.from_bytes(blob) == p


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_wire_roundtrip(data):
    m = data.draw(st.sampled_from([3, 4, 8]))
    k = data.draw(st.integers(1, 30))
    coeffs = tuple(data.draw(st.lists(st.integers(0, 2**m - 1), min_size=k, max_size=k)))
    p = ErasurePayload(40, k, m, coeffs)
    blob = p.to_bytes()
    assert len(blob) == 4 + (k * m + 7) // 8
    assert ErasurePayload.from_bytes(blob) == p


def test_wire_rejects_corruption():
    blob = bytearray(ErasurePayload(7, 3, 3, (1, 2, 3)).to_bytes())
    with pytest.raises(ModelError):
        ErasurePayload.from_bytes(bytes(blob[:-1]))
    blob[3] = 1
    with pytest.raises(ModelError):
        ErasurePayload.from_bytes(bytes(blob))
