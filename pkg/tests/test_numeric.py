import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsi import analytic as an
from dsi import numeric as nm
from dsi.errors import BudgetError, ModelError
from dsi.model import (
    LN2,
    DistortionTensor,
    RDCurve,
    binary_entropy,
    binary_entropy_bits,
    build_model,
    independent_model,
    mutual_information,
)

HAM2 = 1.0 - np.eye(2)


def _random_init(rng, n):
    return rng.dirichlet(np.ones(n))


# --- standard BA ----------------------------------------------------------------

def test_bsc_point():
    # for the binary symmetric source the optimal slope at D is ln((1-D)/D)
    res = nm.ba_solve(nm.BaProblem([0.5, 0.5], HAM2, math.log(9.0)))
    assert res.converged
    assert res.D == pytest.approx(0.1, abs=1e-9)
    assert res.R / LN2 == pytest.approx(1 - binary_entropy_bits(0.1), abs=1e-9)


def test_zero_slope_is_zero_rate():
    d = np.array([[0.0, 1.0, 3.0], [2.0, 0.0, 1.0]])
    px = np.array([0.3, 0.7])
    res = nm.ba_solve(nm.BaProblem(px, d, 0.0))
    assert res.R == pytest.approx(0.0, abs=1e-12)
    assert res.D == pytest.approx(min(px @ d), abs=1e-12)


def test_quaternary_high_slope_gives_two_bits():
    res = nm.ba_solve(nm.BaProblem(np.full(4, 0.25), 1.0 - np.eye(4), 40.0))
    assert res.R / LN2 == pytest.approx(2.0, abs=1e-6)


def test_debug_mode_checks_monotone_functional(rng):
    for _ in range(5):
        px = rng.dirichlet(np.ones(3))
        d = rng.uniform(0, 2, size=(3, 4))
        res = nm.ba_solve(nm.BaProblem(px, d, 2.5), debug=True, init=_random_init(rng, 4))
        assert res.converged


def test_non_convergence_is_flagged():
    with pytest.warns(RuntimeWarning):
        res = nm.ba_solve(nm.BaProblem([0.5, 0.5], HAM2, 0.5), max_iter=2, init=[0.9, 0.1])
    assert not res.converged


# --- conditional and encoder-only BA ------------------------------------------------

@pytest.mark.parametrize("model", [an.model_noisy_obs(2), an.model_weighted(2, 5.0)])
def test_conditional_matches_hamming_closed_form(model):
    d = DistortionTensor.hamming_side(model.alphas, model.betas)
    for s in np.geomspace(0.05, 20, 20):
        res = nm.ba_solve_conditional([0.5, 0.5], model.pq, d, s)
        assert res.converged
        ref = an.rd_hamming_both(model, min(max(res.D, model.d_min), model.d_max))
        assert res.R / LN2 == pytest.approx(ref.R, abs=1e-6)


def test_single_q_degenerates(rng):
    px = rng.dirichlet(np.ones(3))
    d2 = rng.uniform(0, 1, size=(3, 3))
    d3 = d2[:, :, None]
    base = nm.ba_solve(nm.BaProblem(px, d2, 3.0))
    cond = nm.ba_solve_conditional(px, [1.0], d3, 3.0)
    enc = nm.ba_solve_enc(px, [1.0], d3, 3.0)
    for r in (cond, enc):
        assert r.R == pytest.approx(base.R, abs=1e-12)
        assert r.D == pytest.approx(base.D, abs=1e-12)
    assert nm.codebook_uniformity(enc) == 0.0


def test_equal_betas_side_info_useless():
    d = DistortionTensor.hamming_side([0.0, 0.0], [1.0, 1.0])
    for s in (0.5, 2.0, 6.0):
        cond = nm.ba_solve_conditional([0.5, 0.5], [0.3, 0.7], d, s)
        base = nm.ba_solve(nm.BaProblem([0.5, 0.5], HAM2, s))
        assert cond.R == pytest.approx(base.R, abs=1e-10)


def test_group_case_enc_equals_both(rng):
    rho = np.array([[0.0, 0.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]])
    d = DistortionTensor.from_difference(4, rho)
    for s in (0.5, 1.0, 2.0):
        init = _random_init(rng, 4)
        enc = nm.ba_solve_enc(np.full(4, 0.25), [0.5, 0.5], d, s, init=init)
        both = nm.ba_solve_conditional(np.full(4, 0.25), [0.5, 0.5], d, s, init=init)
        assert abs(enc.R - both.R) / LN2 < 1e-3
        assert enc.I_xhat_q < 1e-3
        assert nm.codebook_uniformity(enc) < 1e-3


def test_erasure_nonuniform_enc_equals_both(rng):
    d = DistortionTensor.erasure(HAM2)
    for s in (0.5, 2.0, 5.0):
        init = _random_init(rng, 2)
        enc = nm.ba_solve_enc([0.3, 0.7], [0.4, 0.6], d, s, init=init)
        both = nm.ba_solve_conditional([0.3, 0.7], [0.4, 0.6], d, s, init=init)
        assert abs(enc.R - both.R) / LN2 < 1e-3


def test_asymmetric_example_needs_q_dependent_codebook():
    d = np.zeros((2, 2, 2))
    d[:, :, 0] = HAM2
    d[:, :, 1] = [[0.0, 10.0], [0.1, 0.0]]
    res = nm.ba_solve_enc([0.3, 0.7], [0.5, 0.5], d, 3.0)
    assert nm.codebook_uniformity(res) > 0.05
    assert res.I_xhat_q > 0


def test_enc_rate_decomposition(rng):
    for _ in range(10):
        px = rng.dirichlet(np.ones(3))
        pq = rng.dirichlet(np.ones(2))
        d = rng.uniform(0, 3, size=(3, 3, 2))
        res = nm.ba_solve_enc(px, pq, d, float(rng.uniform(0.3, 5)))
        joint = (np.outer(px, pq).ravel()[:, None] * res.test_channel.reshape(6, 3))
        direct = mutual_information(joint)
        assert res.I_x_xhat_given_q + res.I_xhat_q == pytest.approx(direct, abs=1e-9)
        assert res.R == pytest.approx(direct, abs=1e-9)


def test_ordering_both_enc_none(rng):
    for _ in range(10):
        px = rng.dirichlet(np.ones(2))
        pq = rng.dirichlet(np.ones(2))
        d = rng.uniform(0, 2, size=(2, 2, 2))
        model = independent_model(px, pq)
        dt = DistortionTensor(d)
        s = float(rng.uniform(0.5, 4))
        both = nm.solve_model(model, dt, s, "both")
        enc = nm.solve_model(model, dt, s, "enc")
        none = nm.solve_model(model, dt, s, "none")
        lag = lambda r: r.R + s * r.D
        # the Lagrangians at a common slope are ordered like the curves
        assert lag(both) <= lag(enc) + 1e-9
        assert lag(enc) <= lag(none) + 1e-9


def test_solve_model_rejects_dependent_q():
    m = build_model([0.5, 0.5], np.eye(2), [[0.9, 0.1], [0.2, 0.8]])
    d = DistortionTensor(np.ones((2, 2, 2)))
    with pytest.raises(ModelError):
        nm.solve_model(m, d, 1.0, "enc")
    assert nm.solve_model(m, d, 1.0, "none").R == pytest.approx(0.0, abs=1e-12)


def _grid_lagrangian(px, pq, d, s, g=101):
    """min over p(xhat=1|x,q) on a g-point grid of I(x,q;xhat) + s E[d], in nats."""
    w = np.outer(px, pq).ravel()                     # super-source weights, index x*nq+q
    dd = np.transpose(d, (0, 2, 1)).reshape(4, 2)
    a = np.linspace(0.0, 1.0, g)
    f = [-w[c] * binary_entropy(a) + s * w[c] * (a * dd[c, 1] + (1 - a) * dd[c, 0]) for c in range(4)]
    A1, A2, A3 = np.meshgrid(a, a, a, indexing="ij")
    rest = w[1] * A1 + w[2] * A2 + w[3] * A3
    F = f[1][:, None, None] + f[2][None, :, None] + f[3][None, None, :]
    best = math.inf
    for i, a0 in enumerate(a):
        total = binary_entropy(w[0] * a0 + rest) + f[0][i] + F
        best = min(best, float(total.min()))
    return best


def test_enc_matches_gridded_exhaustive_search(rng):
    for _ in range(2):
        px = rng.dirichlet(np.ones(2))
        pq = rng.dirichlet(np.ones(2))
        d = rng.uniform(0, 2, size=(2, 2, 2))
        s = float(rng.uniform(0.5, 3))
        res = nm.ba_solve_enc(px, pq, d, s)
        ba = res.R + s * res.D
        grid = _grid_lagrangian(px, pq, d, s)
        assert grid >= ba - 1e-9
        assert (grid - ba) / LN2 < 2e-3


# --- envelope -------------------------------------------------------------------

def test_envelope_keeps_convex_curve_and_collinear_points():
    pts = np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])
    np.testing.assert_array_equal(nm.convex_lower_envelope(pts), pts)
    D = np.linspace(0.01, 1, 20)
    curve = np.column_stack([D, -np.log(D)])
    np.testing.assert_allclose(nm.convex_lower_envelope(curve), curve)


def test_envelope_cut_at_minimum_rate():
    pts = [[0.0, 1.0], [1.0, 0.0], [2.0, 0.5]]
    env = nm.convex_lower_envelope(pts)
    assert env[-1].tolist() == [1.0, 0.0]
    assert nm.envelope_rate(env, 5.0) == 0.0
    assert math.isinf(nm.envelope_rate(env, -1.0))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=2, max_size=40))
def test_envelope_of_scatter_is_valid(points):
    pts = np.array(points)
    if np.unique(pts[:, 0]).size < 2:
        return
    env = nm.convex_lower_envelope(pts)
    RDCurve(env[:, 0], env[:, 1]).validate(tol=1e-9)
    # no input point lies below the envelope inside its span
    inside = (pts[:, 0] >= env[0, 0]) & (pts[:, 0] <= env[-1, 0])
    R = nm.envelope_rate(env, pts[inside, 0])
    assert np.all(pts[inside, 1] >= R - 1e-9 * max(1.0, pts[:, 1].max()))


# --- Wyner-Ziv oracle -------------------------------------------------------------

def _scaled_hamming(values, probs):
    model = independent_model([0.5, 0.5], probs)
    return model, DistortionTensor(HAM2[:, :, None] * np.asarray(values)[None, None, :])


@pytest.mark.parametrize("D", [0.15, 0.3, 0.45])
def test_wz_matches_q_blind_rate(D):
    model, d = _scaled_hamming([1.0, 2.0], [0.5, 0.5])
    res = nm.wz_bruteforce(model, d, D, nm.WzGrid(3, 33))
    ref = 1 - binary_entropy_bits(D / 1.5)
    assert abs(res.R / LN2 - ref) < 0.02
    assert res.R / LN2 >= ref - 1e-9


def test_wz_zero_rate_at_max_distortion():
    model, d = _scaled_hamming([1.0, 2.0], [0.5, 0.5])
    assert nm.wz_bruteforce(model, d, 0.75, nm.WzGrid(2, 17)).R == pytest.approx(0.0, abs=1e-12)


def test_wz_single_q_matches_ba():
    model, d = _scaled_hamming([1.0], [1.0])
    for D in (0.1, 0.25):
        wz = nm.wz_bruteforce(model, d, D, nm.WzGrid(3, 33))
        assert abs(wz.R / LN2 - (1 - binary_entropy_bits(D))) < 0.02


def test_wz_budget_and_cardinality():
    model, d = _scaled_hamming([1.0, 2.0], [0.5, 0.5])
    with pytest.raises(ModelError):
        nm.wz_bruteforce(model, d, 0.2, nm.WzGrid(4, 9))
    with pytest.raises(BudgetError):
        nm.wz_bruteforce(model, d, 0.2, nm.WzGrid(3, 201))


# --- Gaussian encoder-only upper bound -------------------------------------------------

def test_mixture_information_limits():
    assert nm._gauss_mixture_info([0.6, 0.4], [0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    h = float(-(0.6 * math.log(0.6) + 0.4 * math.log(0.4)))
    assert nm._gauss_mixture_info([0.6, 0.4], [0.0, 0.5]) == pytest.approx(h, abs=1e-12)
    assert nm._gauss_mixture_info([0.6, 0.4], [0.7, 0.7]) == pytest.approx(0.0, abs=1e-9)


@pytest.fixture(scope="module")
def enc_curve():
    model = an.two_point_example()
    D = np.geomspace(1e-3, 4.6, 50)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        curve = nm.gauss_enc_upper_curve(model, eval_D=D)
    return model, D, nm.envelope_rate(np.column_stack([curve.D, curve.R]), D)


def test_enc_curve_between_both_and_none(enc_curve):
    model, D, enc = enc_curve
    for d, r in zip(D, enc):
        assert an.rd_gauss_both(model, d).R - 1e-6 <= r <= an.rd_gauss_none(model, d) + 1e-6


def test_enc_curve_endpoints(enc_curve):
    model, D, enc = enc_curve
    assert enc[-1] == pytest.approx(0.0, abs=1e-12)
    small = [p for p in nm.gauss_enc_points(model, [1 / (2 * 1e-4)])][0]
    assert small.I_xhat_q < 1e-3
