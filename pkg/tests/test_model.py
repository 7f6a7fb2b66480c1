import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsi.errors import ModelError
from dsi.model import (
    DistortionTensor,
    QDistribution,
    RDCurve,
    as_prob_vec,
    build_model,
    check_decomposition,
    dump_model_json,
    entropy,
    independent_model,
    load_model_json,
    mutual_information,
    parse_discrete_q,
    to_units,
)


def test_prob_vec_rejects_bad_input():
    with pytest.raises(ModelError):
        as_prob_vec([0.5, 0.6])
    with pytest.raises(ModelError):
        as_prob_vec([-0.1, 1.1])
    with pytest.raises(ModelError):
        as_prob_vec([np.nan, 1.0])
    v = as_prob_vec([0.25, 0.75])
    with pytest.raises(ValueError):
        v[0] = 1.0


def test_stochastic_row_error_names_row():
    with pytest.raises(ModelError, match="row 1"):
        build_model([0.5, 0.5], [[1, 0], [0.3, 0.3]], [[1, 0], [0, 1]])


def test_copy_w_gives_product_joint():
    m = build_model([0.5, 0.5], np.eye(2), [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_allclose(m.joint_xq, np.outer([0.5, 0.5], [0.5, 0.5]), atol=1e-15)


def test_degenerate_w_gives_uniform_cells():
    m = build_model([0.5, 0.5], [[1.0], [1.0]], [[0.5, 0.5]])
    np.testing.assert_allclose(m.joint_xq, np.full((2, 2), 0.25))
    d = DistortionTensor(np.ones((2, 2, 2)))
    assert check_decomposition(m, d).q_independent_of_x


def test_joint_matches_enumeration(rng):
    px = rng.dirichlet(np.ones(3))
    pw = rng.dirichlet(np.ones(2), size=3)
    pq = rng.dirichlet(np.ones(2), size=2)
    m = build_model(px, pw, pq)
    brute = np.zeros((3, 2, 2))
    for x, w, q in itertools.product(range(3), range(2), range(2)):
        brute[x, q, w] = px[x] * pw[x, w] * pq[w, q]
    np.testing.assert_allclose(m.joint_xqw, brute, atol=1e-15)
    assert abs(m.joint_xqw.sum() - 1.0) < 1e-12
    # q is independent of x given w
    for w in range(2):
        slab = brute[:, :, w]
        slab = slab / slab.sum()
        np.testing.assert_allclose(slab, np.outer(slab.sum(1), slab.sum(0)), atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ModelError):
        build_model([0.5, 0.5], np.eye(3), np.eye(3))


def test_scaled_hamming_is_scaled_form():
    ham = 1.0 - np.eye(2)
    d = DistortionTensor(ham[:, :, None] * np.array([1.0, 2.0]))
    rep = check_decomposition(independent_model([0.5, 0.5], [0.5, 0.5]), d)
    assert rep.scaled_form
    assert rep.q_independent_of_x


def test_offset_hamming_is_not_scaled_form():
    d = DistortionTensor.hamming_side([0.0, 0.5], [1.0, 0.0])
    rep = check_decomposition(independent_model([0.5, 0.5], [0.5, 0.5]), d)
    assert not rep.scaled_form


def test_erasure_tensor_flags_erasure_form():
    d = DistortionTensor.erasure(1.0 - np.eye(3))
    rep = check_decomposition(independent_model(np.ones(3) / 3, [0.3, 0.7]), d)
    assert rep.erasure_form and rep.scaled_form


def test_dependent_q_detected():
    m = build_model([0.5, 0.5], np.eye(2), [[0.9, 0.1], [0.2, 0.8]])
    rep = check_decomposition(m, DistortionTensor(np.ones((2, 2, 2))))
    assert not rep.q_independent_of_x
    assert rep.max_dependence > 0.1


def test_distortion_tensor_validation():
    with pytest.raises(ModelError):
        DistortionTensor(np.ones((2, 2)))
    with pytest.raises(ModelError):
        DistortionTensor(-np.ones((2, 2, 1)))


def test_difference_distortion():
    rho = np.array([[0.0, 0.0], [1.0, 2.0], [1.0, 2.0]])
    d = DistortionTensor.from_difference(3, rho).d
    assert d[0, 2, 1] == 2.0 and d[1, 1, 0] == 0.0 and d[2, 0, 0] == 1.0


def test_entropy_and_information():
    assert entropy([0.5, 0.5]) == pytest.approx(np.log(2))
    assert to_units(np.log(2), "bits") == pytest.approx(1.0)
    joint = np.array([[0.5, 0.0], [0.0, 0.5]])
    assert mutual_information(joint) == pytest.approx(np.log(2))
    assert mutual_information(np.outer([0.3, 0.7], [0.6, 0.4])) == pytest.approx(0.0, abs=1e-15)


def test_parse_discrete_q():
    q = parse_discrete_q("1:0.6,10:0.4")
    assert q.values == (1.0, 10.0) and q.probs == (0.6, 0.4)
    with pytest.raises(ModelError):
        parse_discrete_q("1:0.6,10")
    with pytest.raises(ModelError):
        parse_discrete_q("1:0.6,10:0.5")


@pytest.mark.parametrize(
    "family,params",
    [("pareto", (1.0, 1.0)), ("lognormal", (0.0, 0.0)), ("pathological", (0.6,)),
     ("gamma", (0.0, 1.0)), ("exponential", (-1.0,)), ("uniform01", (1.0,))],
)
def test_qdistribution_rejects(family, params):
    with pytest.raises(ModelError):
        QDistribution(family, params)


def test_rdcurve_sorts_and_validates():
    c = RDCurve([2.0, 1.0, 3.0], [0.5, 1.0, 0.0], "bits")
    assert list(c.D) == [1.0, 2.0, 3.0]
    assert c.violations() == []
    assert c.to("nats").R[0] == pytest.approx(np.log(2))
    with pytest.raises(ModelError):
        RDCurve([1, 2, 3], [1.0, 0.0, 0.9]).validate()
    with pytest.raises(ModelError):
        RDCurve([1, 2, 3], [1.0, 0.9, 0.0]).validate()


def test_json_roundtrip(tmp_path):
    m = build_model([0.25, 0.75], [[1.0], [1.0]], [[0.4, 0.6]])
    d = DistortionTensor.hamming_side([0.0, 0.0], [1.0, 2.0])
    path = tmp_path / "m.json"
    path.write_text(dump_model_json(m, d), encoding="utf-8")
    m2, d2 = load_model_json(path)
    np.testing.assert_array_equal(m2.joint_xqw, m.joint_xqw)
    np.testing.assert_array_equal(d2.d, d.d)
    with pytest.raises(ModelError, match="missing"):
        load_model_json({"px": [1.0]})


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=6))
def test_independent_model_marginals(weights):
    w = np.array(weights) / np.sum(weights)
    m = independent_model([0.5, 0.5], w)
    np.testing.assert_allclose(m.p_q, w, atol=1e-12)
    np.testing.assert_allclose(m.joint_xq.sum(axis=1), [0.5, 0.5], atol=1e-12)
