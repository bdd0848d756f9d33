import math

import numpy as np
import pytest

from conftest import S3, random_pd
from ggmlaplace.errors import EmptyModelSet
from ggmlaplace.graphmodel import FreeIndexSet, Graph, enumerate_all
from ggmlaplace.oracle import fd_hessian
from ggmlaplace.priors import GraphPrior, HardCap
from ggmlaplace.score import (
    ModelScore,
    h_value,
    hessian_at,
    laplace_dims_term,
    normalize,
    score_model,
)

# Laplace total for S3, n = 50, lambda = 15, q = 0.4, path graph 1-2-3, from an
# independent computation: fsolve stationary point, slogdet of the Hessian
# built from tr(W E_a W E_b), prior and dimension terms written out by hand.
PATH_TOTAL = -89.74421535620537
PATH_LOG_DET_H = 3.7787790328035236


def test_h_value_scalar():
    g = Graph.empty(1)
    assert h_value(np.array([[1.0]]), np.array([[1.0]]), 0.5, 1, g) == pytest.approx(1.5, abs=1e-15)


def test_h_value_identity():
    assert h_value(np.eye(4), np.eye(4), 0.0, 10, Graph.empty(4)) == pytest.approx(4.0, abs=1e-14)


def test_h_value_matches_second_implementation(rng):
    g = Graph(2, ((0, 1),))
    om = random_pd(rng, 2)
    s = random_pd(rng, 2)
    lam, n = 3.0, 20
    rho = lam / n
    expect = (
        -math.log(om[0, 0] * om[1, 1] - om[0, 1] ** 2)
        + s[0, 0] * om[0, 0] + s[1, 1] * om[1, 1] + 2 * s[0, 1] * om[0, 1]
        + 2 * rho * abs(om[0, 1]) + rho * (om[0, 0] + om[1, 1])
    )
    assert h_value(om, s, lam, n, g) == pytest.approx(expect, abs=1e-12)


def test_h_value_rejects_entries_off_graph():
    with pytest.raises(ValueError):
        h_value(np.array([[1.0, 0.1], [0.1, 1.0]]), np.eye(2), 1.0, 10, Graph.empty(2))


def test_hessian_identity_pattern():
    idx = FreeIndexSet.of(Graph.complete(4))
    h = hessian_at(np.eye(4), idx).entries
    k = len(idx)
    expect = np.diag([1.0] * 4 + [2.0] * 6)
    assert h.shape == (k, k)
    assert np.max(np.abs(h - expect)) <= 1e-12
    assert np.array_equal(h, h.T)


def test_hessian_scaled_diagonal():
    h = hessian_at(np.diag([2.0, 2.0]), FreeIndexSet(2, ((0, 0),))).entries
    assert h[0, 0] == pytest.approx(0.25, abs=1e-15)


def test_hessian_matches_finite_differences(rng):
    om = random_pd(rng, 4, cond=5)
    idx = FreeIndexSet.of(Graph.complete(4))
    a = hessian_at(om, idx).entries
    b = fd_hessian(om, idx).entries
    assert np.max(np.abs(a - b)) <= 1e-5


def test_dims_term():
    assert laplace_dims_term(5, 50) == pytest.approx(2.5 * math.log(4 * math.pi / 50), abs=1e-15)


def test_scalar_closed_form():
    s, n, lam = 1.3, 40, 8.0
    prior = GraphPrior(0.4, lam, HardCap(0))
    sc = score_model(Graph.empty(1), np.array([[s]]), n, prior)
    w = 1.0 / (s + lam / n)
    h = -math.log(w) + s * w + lam / n * w
    expect = math.log(lam / 2) - n / 2 * h + 0.5 * math.log(4 * math.pi / n) - 0.5 * math.log(w**-2)
    assert sc.total == pytest.approx(expect, abs=1e-9)
    assert sc.regular and sc.reduced_from is None


def test_frozen_path_graph_total():
    sc = score_model(Graph(3, ((0, 1), (1, 2))), S3, 50, GraphPrior(0.4, 15.0, HardCap(3)))
    assert sc.regular
    assert sc.log_det_hessian == pytest.approx(PATH_LOG_DET_H, abs=1e-6)
    assert sc.total == pytest.approx(PATH_TOTAL, abs=1e-6)
    parts = sc.log_prior + sc.log_fit + sc.dims_term - 0.5 * sc.log_det_hessian
    assert sc.total == parts


def test_non_regular_reduction():
    s = np.array([[1.0, 0.2], [0.2, 1.0]])
    prior = GraphPrior(0.4, 50.0, HardCap(1))
    full = score_model(Graph.complete(2), s, 100, prior)
    empty = score_model(Graph.empty(2), s, 100, prior)
    assert not full.regular
    assert full.graph == Graph.empty(2)
    assert full.reduced_from == Graph.complete(2)
    assert full.total == pytest.approx(empty.total, abs=1e-9)


def test_score_input_checks():
    prior = GraphPrior(0.4, 1.0, HardCap(3))
    with pytest.raises(ValueError):
        score_model(Graph.empty(2), S3, 50, prior)
    with pytest.raises(ValueError):
        score_model(Graph.empty(3), S3, 1, prior)


def _fake(edges, total, p=3):
    return ModelScore(Graph(p, edges), 0.0, total, 0.0, 0.0, total)


def test_normalize_single_model():
    out = normalize([_fake(((0, 1),), -3.0)])
    assert out.models[0].probability == 1.0
    assert out.median_model == Graph(3, ((0, 1),))
    assert out.edge_inclusion[(0, 1)] == 1.0 and out.edge_inclusion[(1, 2)] == 0.0


def test_normalize_two_equal_models():
    out = normalize([_fake(((0, 1),), -2.0), _fake(((0, 1), (1, 2)), -2.0)])
    assert [m.probability for m in out.models] == pytest.approx([0.5, 0.5], abs=1e-15)
    assert out.edge_inclusion[(0, 1)] == pytest.approx(1.0, abs=1e-15)
    assert out.edge_inclusion[(1, 2)] == pytest.approx(0.5, abs=1e-15)
    assert out.median_model == Graph(3, ((0, 1),))


def test_normalize_inclusion_by_direct_summation(ar1_p3_n200):
    prior = GraphPrior.from_rho(200, p=3)
    scores = [score_model(g, ar1_p3_n200, 200, prior) for g in enumerate_all(3)]
    out = normalize(scores)
    assert sum(m.probability for m in out.models) == pytest.approx(1.0, abs=1e-12)
    for e, v in out.edge_inclusion.items():
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(sum(m.probability for m in out.models if e in m.graph), abs=1e-15)
    assert out.median_model == Graph(3, tuple(e for e, v in out.edge_inclusion.items() if v > 0.5))
    assert len({m.graph for m in out.models}) == len(out.models)


def test_normalize_shift_invariance():
    a = [_fake(((0, 1),), -2.0), _fake((), -3.5), _fake(((1, 2),), -1.0)]
    b = [_fake(m.graph.edges, m.total + 1234.5) for m in a]
    pa = [m.probability for m in normalize(a).models]
    pb = [m.probability for m in normalize(b).models]
    assert np.allclose(pa, pb, atol=1e-12, rtol=0)


def test_normalize_dedupes_and_checks_consistency():
    out = normalize([_fake((), -1.0), _fake((), -1.0), _fake(((0, 1),), -1.0)])
    assert len(out.models) == 2
    with pytest.raises(AssertionError):
        normalize([_fake((), -1.0), _fake((), -1.1)])


def test_normalize_empty():
    with pytest.raises(EmptyModelSet):
        normalize([])
    with pytest.raises(EmptyModelSet):
        normalize([_fake((), -math.inf)])


def test_summary_to_dict_uses_one_based_keys():
    d = normalize([_fake(((0, 2),), -1.0)]).to_dict()
    assert d["edge_inclusion"]["1-3"] == 1.0
    assert d["median_probability_model"] == [[1, 3]]
    assert d["models"][0]["probability"] == 1.0
