import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphabp import BINARY, Domain, Graph, IsingModel, PairwiseMRF, ising_to_mrf, mrf_log_score
from alphabp.errors import DomainError, StructuralError
from alphabp.inference import exact_marginals
from alphabp.mrf import dump_model, load_model, model_from_dict, model_to_dict

from conftest import chain, random_graph, random_ising, random_mrf


def all_states(n):
    return [np.array(x) for x in itertools.product((-1, 1), repeat=n)]


# --- graph / domain ---------------------------------------------------------


def test_graph_rejects_self_loop_and_duplicates():
    with pytest.raises(StructuralError):
        Graph(3, ((1, 1),))
    with pytest.raises(StructuralError):
        Graph(3, ((0, 1), (1, 0)))
    with pytest.raises(StructuralError):
        Graph(2, ((0, 2),))


def test_graph_directed_edges_sorted_and_doubled(rng):
    g = random_graph(rng, 9, 0.5)
    d = g.directed_edges
    assert len(d) == 2 * g.num_edges
    assert list(d) == sorted(d)
    for s in range(g.num_nodes):
        for t in g.neighbors(s):
            assert s in g.neighbors(t)


def test_domain_invariants():
    assert BINARY.labels == (-1, 1) and BINARY.is_binary
    with pytest.raises(DomainError):
        Domain((1,))
    with pytest.raises(DomainError):
        Domain((0, 0))
    assert not Domain((0, 1, 2)).is_binary


# --- ising_to_mrf -------------------------------------------------------------


def test_zero_ising_is_uniform():
    mrf = ising_to_mrf(IsingModel(np.zeros((2, 2)), np.zeros(2)))
    assert mrf.graph.num_edges == 0
    np.testing.assert_array_equal(mrf.unary(0), [1.0, 1.0])
    np.testing.assert_allclose(exact_marginals(mrf), 0.5)


def test_single_field_closed_form():
    beta = 0.7
    mrf = ising_to_mrf(IsingModel(np.zeros((2, 2)), [beta, 0.0]))
    u = mrf.unary(0)
    assert u[1] / u[0] == pytest.approx(np.exp(-2 * beta))
    p = exact_marginals(mrf)[0, 1]
    assert p == pytest.approx(np.exp(-beta) / (np.exp(-beta) + np.exp(beta)), abs=1e-14)


def test_chain_joint_matches_quadratic_form():
    J = np.zeros((3, 3))
    J[0, 1] = J[1, 0] = J[1, 2] = J[2, 1] = 0.3
    model = IsingModel(J, np.zeros(3))
    mrf = ising_to_mrf(model)
    assert mrf.graph.edges == ((0, 1), (1, 2))
    scores = [mrf_log_score(mrf, x) for x in all_states(3)]
    direct = [-x @ J @ x for x in all_states(3)]
    np.testing.assert_allclose(np.subtract(scores, direct), scores[0] - direct[0], atol=1e-12)


def test_asymmetric_j_rejected():
    J = np.array([[0.0, 1.0], [0.5, 0.0]])
    with pytest.raises(StructuralError):
        IsingModel(J, np.zeros(2))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 10), seed=st.integers(0, 2**32 - 1))
def test_log_score_reproduces_quadratic_form(n, seed):
    rng = np.random.default_rng(seed)
    J = rng.normal(size=(n, n))
    J = (J + J.T) / 2
    b = rng.normal(size=n)
    model = IsingModel(J, b)
    mrf = ising_to_mrf(model)
    states = all_states(n)
    diff = np.array([mrf_log_score(mrf, x) + model.energy(x) for x in states])
    # the only leftover is the dropped constant sum J_ss
    np.testing.assert_allclose(diff, np.trace(J), atol=1e-10)


# --- potentials --------------------------------------------------------------


def test_pairwise_transpose_on_reverse_lookup(rng):
    mrf = random_mrf(rng, random_graph(rng, 6, 0.6), k=3)
    for s, t in mrf.graph.edges:
        np.testing.assert_array_equal(mrf.pairwise(t, s), mrf.pairwise(s, t).T)
        assert np.all(mrf.pairwise(s, t) > 0)


def test_nonpositive_potential_rejected():
    g = Graph(2, ((0, 1),))
    with pytest.raises(DomainError):
        PairwiseMRF.from_potentials(g, BINARY, [[1, 1], [1, 0]], [[[1, 1], [1, 1]]])
    with pytest.raises(DomainError):
        PairwiseMRF.from_potentials(g, BINARY, np.ones((2, 2)), [[[1, -1], [1, 1]]])


def test_log_score_unit_potentials_and_single_node():
    g = chain(4)
    mrf = PairwiseMRF.from_potentials(g, BINARY, np.ones((4, 2)), np.ones((3, 2, 2)))
    for x in all_states(4):
        assert mrf_log_score(mrf, x) == 0.0
    one = PairwiseMRF.from_potentials(Graph(1), BINARY, [[2.0, 5.0]], np.zeros((0, 2, 2)))
    assert mrf_log_score(one, [-1]) == pytest.approx(np.log(2.0))
    assert mrf_log_score(one, [1]) == pytest.approx(np.log(5.0))


def test_log_score_out_of_domain():
    mrf = ising_to_mrf(IsingModel(np.zeros((2, 2)), np.zeros(2)))
    with pytest.raises(DomainError):
        mrf_log_score(mrf, [0, 1])
    with pytest.raises(DomainError):
        mrf_log_score(mrf, [1])


# --- JSON ----------------------------------------------------------------------


def test_ising_json_round_trip(tmp_path, rng):
    model = random_ising(rng, random_graph(rng, 7, 0.5))
    path = tmp_path / "m.json"
    dump_model(model, path, provenance={"seed": 3})
    back = load_model(path)
    np.testing.assert_array_equal(back.J, model.J)
    np.testing.assert_array_equal(back.b, model.b)
    assert back.graph == model.graph
    assert json.loads(path.read_text())["provenance"] == {"seed": 3}


def test_general_json_round_trip(rng):
    mrf = random_mrf(rng, random_graph(rng, 5, 0.7), k=3)
    back = model_from_dict(json.loads(json.dumps(model_to_dict(mrf))))
    np.testing.assert_allclose(back.log_unary, mrf.log_unary, atol=1e-12)
    np.testing.assert_allclose(back.log_pairwise, mrf.log_pairwise, atol=1e-12)


def test_json_reversed_edge_is_transposed():
    data = {"n": 2, "domain": [-1, 1], "edges": [[1, 0]],
            "unary": [[1, 1], [1, 1]], "pairwise": [[[1.0, 2.0], [3.0, 4.0]]]}
    mrf = model_from_dict(data)
    # file table is indexed [x_1, x_0]
    np.testing.assert_allclose(mrf.pairwise(1, 0), [[1.0, 2.0], [3.0, 4.0]])


@pytest.mark.parametrize("data", [
    {"n": 3, "edges": [[0, 1], [1, 0]], "J": [[0, 1, 0.1]], "b": [0, 0, 0]},
    {"n": 3, "edges": [[0, 1]], "J": [[0, 1, 0.1], [1, 0, 0.2]], "b": [0, 0, 0]},
    {"n": 3, "edges": [[0, 1]], "J": [[1, 2, 0.1]], "b": [0, 0, 0]},
    {"edges": []},
    {"n": 2, "edges": [[0, 1]]},
])
def test_malformed_json_rejected(data):
    with pytest.raises(StructuralError):
        model_from_dict(data)
