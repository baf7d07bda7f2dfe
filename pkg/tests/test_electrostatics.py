import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jjchain.electrostatics import build_capacitance_model, interaction_range
from oracles import capacitance_by_rule, gauss_jordan_inverse


def test_decoupled_islands():
    m = build_capacitance_model(3, 0.0)
    assert np.array_equal(m.matrix, np.eye(3))
    assert np.array_equal(m.inverse, np.eye(3))


def test_construction_rule_c1():
    m = build_capacitance_model(3, 1.0)
    assert np.array_equal(m.matrix, [[2, -1, 0], [-1, 3, -1], [0, -1, 2]])


def test_inverse_against_gauss_jordan():
    m = build_capacitance_model(7, 0.1)
    W_ref = gauss_jordan_inverse(capacitance_by_rule(7, 0.1))
    # frozen from the Gauss-Jordan oracle
    assert W_ref[0, 0] == pytest.approx(0.9160797830996261, abs=1e-15)
    assert m.inverse[0, 0] == pytest.approx(W_ref[0, 0], abs=1e-13)
    np.testing.assert_allclose(m.inverse, W_ref, atol=1e-13)


def test_single_island():
    m = build_capacitance_model(1, 3.0)
    assert m.matrix.tolist() == [[1.0]]


@pytest.mark.parametrize("L,c", [(0, 0.1), (-2, 0.1), (3, -0.1), (3, math.nan), (3, math.inf)])
def test_rejects_bad_input(L, c):
    with pytest.raises(ValueError):
        build_capacitance_model(L, c)


@pytest.mark.parametrize("L", [1, 2, 3, 7, 16, 33, 64])
@pytest.mark.parametrize("c", [0.0, 0.01, 0.1, 1.0, 10.0])
def test_matrix_invariants(L, c):
    m = build_capacitance_model(L, c)
    M, W = m.matrix, m.inverse
    assert np.array_equal(M, M.T)
    np.testing.assert_array_equal(M, capacitance_by_rule(L, c))
    assert np.linalg.eigvalsh(M)[0] > 0
    assert np.abs(W @ M - np.eye(L)).max() <= 1e-12
    assert np.all(W > 0) if c > 0 else np.array_equal(W, np.eye(L))
    # reflection symmetry of the open chain
    np.testing.assert_allclose(W, W[::-1, ::-1].T, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(L=st.integers(2, 40), c=st.floats(1e-3, 50.0))
def test_inverse_decays_with_distance(L, c):
    W = build_capacitance_model(L, c).inverse
    for i in range(L):
        right = W[i, i:]
        left = W[i, : i + 1][::-1]
        assert np.all(np.diff(right) < 0)
        assert np.all(np.diff(left) < 0)


@pytest.mark.parametrize("c,expected", [(100.0, 10.0), (25.0, 5.0)])
def test_range_approaches_sqrt_ratio(c, expected):
    lam = interaction_range(build_capacitance_model(51, c))
    assert lam == pytest.approx(expected, rel=0.2)


def test_range_matches_bulk_relation():
    lam = interaction_range(build_capacitance_model(51, 1.0))
    exact = 1.0 / math.acosh(1.0 + 1.0 / 2.0)
    assert lam == pytest.approx(exact, rel=0.05)


def test_range_rejects_degenerate_cases():
    with pytest.raises(ValueError):
        interaction_range(build_capacitance_model(11, 0.0))
    with pytest.raises(ValueError):
        interaction_range(build_capacitance_model(4, 1.0))
