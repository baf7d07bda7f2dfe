import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jjchain import ChainParams, DisorderSpec, build_capacitance_model, build_hamiltonian, sample_disorder
from jjchain.transfer import transfer_amplitude


def test_two_site_clean():
    H = build_hamiltonian(ChainParams(2, 10.0, 0.0, qx=[0, 0], ej_bonds=[1]))
    assert H.H2.tolist() == [[5.0, -0.5], [-0.5, 5.0]]
    assert H.vacuum_energy == 0.0


def test_single_site_gate_charge():
    H = build_hamiltonian(ChainParams(1, 10.0, 0.0, qx=[0.1]))
    assert H.H2 == pytest.approx(np.array([[4.0]]), abs=1e-15)


def test_diagonal_against_direct_formula():
    params = ChainParams(7, 10.0, 0.1)
    H = build_hamiltonian(params)
    W = np.linalg.inv(build_capacitance_model(7, 0.1).matrix)
    expected = 5.0 * np.diag(W)
    # frozen from an independent Gauss-Jordan inverse
    frozen = [4.58039891549813, 4.228268775273857, 4.225788863426919, 4.225771521386031,
              4.225788863426919, 4.228268775273857, 4.580398915498131]
    np.testing.assert_allclose(np.diag(H.H2), expected, atol=1e-13)
    np.testing.assert_allclose(np.diag(H.H2), frozen, atol=1e-13)


def test_structure():
    rng = np.random.default_rng(1)
    p = ChainParams(9, 7.0, 0.3, qx=rng.normal(0, 0.05, 9), ej_bonds=rng.uniform(0.5, 1.5, 8))
    H = build_hamiltonian(p)
    assert H.H2.shape == (9, 9)
    np.testing.assert_allclose(H.H2, H.H2.T, atol=1e-14)
    np.testing.assert_array_equal(np.diag(H.H2, 1), -0.5 * p.ej_bonds)
    assert np.count_nonzero(np.triu(H.H2, 2)) == 0
    W = p.capacitance().inverse
    np.testing.assert_allclose(np.diag(H.H2), 0.5 * p.u0 * (np.diag(W) - 2 * W @ p.qx), atol=1e-13)


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="does not match"):
        build_hamiltonian(ChainParams(5, 10.0, 0.1), build_capacitance_model(4, 0.1))
    with pytest.raises(ValueError):
        build_hamiltonian(ChainParams(5, 10.0, 0.1), build_capacitance_model(5, 0.2))


@pytest.mark.parametrize("kwargs", [
    dict(L=0, u0=1.0), dict(L=3, u0=-1.0), dict(L=3, u0=1.0, c_ratio=-1.0),
    dict(L=3, u0=1.0, ej_bonds=[1.0, 0.0]), dict(L=3, u0=1.0, ej_bonds=[1.0]),
    dict(L=3, u0=1.0, qx=[0.0, np.nan, 0.0]),
])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        ChainParams(**kwargs)


@pytest.mark.parametrize("L", [2, 5, 8])
def test_uniform_chain_reflection_symmetry(L):
    H = build_hamiltonian(ChainParams(L, 10.0, 0.4)).H2
    R = np.eye(L)[::-1]
    np.testing.assert_allclose(R @ H - H @ R, 0, atol=1e-14)
    _, V = np.linalg.eigh(H)
    for v in V.T:
        assert np.allclose(R @ v, v) or np.allclose(R @ v, -v)


@settings(max_examples=30, deadline=None)
@given(delta=st.floats(-0.3, 0.3), t=st.floats(0, 60))
def test_uniform_gate_shift_is_a_global_phase(delta, t):
    base = ChainParams(6, 10.0, 0.0)
    shifted = ChainParams(6, 10.0, 0.0, qx=np.full(6, delta))
    H0, H1 = build_hamiltonian(base), build_hamiltonian(shifted)
    np.testing.assert_allclose(np.diag(H1.H2) - np.diag(H0.H2), -10.0 * delta, atol=1e-12)
    assert abs(transfer_amplitude(H1, t)) == pytest.approx(abs(transfer_amplitude(H0, t)), abs=1e-10)


def test_zero_width_disorder_returns_base():
    base = ChainParams(5, 10.0, 0.1, qx=[0.01, 0, 0, 0, -0.02])
    out = sample_disorder(DisorderSpec(0.0, 0.0, seed=123), base, 7)
    assert out == base


def test_disorder_is_deterministic():
    base = ChainParams(7, 10.0, 0.0)
    spec = DisorderSpec(bond_sigma=0.1, seed=42)
    a, b = sample_disorder(spec, base, 3), sample_disorder(spec, base, 3)
    assert a.ej_bonds.tobytes() == b.ej_bonds.tobytes()
    assert sample_disorder(spec, base, 4).ej_bonds.tobytes() != a.ej_bonds.tobytes()


def test_channels_use_independent_streams():
    base = ChainParams(7, 10.0, 0.0)
    both = sample_disorder(DisorderSpec(0.1, 0.025, seed=5), base, 0)
    bond = sample_disorder(DisorderSpec(0.1, 0.0, seed=5), base, 0)
    charge = sample_disorder(DisorderSpec(0.0, 0.025, seed=5), base, 0)
    np.testing.assert_array_equal(both.ej_bonds, bond.ej_bonds)
    np.testing.assert_array_equal(both.qx, charge.qx)


def test_bond_disorder_statistics():
    base = ChainParams(11, 10.0, 0.0)
    spec = DisorderSpec(bond_sigma=0.1, seed=9)
    ej = np.concatenate([sample_disorder(spec, base, k).ej_bonds for k in range(10_000)])
    assert ej.mean() == pytest.approx(1.0, rel=0.01)
    assert ej.std(ddof=1) == pytest.approx(0.1, rel=0.05)


def test_wide_bond_disorder_stays_positive():
    base = ChainParams(20, 10.0, 0.0)
    spec = DisorderSpec(bond_sigma=1.5, seed=1)
    for k in range(200):
        assert np.all(sample_disorder(spec, base, k).ej_bonds > 0)


def test_invalid_disorder_spec():
    with pytest.raises(ValueError):
        DisorderSpec(bond_sigma=-0.1)
    with pytest.raises(ValueError):
        DisorderSpec(charge_sigma=float("nan"))
