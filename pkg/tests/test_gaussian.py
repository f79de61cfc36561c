import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teleamp.circuit import BeamSplitter, CircuitIR, Loss, build_borealis_teleamp, compile_schedule, compile_transfer
from teleamp.fock_oracle import attach_loss_ancilla, marginal, prepare_smsv
from teleamp.gaussian import (
    GaussianState,
    apply_loss,
    apply_passive,
    is_vacuum,
    mean_photon_number,
    purity,
    reduce,
    run_schedule,
    squeeze,
    symplectic_eigenvalues,
    to_complex_data,
    uncertainty_min_eigenvalue,
    vacuum,
)
from teleamp.hafnian import pattern_probability, pure_amplitude

R = 1.148


def random_unitary(m, seed):
    rng = np.random.default_rng(seed)
    Q, Rm = np.linalg.qr(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
    return Q * (np.diag(Rm) / np.abs(np.diag(Rm)))


def squeezed(M, rs):
    s = vacuum(M)
    for m, r in enumerate(rs):
        s = squeeze(s, m, r)
    return s


@pytest.mark.parametrize("M", [1, 20])
def test_vacuum(M):
    s = vacuum(M)
    np.testing.assert_array_equal(s.covariance, np.eye(2 * M) / 2)
    assert pattern_probability(to_complex_data(s), [0] * M) == pytest.approx(1.0, abs=1e-12)


def test_vacuum_rejects_zero_modes():
    with pytest.raises(ValueError):
        vacuum(0)


def test_squeeze_zero_is_identity():
    np.testing.assert_array_equal(squeeze(vacuum(2), 1, 0.0).covariance, vacuum(2).covariance)


def test_squeeze_quadratures():
    s = squeeze(vacuum(1), 0, R)
    np.testing.assert_allclose(np.diag(s.covariance), [np.exp(-2 * R) / 2, np.exp(2 * R) / 2])


def test_squeeze_fock_sign_convention():
    data = to_complex_data(squeeze(vacuum(1), 0, R))
    ratio = pure_amplitude(data, [2]) / pure_amplitude(data, [0])
    assert ratio == pytest.approx(-np.tanh(R) / np.sqrt(2), abs=1e-12)
    c = prepare_smsv(R, 0.0, 4).single_mode_coefficients()
    assert ratio == pytest.approx(c[2] / c[0], abs=1e-12)


@pytest.mark.parametrize("phi", [0.0, 0.4, -2.0])
def test_squeeze_probabilities_match_expansion(phi):
    data = to_complex_data(squeeze(vacuum(1), 0, R, phi))
    c = prepare_smsv(R, phi, 12).single_mode_coefficients()
    for k in range(9):
        assert pattern_probability(data, [k]) == pytest.approx(abs(c[k]) ** 2, abs=1e-12)
    assert pure_amplitude(data, [2]) / pure_amplitude(data, [0]) == pytest.approx(c[2] / c[0], abs=1e-12)


def test_squeeze_invalid_mode():
    with pytest.raises(ValueError):
        squeeze(vacuum(2), 2, 0.1)


def test_apply_passive_identity_and_rejection():
    s = squeezed(2, [R, 0.3])
    np.testing.assert_allclose(apply_passive(s, np.eye(2)).covariance, s.covariance)
    with pytest.raises(ValueError):
        apply_passive(s, np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        apply_passive(s, np.eye(3))


def test_symmetric_beamsplitter_makes_tmsv():
    U, _ = compile_transfer(CircuitIR(2, (BeamSplitter(0, 1, 0.5, np.pi / 2),)))
    data = to_complex_data(apply_passive(squeezed(2, [R, R]), U))
    for j in range(5):
        for k in range(5):
            p = pattern_probability(data, [j, k])
            if j != k:
                assert p < 1e-10
            else:
                assert p == pytest.approx(np.tanh(R) ** (2 * k) / np.cosh(R) ** 2, abs=1e-12)
    assert np.abs(data.A[0, 1]) == pytest.approx(np.tanh(R), abs=1e-12)
    assert np.abs(data.A[0, 3]) < 1e-12


def test_complex_data_of_smsv():
    data = to_complex_data(squeeze(vacuum(1), 0, R))
    assert abs(data.A[0, 0]) == pytest.approx(np.tanh(R), abs=1e-12)
    assert abs(data.A[0, 1]) < 1e-12
    np.testing.assert_allclose(data.A, data.A.T, atol=1e-12)
    assert np.abs(np.linalg.eigvals(data.A)).max() < 1


def test_complex_data_of_vacuum():
    data = to_complex_data(vacuum(3))
    np.testing.assert_allclose(data.A, 0, atol=1e-15)
    np.testing.assert_allclose(data.Q, np.eye(6), atol=1e-15)


def test_loss_edge_cases():
    s = squeezed(2, [R, 0.5])
    np.testing.assert_allclose(apply_loss(s, 0, 1.0).covariance, s.covariance)
    gone = apply_loss(s, 0, 0.0)
    assert is_vacuum(gone, [0])
    with pytest.raises(ValueError):
        apply_loss(s, 0, 1.5)


def test_loss_scales_mean_photon_number():
    eta = 0.88**11
    s = apply_loss(squeeze(vacuum(1), 0, R), 0, eta)
    assert mean_photon_number(s, 0) == pytest.approx(eta * np.sinh(R) ** 2, rel=1e-12)


def test_loss_matches_oracle_ancilla():
    eta = 0.88**11
    data = to_complex_data(apply_loss(squeeze(vacuum(1), 0, R), 0, eta))
    # the truncated tail feeds low photon numbers through loss; 100 photons keeps it below 1e-12
    oracle = marginal(attach_loss_ancilla(prepare_smsv(R, 0.0, 100), 0, eta), [0])
    for n in range(9):
        assert pattern_probability(data, [n]) == pytest.approx(oracle.get((n,), 0.0), abs=1e-9)


def test_run_schedule_collapses_without_loss():
    circuit = build_borealis_teleamp(0.2)
    s = squeezed(20, [R, R, R])
    direct = apply_passive(s, compile_transfer(circuit)[0])
    with_unit_losses = circuit.replace(circuit.elements + (Loss(3, 1.0), Loss(7, 1.0)))
    np.testing.assert_allclose(run_schedule(s, compile_schedule(with_unit_losses)).covariance, direct.covariance, atol=1e-12)
    np.testing.assert_array_equal(run_schedule(s, []).covariance, s.covariance)


def test_run_schedule_mismatch():
    with pytest.raises(ValueError):
        run_schedule(vacuum(2), [np.eye(3)])


def test_reduce_and_vacuum_check():
    s = apply_passive(squeezed(3, [R, 0, 0]), random_unitary(3, 1))
    assert not is_vacuum(s, [1])
    r = reduce(squeezed(3, [R, 0.2, 0]), [1, 0])
    assert r.mode_count == 2
    assert r.covariance[0, 0] == pytest.approx(np.exp(-0.4) / 2)


def test_state_validation():
    with pytest.raises(ValueError):
        GaussianState(np.array([[1.0, 0.2], [0.0, 1.0]]))
    assert not GaussianState(np.eye(2) * 0.1).is_physical()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1.5), min_size=3, max_size=3), st.integers(0, 10**6))
def test_passive_preserves_symplectic_eigenvalues(rs, seed):
    s = apply_loss(squeezed(3, rs), 1, 0.7)
    out = apply_passive(s, random_unitary(3, seed))
    np.testing.assert_allclose(symplectic_eigenvalues(out), symplectic_eigenvalues(s), atol=1e-10)
    assert purity(out) == pytest.approx(purity(s), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1.5))
def test_loss_composes(eta1, eta2, r):
    s = squeeze(vacuum(1), 0, r)
    a = apply_loss(apply_loss(s, 0, eta1), 0, eta2)
    b = apply_loss(s, 0, eta1 * eta2)
    np.testing.assert_allclose(a.covariance, b.covariance, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(0, 1.5), min_size=2, max_size=2),
    st.floats(-np.pi, np.pi),
    st.floats(0, 1),
    st.integers(0, 10**6),
)
def test_uncertainty_after_every_operation(rs, phi, eta, seed):
    s = vacuum(2)
    states = []
    for m, r in enumerate(rs):
        s = squeeze(s, m, r, phi)
        states.append(s)
    s = apply_passive(s, random_unitary(2, seed))
    states.append(s)
    s = apply_loss(s, 0, eta)
    states.append(s)
    for st_ in states:
        assert uncertainty_min_eigenvalue(st_) >= -1e-10
