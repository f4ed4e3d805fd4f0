import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrcmeas import qcore
from qrcmeas.qcore import GateParams

angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)


def random_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def bit(index, qubit, n):
    return (index >> (n - 1 - qubit)) & 1


# --------------------------------------------------------------------------- #
# Tensor products
# --------------------------------------------------------------------------- #


def test_kron_matches_index_formula(rng):
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(4, 2))
    k = qcore.kron(a, b)
    for i, j, p, q in itertools.product(range(2), range(3), range(4), range(2)):
        assert k[i * 4 + p, j * 2 + q] == a[i, j] * b[p, q]


def test_kron_all_is_left_fold(rng):
    ops = [rng.normal(size=(2, 2)) for _ in range(3)]
    np.testing.assert_array_equal(qcore.kron_all(*ops), np.kron(np.kron(ops[0], ops[1]), ops[2]))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_cnot_flips_target_bit_when_control_set(n):
    for c, t in itertools.permutations(range(n), 2):
        gate = qcore.cnot(c, t, n)
        for idx in range(2**n):
            expected = idx ^ (1 << (n - 1 - t)) if bit(idx, c, n) else idx
            col = gate[:, idx]
            assert col[expected] == 1 and np.count_nonzero(col) == 1


def test_embed_adjacent_equals_kron(rng):
    op = rng.normal(size=(4, 4))
    np.testing.assert_allclose(qcore.embed(op, [1, 2], 4), np.kron(np.kron(np.eye(2), op), np.eye(2)))


def test_embed_rejects_bad_qubits():
    with pytest.raises(ValueError):
        qcore.embed(np.eye(4), [0, 0], 3)
    with pytest.raises(ValueError):
        qcore.embed(np.eye(4), [0, 3], 3)
    with pytest.raises(ValueError):
        qcore.embed(np.eye(2), [0, 1], 3)


# --------------------------------------------------------------------------- #
# Gates
# --------------------------------------------------------------------------- #


def test_rotation_hand_values():
    np.testing.assert_allclose(qcore.rx(np.pi), -1j * qcore.X, atol=1e-15)
    np.testing.assert_allclose(qcore.rz(np.pi), -1j * qcore.Z, atol=1e-15)
    np.testing.assert_allclose(qcore.rx(0.0), np.eye(2))


def test_controlled_u_identity_limit():
    np.testing.assert_array_equal(qcore.controlled_u(GateParams.identity()), np.eye(4))


def test_controlled_u_cnot_limit():
    # control is the low bit: |01> <-> |11>
    expected = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]])
    assert np.max(np.abs(qcore.controlled_u(GateParams.cnot()) - expected)) <= 1e-12


def test_controlled_u_intermediate_block():
    # theta = lam = 0.3 pi: cos(0.15 pi), sin(0.15 pi) and exp(0.3 i pi) by hand
    c, s = 0.8910065241883679, 0.45399049973954675
    e = 0.5877852522924731 + 0.8090169943749475j
    g = qcore.controlled_u(GateParams(0.3 * np.pi, 0.0, 0.3 * np.pi, 0.0))
    np.testing.assert_allclose(g[np.ix_([1, 3], [1, 3])], [[c, -e * s], [s, e * c]], atol=1e-15)
    np.testing.assert_array_equal(g[np.ix_([0, 2], [0, 2])], np.eye(2))


def test_coupling_gate_cnot_limit_is_cnot():
    for control, target in [(0, 2), (1, 3), (3, 0)]:
        got = qcore.coupling_gate(GateParams.cnot(), control, target, 4)
        assert np.max(np.abs(got - qcore.cnot(control, target, 4))) <= 1e-12


@pytest.mark.parametrize("strength", [0, 3, 6, 10])
def test_from_strength_mapping(strength):
    p = GateParams.from_strength(strength)
    assert p.theta == p.lam == pytest.approx(strength * np.pi / 10)
    assert p.phi == p.gamma == 0.0


def test_gate_params_reject_nan():
    with pytest.raises(ValueError):
        GateParams(theta=float("nan"))


@settings(max_examples=40, deadline=None)
@given(angles, angles, angles, angles)
def test_controlled_u_is_unitary(theta, phi, lam, gamma):
    assert qcore.is_unitary(qcore.controlled_u(GateParams(theta, phi, lam, gamma)))


@settings(max_examples=40, deadline=None)
@given(angles)
def test_system_unitary_is_unitary(angle):
    assert qcore.is_unitary(qcore.system_unitary(angle))


def test_system_unitary_at_zero_is_identity():
    np.testing.assert_allclose(qcore.system_unitary(0.0), np.eye(4), atol=1e-15)


# --------------------------------------------------------------------------- #
# States and channels
# --------------------------------------------------------------------------- #


def test_partial_trace_matches_index_loops(rng):
    rho = random_density(rng, 16)
    got = qcore.partial_trace_ancilla(rho, 2, 2)
    expected = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            for k in range(4):
                expected[i, j] += rho[i * 4 + k, j * 4 + k]
    np.testing.assert_allclose(got, expected, atol=1e-14)
    assert abs(np.trace(got) - 1) <= 1e-10


def test_partial_trace_shape_mismatch():
    with pytest.raises(ValueError):
        qcore.partial_trace_ancilla(np.eye(8) / 8, 2, 2)


def test_amplitude_damping_hand_values():
    plus = np.full((2, 2), 0.5, dtype=complex)
    out = qcore.amplitude_damping_channel(plus, 0, 0.3)
    expected = [[0.65, 0.4183300132670378], [0.4183300132670378, 0.35]]
    np.testing.assert_allclose(out, expected, atol=1e-15)


@pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 1.0])
def test_amplitude_damping_kraus_complete(p):
    k0, k1 = qcore.amplitude_damping_kraus(p)
    np.testing.assert_allclose(k0.conj().T @ k0 + k1.conj().T @ k1, np.eye(2), atol=1e-15)


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_amplitude_damping_rejects_bad_probability(p):
    with pytest.raises(ValueError):
        qcore.amplitude_damping_kraus(p)


def test_full_damping_sends_to_ground(rng):
    rho = random_density(rng, 4)
    out = qcore.amplitude_damping_channel(rho, 1, 1.0)
    # qubit 1 ends in |0>
    assert abs(out[1, 1]) + abs(out[3, 3]) <= 1e-14


def test_measure_reset_equals_projector_sum(rng):
    rho = random_density(rng, 16)
    expected = np.zeros_like(rho)
    for m in range(4):
        op = np.kron(np.eye(4), np.outer(np.eye(4)[0], np.eye(4)[m]))
        expected += op @ rho @ op.conj().T
    np.testing.assert_allclose(qcore.measure_reset_ancilla(rho, 2, 2), expected, atol=1e-14)


def test_trace_distance_hand_values():
    zero, one = qcore.basis_density(0, 1), qcore.basis_density(1, 1)
    plus = qcore.pure_density(np.array([1, 1]) / np.sqrt(2))
    assert qcore.trace_distance(zero, one) == pytest.approx(1.0)
    assert qcore.trace_distance(zero, plus) == pytest.approx(np.sqrt(0.5))
    assert qcore.trace_distance(plus, plus) == pytest.approx(0.0, abs=1e-15)


def test_expectation_of_z():
    assert qcore.expectation(qcore.basis_density(1, 1), qcore.Z) == -1.0


def test_check_density_matrix_rejects():
    with pytest.raises(ValueError):
        qcore.check_density_matrix(np.eye(4))  # trace 4
    with pytest.raises(ValueError):
        qcore.check_density_matrix(np.array([[0.5, 1.0], [0.0, 0.5]]))  # not Hermitian
    with pytest.raises(ValueError):
        qcore.check_density_matrix(np.diag([1.5, -0.5]), psd=True)


def test_check_pure_state_rejects_unnormalised():
    with pytest.raises(ValueError):
        qcore.check_pure_state(np.array([1.0, 1.0]))


# --------------------------------------------------------------------------- #
# QND
# --------------------------------------------------------------------------- #


@pytest.mark.parametrize("strength", [10, 6, 2])
def test_qnd_commutators_vanish(strength, rng):
    inputs = rng.uniform(0, 0.2, size=3)
    worst = qcore.qnd_commutator_check(inputs, coupling=GateParams.from_strength(strength))
    assert worst <= 1e-10


def test_qnd_same_step_observables_commute(rng):
    assert qcore.qnd_commutator_check(rng.uniform(size=1), steps=[(1, 1)]) <= 1e-12


def test_qnd_rejects_too_many_steps():
    with pytest.raises(ValueError):
        qcore.qnd_commutator_check(np.zeros(5))
