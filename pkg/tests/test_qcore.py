import numpy as np
import pytest
from numpy.testing import assert_allclose

from qec_sense import qcore
from qec_sense.errors import DimensionError, InvariantError, ParameterError


# ------------------------------
# Pauli 串与约定
# ------------------------------
def test_pauli_string_is_kron_with_qubit_one_leftmost():
    op = qcore.pauli_string(3, "XZI")
    expected = np.kron(np.kron(qcore.PAULI_MATRICES["X"], qcore.PAULI_MATRICES["Z"]), np.eye(2))
    assert_allclose(op.matrix, expected)
    assert op.label == "XZI"
    assert op.is_hermitian()


def test_qubit_one_is_most_significant_bit():
    z1 = qcore.single_qubit_op(3, 1, "Z").matrix
    # |100> 对应下标 4
    assert z1[4, 4] == -1
    assert z1[1, 1] == 1


@pytest.mark.parametrize("spec", ["XX", "XXXX", "XQZ"])
def test_pauli_string_rejects_bad_spec(spec):
    with pytest.raises(DimensionError):
        qcore.pauli_string(3, spec)


def test_single_qubit_op_index_range():
    with pytest.raises(ParameterError):
        qcore.single_qubit_op(3, 4, "X")


def test_logical_states_need_odd_n():
    with pytest.raises(ParameterError):
        qcore.logical_states(4)


def test_ramsey_state_coherence_and_logical_x():
    rho = qcore.ramsey_state(3)
    assert rho.matrix[0, 7] == pytest.approx(0.5)
    assert rho.expectation(qcore.logical_x(3)) == pytest.approx(1.0)
    assert rho.n_qubits == 3
    assert rho.is_psd()


# ------------------------------
# 密度矩阵
# ------------------------------
def test_density_matrix_rejects_non_hermitian():
    m = np.array([[0.5, 0.1], [0.0, 0.5]])
    with pytest.raises(InvariantError):
        qcore.DensityMatrix(m)


def test_density_matrix_rejects_wrong_trace():
    with pytest.raises(InvariantError):
        qcore.DensityMatrix(np.eye(2))


def test_density_matrix_rejects_non_power_of_two():
    with pytest.raises(DimensionError):
        qcore.DensityMatrix(np.eye(3) / 3)


def test_random_density_matrix_is_valid(rng):
    rho = qcore.random_density_matrix(8, rng)
    assert rho.min_eigenvalue() > -1e-12
    assert np.trace(rho.matrix).real == pytest.approx(1.0)


# ------------------------------
# 超算符
# ------------------------------
def test_commutator_superop_matches_direct(rng):
    h = qcore.pauli_string(3, "ZIZ").matrix + 0.3 * qcore.pauli_string(3, "XXI").matrix
    rho = qcore.random_density_matrix(8, rng).matrix
    direct = -1j * (h @ rho - rho @ h)
    assert_allclose(qcore.unvec(qcore.commutator_superop(h) @ qcore.vec(rho), 8), direct, atol=1e-12)


def test_dissipator_superop_matches_direct(rng):
    jump = 0.7 * qcore.single_qubit_op(3, 2, "X").matrix
    rho = qcore.random_density_matrix(8, rng).matrix
    assert_allclose(qcore.unvec(qcore.dissipator_superop(jump) @ qcore.vec(rho), 8),
                    qcore.dissipator(jump, rho), atol=1e-12)


def test_dissipator_shape_mismatch():
    with pytest.raises(DimensionError):
        qcore.dissipator(np.eye(2), np.eye(4) / 4)


def test_superoperator_rejects_non_square_size():
    with pytest.raises(DimensionError):
        qcore.Superoperator(np.eye(8))


def test_superoperator_power(rng):
    ch = qcore.mixture_channel([(0.9, np.eye(8)), (0.1, qcore.single_qubit_op(3, 1, "X").matrix)])
    s = ch.superoperator
    rho = qcore.random_density_matrix(8, rng).matrix
    repeated = rho
    for _ in range(5):
        repeated = ch.apply(repeated)
    assert_allclose(s.power(5).apply(rho), repeated, atol=1e-12)
    assert_allclose(s.power(0).matrix, np.eye(64))
    with pytest.raises(ParameterError):
        s.power(-1)


# ------------------------------
# Kraus 信道
# ------------------------------
def test_channel_rejects_non_trace_preserving():
    with pytest.raises(InvariantError):
        qcore.Channel((0.5 * np.eye(2),), "half")


def test_channel_rejects_inconsistent_shapes():
    with pytest.raises(DimensionError):
        qcore.Channel((np.eye(2), np.zeros((4, 4))))


def test_mixture_channel_rejects_negative_weight():
    with pytest.raises(ParameterError):
        qcore.mixture_channel([(1.2, np.eye(2)), (-0.2, qcore.PAULI_MATRICES["X"])])


def test_superoperator_matches_kraus_action(rng):
    ch = qcore.mixture_channel([(0.7, np.eye(8)), (0.2, qcore.single_qubit_op(3, 1, "X").matrix),
                                (0.1, qcore.pauli_string(3, "XXX").matrix)], "N")
    rho = qcore.random_density_matrix(8, rng)
    assert ch.trace_preservation_error() < 1e-12
    assert_allclose(ch.superoperator.apply(rho), ch(rho), atol=1e-12)


def test_compose_channels_order(rng):
    flip = qcore.unitary_channel(qcore.single_qubit_op(3, 1, "X").matrix, "X1")
    phase = qcore.unitary_channel(np.diag(np.exp(1j * np.arange(8))), "P")
    composed = qcore.compose_channels(phase, flip)
    rho = qcore.random_density_matrix(8, rng)
    assert_allclose(composed.apply(rho), phase.apply(flip.apply(rho)), atol=1e-12)
    assert_allclose(composed.superoperator.matrix, (phase.superoperator @ flip.superoperator).matrix, atol=1e-12)


def test_channel_apply_dimension_check():
    with pytest.raises(DimensionError):
        qcore.identity_channel(4).apply(np.eye(8) / 8)


def test_pauli_strings_are_trace_orthogonal():
    labels = ["XXX", "ZZI", "IYZ", "III"]
    ops = [qcore.pauli_string(3, s).matrix for s in labels]
    gram = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops])
    assert_allclose(gram, 8 * np.eye(len(labels)), atol=1e-12)


def test_five_qubit_logical_states():
    zero, one = qcore.logical_states(5)
    assert np.flatnonzero(zero).tolist() == [0]
    assert np.flatnonzero(one).tolist() == [31]


@pytest.mark.parametrize("rho, jump", [
    (np.diag([1.0, 0.0]), qcore.PAULI_MATRICES["X"]),
    (np.eye(2) / 2, qcore.PAULI_MATRICES["Z"]),
])
def test_dissipator_examples(rho, jump):
    out = qcore.dissipator(jump, rho)
    assert abs(np.trace(out)) < 1e-12
    if rho[1, 1] == 0:
        assert_allclose(out, np.diag([-1.0, 1.0]), atol=1e-15)
    else:
        assert_allclose(out, np.zeros((2, 2)), atol=1e-15)


def test_identity_channel_superoperator():
    assert_allclose(qcore.channel_to_superoperator(qcore.identity_channel(4)).matrix, np.eye(16))


def test_channel_matches_superoperator_on_matrix_units():
    ch = qcore.mixture_channel([(0.6, np.eye(8)), (0.4, qcore.single_qubit_op(3, 3, "X").matrix)])
    s = ch.superoperator
    for unit in qcore.matrix_unit_basis(8):
        assert_allclose(s.apply(unit), ch.apply(unit), atol=1e-12)
