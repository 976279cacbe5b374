import numpy as np
import pytest
from scipy.linalg import expm

from cdqaoa import (
    DenseOperator,
    NumericalError,
    OperatorError,
    SpinInstance,
    build_mixer,
    build_target,
    cd_generator,
    commutator,
    generate_instance,
    second_order_generators,
)
from cdqaoa.operators import (
    ANTI_HERMITIAN,
    DIAGONAL_REAL,
    HERMITIAN,
    UNITARY,
    eigh_checked,
    operators_for,
    restrict_to_sector,
    unitary_from_hermitian,
)

from oracles import X, Y, Z, cd_expansion, mixer_dense, mixer_paulis, pauli_commutator, target_dense, target_paulis


def test_mixer_one_spin_is_pauli_x():
    assert np.array_equal(build_mixer(1).matrix, X)


def test_mixer_row_sums():
    assert np.all(build_mixer(2).matrix.real.sum(axis=1) == 2)


def test_mixer_spectrum_is_binomial():
    w = np.round(np.linalg.eigvalsh(build_mixer(5).matrix)).astype(int)
    values, counts = np.unique(w, return_counts=True)
    assert values.tolist() == [-5, -3, -1, 1, 3, 5]
    assert counts.tolist() == [1, 5, 10, 10, 5, 1]


def test_mixer_matches_kron_construction():
    assert np.array_equal(build_mixer(4).matrix, mixer_dense(4))


def test_target_two_spins():
    t = build_target(SpinInstance(2, (1.0,)))
    assert t.tag == DIAGONAL_REAL
    assert np.array_equal(np.diag(t.matrix).real, [1, -1, -1, 1])


def test_target_zero_and_traceless():
    assert not np.any(build_target(SpinInstance(3, (0.0,) * 3)).matrix)
    for seed in range(5):
        inst = generate_instance(5, seed)
        t = build_target(inst)
        assert abs(np.trace(t.matrix)) < 1e-12
        assert np.allclose(t.matrix, target_dense(5, inst.couplings), atol=1e-14)


def test_tags_are_verified():
    with pytest.raises(OperatorError):
        DenseOperator(np.array([[0, 1], [0, 0]]), HERMITIAN)
    with pytest.raises(OperatorError):
        DenseOperator(np.eye(2), ANTI_HERMITIAN)
    with pytest.raises(OperatorError):
        DenseOperator(2 * np.eye(2), UNITARY)
    with pytest.raises(OperatorError):
        DenseOperator(np.eye(2), "symmetric")
    with pytest.raises(OperatorError):
        DenseOperator(np.ones((2, 3)), HERMITIAN)


def test_operator_is_immutable_and_serializes():
    op = build_mixer(2)
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 1
    back = DenseOperator.from_json(op.to_json())
    assert back.tag == op.tag and np.array_equal(back.matrix, op.matrix)


def test_commutator_with_itself_vanishes():
    h = build_mixer(3)
    c = commutator(h, h)
    assert c.tag == ANTI_HERMITIAN and not np.any(c.matrix)


def test_commutator_tags_and_errors():
    inst = generate_instance(3, 1)
    a = commutator(build_mixer(3), build_target(inst))
    assert a.tag == ANTI_HERMITIAN
    assert commutator(build_mixer(3), a).tag == HERMITIAN
    assert commutator(a, a).tag == ANTI_HERMITIAN
    with pytest.raises(OperatorError):
        commutator(build_mixer(2), build_mixer(3))
    u = unitary_from_hermitian(build_mixer(3), 0.2)
    with pytest.raises(OperatorError):
        commutator(u, build_mixer(3))


def test_cd_generator_two_spins():
    a, m = cd_generator(SpinInstance(2, (1.0,)))
    yz_zy = np.kron(Y, Z) + np.kron(Z, Y)
    assert np.allclose(a.matrix, -2j * yz_zy, atol=1e-15)
    # A = iM
    assert np.allclose(m.matrix, -2 * yz_zy, atol=1e-15)
    assert np.allclose(a.matrix, 1j * m.matrix, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_cd_generator_pauli_expansion(seed):
    inst = generate_instance(4, seed)
    a, m = cd_generator(inst)
    ref = cd_expansion(4, inst.couplings).matrix(4)
    assert np.abs(a.matrix - ref).max() <= 1e-12
    assert np.abs(m.matrix - (-1j) * ref).max() <= 1e-12


def test_zero_couplings_give_zero_generators():
    inst = SpinInstance(3, (0.0,) * 3)
    a, _ = cd_generator(inst)
    k1, k2 = second_order_generators(inst)
    assert not np.any(a.matrix) and not np.any(k1.matrix) and not np.any(k2.matrix)


@pytest.mark.parametrize("seed", range(3))
def test_second_order_generators(seed):
    inst = generate_instance(5, seed)
    k1, k2 = second_order_generators(inst)
    for k in (k1, k2):
        assert k.tag == HERMITIAN
        assert np.abs(k.matrix - k.matrix.conj().T).max() <= 1e-12
        assert np.abs(k.matrix.imag).max() == 0
    off = k2.matrix - np.diag(np.diag(k2.matrix))
    assert np.linalg.norm(off) > 1e-3
    hx, ht = mixer_paulis(5), target_paulis(5, inst.couplings)
    a = pauli_commutator(hx, ht)
    assert np.abs(k1.matrix - pauli_commutator(hx, a).matrix(5)).max() <= 1e-12
    assert np.abs(k2.matrix - pauli_commutator(ht, a).matrix(5)).max() <= 1e-12


def test_unitary_from_hermitian():
    h = build_mixer(1)
    assert np.allclose(unitary_from_hermitian(h, 0.0).matrix, np.eye(2))
    u = unitary_from_hermitian(h, 0.3).matrix
    assert np.allclose(u, np.cos(0.3) * np.eye(2) - 1j * np.sin(0.3) * X, atol=1e-15)
    rng = np.random.default_rng(0)
    g = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    m = DenseOperator(g + g.conj().T, HERMITIAN)
    prod = unitary_from_hermitian(m, 0.7).matrix @ unitary_from_hermitian(m, -0.7).matrix
    assert np.abs(prod - np.eye(8)).max() <= 1e-10
    assert np.allclose(unitary_from_hermitian(m, 0.7).matrix, expm(-0.7j * m.matrix), atol=1e-12)
    with pytest.raises(OperatorError):
        unitary_from_hermitian(cd_generator(generate_instance(2, 0))[0], 0.1)


def test_eigh_failure_is_reported():
    with pytest.raises(NumericalError, match="finite=False"):
        eigh_checked(np.full((4, 4), np.nan))


def test_sector_restriction_preserves_spectrum():
    inst = generate_instance(4, 5)
    ops = operators_for(inst)
    full = np.linalg.eigvalsh(ops.k2)
    even = np.linalg.eigvalsh(restrict_to_sector(ops.k2, 1))
    odd = np.linalg.eigvalsh(restrict_to_sector(ops.k2, -1))
    assert np.allclose(np.sort(np.concatenate([even, odd])), full, atol=1e-10)


def test_instance_cache_is_read_only():
    ops = operators_for(generate_instance(4, 1))
    assert ops.sector("k1") is ops.sector("k1")
    with pytest.raises(ValueError):
        ops.cd_eigvecs[0, 0] = 0
    with pytest.raises(KeyError):
        ops.sector("bogus")
