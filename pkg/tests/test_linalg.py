import math

import numpy as np
import pytest

from qrtlab.linalg import (
    DensityMatrix,
    hermitian_eig,
    partial_trace,
    quantum_relative_entropy,
    tensor_product,
    tensor_states,
    trace_norm,
    von_neumann_entropy,
)

KET0 = DensityMatrix(np.array([[1, 0], [0, 0]], dtype=complex), (2,))
KET1 = DensityMatrix(np.array([[0, 0], [0, 1]], dtype=complex), (2,))
PLUS = DensityMatrix(np.full((2, 2), 0.5, dtype=complex), (2,))
MIXED = DensityMatrix.maximally_mixed(2)


def random_density(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = a @ a.conj().T
    return DensityMatrix(m / np.trace(m).real, (dim,))


def random_hermitian(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def test_tensor_identity():
    assert np.allclose(tensor_product(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_basis_bookkeeping():
    # |0><0| x |1><1| occupies the |01> slot in basis order 00,01,10,11
    out = tensor_product(KET0.matrix, KET1.matrix)
    assert np.allclose(out, np.diag([0, 1, 0, 0]))


def test_tensor_scalar_unit():
    out = tensor_states(PLUS, DensityMatrix.scalar())
    assert np.allclose(out.matrix, PLUS.matrix)
    assert out.subsystem_dims == (2,)


def test_partial_trace_product_state():
    rho = tensor_states(KET0, KET1)
    assert np.allclose(partial_trace(rho, [0]).matrix, KET0.matrix)
    assert np.allclose(partial_trace(rho, [1]).matrix, KET1.matrix)


def test_partial_trace_bell():
    bell = DensityMatrix.from_pure([1, 0, 0, 1], (2, 2))
    assert np.allclose(partial_trace(bell, [1]).matrix, np.eye(2) / 2)


def test_partial_trace_empty_keep_is_full_trace():
    out = partial_trace(PLUS, [])
    assert out.subsystem_dims == ()
    assert np.allclose(out.matrix, [[1.0]])


def test_partial_trace_index_out_of_range():
    with pytest.raises(IndexError):
        partial_trace(PLUS, [1])


def test_partial_trace_undoes_tensor():
    rng = np.random.default_rng(7)
    for _ in range(20):
        rho, sigma = random_density(rng, 3), random_density(rng, 2)
        joint = tensor_states(rho, sigma)
        assert trace_norm(partial_trace(joint, [0]).matrix - rho.matrix) < 1e-10


def test_trace_norm_basics():
    assert trace_norm(np.zeros((3, 3))) == 0.0
    assert trace_norm(KET0.matrix - KET1.matrix) == pytest.approx(2.0, abs=1e-12)
    rng = np.random.default_rng(3)
    for dim in (2, 3, 5):
        assert trace_norm(random_density(rng, dim).matrix) == pytest.approx(1.0, abs=1e-10)


def test_trace_norm_is_a_norm():
    rng = np.random.default_rng(11)
    for _ in range(25):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        c = rng.standard_normal()
        assert trace_norm(c * a) == pytest.approx(abs(c) * trace_norm(a), rel=1e-9)
        assert trace_norm(a + b) <= trace_norm(a) + trace_norm(b) + 1e-9


def test_trace_norm_rejects_non_square():
    with pytest.raises(ValueError):
        trace_norm(np.ones((2, 3)))


def test_hermitian_eig_diagonal():
    w, v = hermitian_eig(np.diag([3.0, 1.0]).astype(complex))
    assert np.allclose(w, [3.0, 1.0])
    assert np.allclose(v, np.eye(2))


def test_hermitian_eig_pauli_x():
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    w, v = hermitian_eig(x)
    assert np.allclose(w, [1.0, -1.0])
    s = 1 / math.sqrt(2)
    assert np.allclose(np.abs(v[:, 0]), [s, s])
    # phase convention: leading component positive real
    assert v[0, 0].real > 0 and abs(v[0, 0].imag) < 1e-12


def test_hermitian_eig_reconstruction():
    rng = np.random.default_rng(5)
    for dim in (2, 3, 8, 17, 64):
        h = random_hermitian(rng, dim)
        w, v = hermitian_eig(h)
        assert trace_norm(v @ np.diag(w) @ v.conj().T - h) < 1e-10
        assert np.abs(v.conj().T @ v - np.eye(dim)).max() < 1e-10


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_entropy_pure_and_mixed():
    assert von_neumann_entropy(KET0) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(MIXED) == pytest.approx(1.0, abs=1e-12)


def test_entropy_scalar_formula_oracle():
    # independent scalar evaluation of -sum p log2 p
    expected = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
    rho = DensityMatrix(np.diag([0.25, 0.75]).astype(complex), (2,))
    assert von_neumann_entropy(rho) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.8112781244591328, abs=1e-12)


def test_relative_entropy_self_is_zero():
    rng = np.random.default_rng(13)
    for dim in (2, 3, 4):
        rho = random_density(rng, dim)
        assert abs(quantum_relative_entropy(rho, rho)) < 1e-10


def test_relative_entropy_commuting_case():
    # D(|0><0| || I/2) equals the classical KL of (1,0) vs (1/2,1/2) = 1 bit
    assert quantum_relative_entropy(KET0, MIXED) == pytest.approx(1.0, abs=1e-12)


def test_relative_entropy_support_violation():
    assert quantum_relative_entropy(PLUS, KET0) == float("inf")


def test_relative_entropy_matches_classical_kl():
    rng = np.random.default_rng(17)
    for _ in range(100):
        dim = int(rng.integers(2, 5))
        p = rng.dirichlet(np.ones(dim))
        q = rng.dirichlet(np.ones(dim)) + 1e-3
        q = q / q.sum()
        kl = float((p * (np.log2(p + 1e-300) - np.log2(q))).sum())
        a = DensityMatrix(np.diag(p).astype(complex), (dim,))
        b = DensityMatrix(np.diag(q).astype(complex), (dim,))
        assert quantum_relative_entropy(a, b) == pytest.approx(kl, abs=1e-9)


def test_relative_entropy_klein_inequality():
    rng = np.random.default_rng(19)
    for _ in range(40):
        a, b = random_density(rng, 3), random_density(rng, 3)
        d = quantum_relative_entropy(a, b)
        assert d >= -1e-10
        if trace_norm(a.matrix - b.matrix) >= 1e-8:
            assert d > 0
    rho = random_density(rng, 3)
    assert abs(quantum_relative_entropy(rho, rho)) < 1e-10


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[1, 1], [0, 0]], dtype=complex), (2,))  # not Hermitian
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2, dtype=complex), (2,))  # trace 2
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]).astype(complex), (2,))  # negative eigenvalue
