"""Dense complex linear algebra for small quantum systems (dim <= ~64).

Conventions: matrices are numpy complex arrays in row-major order, the
first tensor factor is the high-order index block, and all logarithms
are base 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import tolerances as tol

LOG2 = np.log(2.0)


def as_complex_matrix(entries) -> np.ndarray:
    """Coerce input to a 2-D complex array, rejecting NaN/Inf entries."""
    m = np.asarray(entries, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got array of ndim {m.ndim}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix entries must be finite")
    return m


def is_hermitian(m: np.ndarray, atol: float = tol.HERMITICITY) -> bool:
    return m.shape[0] == m.shape[1] and np.abs(m - m.conj().T).max() <= atol


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix with a declared tensor factorization."""

    matrix: np.ndarray
    subsystem_dims: tuple[int, ...]

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        dims = tuple(int(d) for d in self.subsystem_dims)
        object.__setattr__(self, "subsystem_dims", dims)
        dim = int(np.prod(dims)) if dims else 1
        if m.shape != (dim, dim):
            raise ValueError(f"matrix shape {m.shape} does not match subsystem dims {dims}")
        if not is_hermitian(m):
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(m).real - 1.0) > tol.TRACE:
            raise ValueError(f"trace {np.trace(m).real} is not 1")
        if np.linalg.eigvalsh(m).min() < -tol.PSD:
            raise ValueError("density matrix has a negative eigenvalue")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @staticmethod
    def from_pure(vector: Sequence[complex], subsystem_dims=None) -> "DensityMatrix":
        v = np.asarray(vector, dtype=np.complex128).reshape(-1)
        v = v / np.linalg.norm(v)
        dims = (len(v),) if subsystem_dims is None else tuple(subsystem_dims)
        return DensityMatrix(np.outer(v, v.conj()), dims)

    @staticmethod
    def scalar() -> "DensityMatrix":
        return DensityMatrix(np.array([[1.0 + 0j]]), ())

    @staticmethod
    def maximally_mixed(dim: int) -> "DensityMatrix":
        return DensityMatrix(np.eye(dim, dtype=np.complex128) / dim, (dim,))


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray   # real, descending
    eigenvectors: np.ndarray  # orthonormal columns, matching order


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the first argument as the high-order factor."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def tensor_states(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(tensor_product(a.matrix, b.matrix), a.subsystem_dims + b.subsystem_dims)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the listed subsystems; keep=() yields the scalar [1]."""
    dims = rho.subsystem_dims
    keep = sorted(set(int(k) for k in keep))
    for k in keep:
        if not 0 <= k < len(dims):
            raise IndexError(f"subsystem index {k} out of range for {len(dims)} factors")
    return DensityMatrix(partial_trace_matrix(rho.matrix, dims, keep), tuple(dims[k] for k in keep))


def partial_trace_matrix(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace over the factors not in `keep`, on a raw matrix."""
    n = len(dims)
    keep = list(keep)
    if not keep:
        return np.array([[np.trace(m)]], dtype=np.complex128)
    t = m.reshape(tuple(dims) * 2)
    traced = [i for i in range(n) if i not in keep]
    for offset, i in enumerate(traced):
        axis = i - offset
        t = np.trace(t, axis1=axis, axis2=axis + t.ndim // 2)
    d_keep = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d_keep, d_keep)


def trace_norm(t: np.ndarray) -> float:
    """Sum of singular values of a square matrix."""
    t = as_complex_matrix(t)
    if t.shape[0] != t.shape[1]:
        raise ValueError("trace norm requires a square matrix")
    return float(np.linalg.svd(t, compute_uv=False).sum())


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return trace_norm(np.asarray(a) - np.asarray(b))


def hermitian_eig(h: np.ndarray) -> EigenDecomposition:
    """Spectral decomposition with a deterministic ordering.

    Eigenvalues come out descending; each eigenvector is phase-normalized
    so that its first component of non-negligible magnitude is positive
    real.
    """
    h = as_complex_matrix(h)
    if not is_hermitian(h):
        raise ValueError("input is not Hermitian within tolerance")
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    for j in range(v.shape[1]):
        col = v[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-8)
        if idx.size:
            pivot = col[idx[0]]
            v[:, j] = col * (pivot.conj() / abs(pivot))
    return EigenDecomposition(w, v)


def von_neumann_entropy(rho: DensityMatrix | np.ndarray) -> float:
    """-sum lambda log2 lambda, with 0 log 0 := 0. Result in bits."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else as_complex_matrix(rho)
    w = np.linalg.eigvalsh(m)
    w = w[w > tol.SUPPORT]
    return float(-(w * np.log2(w)).sum()) if w.size else 0.0


def quantum_relative_entropy(psi: DensityMatrix | np.ndarray, phi: DensityMatrix | np.ndarray) -> float:
    """D(psi||phi) in bits; +inf when supp(psi) is not contained in supp(phi)."""
    a = psi.matrix if isinstance(psi, DensityMatrix) else as_complex_matrix(psi)
    b = phi.matrix if isinstance(phi, DensityMatrix) else as_complex_matrix(phi)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    mu, u = np.linalg.eigh(b)
    weights = np.einsum("ij,jk,ki->i", u.conj().T, a, u).real
    outside = mu <= tol.SUPPORT
    if weights[outside].sum() > tol.SUPPORT:
        return float("inf")
    lam = np.linalg.eigvalsh(a)
    lam = lam[lam > tol.SUPPORT]
    term_psi = float((lam * np.log2(lam)).sum()) if lam.size else 0.0
    inside = ~outside
    term_phi = float((weights[inside] * np.log2(mu[inside])).sum())
    return term_psi - term_phi
