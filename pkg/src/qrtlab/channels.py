"""CPTP maps in Kraus form, plus deterministic operations on label tuples.

KrausChannel carries the matrix machinery (validate, apply, compose,
tensor); DiscreteOperation is its combinatorial counterpart for theories
whose states are classical labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import tolerances as tol
from .linalg import DensityMatrix, as_complex_matrix, tensor_product


@dataclass(frozen=True)
class CptpReport:
    ok: bool
    deviation: float  # trace norm of sum K†K - I


def validate_cptp(kraus: Sequence[np.ndarray], dim_in: int, dim_out: int) -> CptpReport:
    """Check the completeness relation sum K†K = I within tolerance."""
    if not kraus:
        raise ValueError("Kraus family must be non-empty")
    acc = np.zeros((dim_in, dim_in), dtype=np.complex128)
    for k in kraus:
        k = as_complex_matrix(k)
        if k.shape != (dim_out, dim_in):
            raise ValueError(f"Kraus operator has shape {k.shape}, expected {(dim_out, dim_in)}")
        acc += k.conj().T @ k
    dev = float(np.linalg.svd(acc - np.eye(dim_in), compute_uv=False).sum())
    return CptpReport(dev <= tol.CPTP, dev)


@dataclass(frozen=True)
class KrausChannel:
    """CPTP map given by a finite Kraus family of dim_out x dim_in matrices."""

    dim_in: int
    dim_out: int
    kraus: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        ops = tuple(as_complex_matrix(k) for k in self.kraus)
        object.__setattr__(self, "kraus", ops)
        report = validate_cptp(ops, self.dim_in, self.dim_out)
        if not report.ok:
            raise ValueError(f"channel '{self.label}' violates CPTP: deviation {report.deviation:.3e}")

    def apply_matrix(self, m: np.ndarray) -> np.ndarray:
        if m.shape != (self.dim_in, self.dim_in):
            raise ValueError(f"state dim {m.shape[0]} does not match channel input dim {self.dim_in}")
        out = np.zeros((self.dim_out, self.dim_out), dtype=np.complex128)
        for k in self.kraus:
            out += k @ m @ k.conj().T
        return out

    @staticmethod
    def identity(dim: int, label: str = "identity") -> "KrausChannel":
        return KrausChannel(dim, dim, (np.eye(dim, dtype=np.complex128),), label)

    @staticmethod
    def trace(dim: int, label: str = "trace") -> "KrausChannel":
        rows = tuple(np.eye(dim, dtype=np.complex128)[i : i + 1, :] for i in range(dim))
        return KrausChannel(dim, 1, rows, label)

    @staticmethod
    def prepare(state: np.ndarray, label: str = "prepare") -> "KrausChannel":
        """Channel from the scalar system that outputs the given state."""
        state = as_complex_matrix(state)
        w, v = np.linalg.eigh(state)
        ops = tuple(
            np.sqrt(max(float(lam), 0.0)) * v[:, j : j + 1]
            for j, lam in enumerate(w)
            if lam > tol.SUPPORT
        )
        return KrausChannel(1, state.shape[0], ops, label)


def apply(channel: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    """sum K rho K†, revalidated as a DensityMatrix."""
    out = channel.apply_matrix(rho.matrix)
    dims = (channel.dim_out,) if channel.dim_out > 1 else ()
    return DensityMatrix(out, dims)


def simplify(kraus: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
    """Drop numerically negligible Kraus operators to bound growth under composition."""
    kept = tuple(k for k in kraus if np.linalg.norm(k) >= tol.KRAUS_PRUNE)
    return kept if kept else tuple(kraus[:1])


def compose(later: KrausChannel, earlier: KrausChannel) -> KrausChannel:
    """Channel acting as later . earlier."""
    if earlier.dim_out != later.dim_in:
        raise ValueError(
            f"cannot compose: earlier output dim {earlier.dim_out} != later input dim {later.dim_in}"
        )
    ops = simplify(tuple(l @ e for e in earlier.kraus for l in later.kraus))
    return KrausChannel(earlier.dim_in, later.dim_out, ops, f"{later.label}.{earlier.label}")


def tensor(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    ops = tuple(tensor_product(ka, kb) for ka in a.kraus for kb in b.kraus)
    return KrausChannel(
        a.dim_in * b.dim_in, a.dim_out * b.dim_out, ops, f"{a.label}(x){b.label}"
    )


@dataclass(frozen=True)
class DiscreteOperation:
    """Deterministic map from input label tuples to output label tuples.

    The action must be total on every tuple over the theory's alphabet;
    arity_in subsystems are consumed and arity_out produced.
    """

    name: str
    arity_in: int
    arity_out: int
    action: Mapping[tuple[str, ...], tuple[str, ...]]

    def __post_init__(self):
        fixed = {tuple(k): tuple(v) for k, v in self.action.items()}
        for k, v in fixed.items():
            if len(k) != self.arity_in or len(v) != self.arity_out:
                raise ValueError(f"operation '{self.name}' maps {k} -> {v} with wrong arity")
        object.__setattr__(self, "action", fixed)

    def check_total(self, alphabet: Sequence[str]) -> None:
        """Raise unless the action covers every input tuple over the alphabet."""
        from itertools import product

        for combo in product(alphabet, repeat=self.arity_in):
            if combo not in self.action:
                raise ValueError(f"operation '{self.name}' has no action for input {combo}")

    def __call__(self, labels: tuple[str, ...]) -> tuple[str, ...]:
        return self.action[tuple(labels)]
