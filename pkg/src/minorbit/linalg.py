"""Dense complex matrix kernel.

Every operator in the package is a finite ``N x N`` numpy array standing for
the truncation ``P_N T P_N`` of a bounded operator. Structure (Hermitian,
anti-Hermitian, unitary) is checked by predicates rather than carried in a
wrapper type; :class:`minorbit.exchange.DenseOperator` attaches a structure
flag at the file boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "StructureError",
    "Spectrum",
    "as_matrix",
    "is_hermitian",
    "is_antihermitian",
    "is_unitary",
    "is_diagonal",
    "structure_flag",
    "operator_norm",
    "hermitian_eig",
    "expm_antihermitian",
    "commutator",
    "column_norm",
    "SingularSystemError",
    "pivot_orthogonal_diagonal",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared across modules.

    ``alg`` is for algebraic identities in double precision, ``min`` for
    minimality-certificate residuals, ``oracle`` for agreement of the
    nonsmooth optimizer and ``quad`` for curve lengths.
    """

    alg: float = 1e-10
    min: float = 1e-9
    oracle: float = 1e-6
    quad: float = 1e-8

    def __post_init__(self):
        for name in ("alg", "min", "oracle", "quad"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name!r} must be positive")


DEFAULT_TOL = Tolerances()


class StructureError(ValueError):
    """Input matrix lacks the structure an operation requires."""


class Spectrum(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(M) -> np.ndarray:
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructureError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _scale(A: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0


def is_hermitian(M, tol: float = 0.0) -> bool:
    A = as_matrix(M)
    return bool(np.max(np.abs(A - A.conj().T), initial=0.0) <= tol * _scale(A))


def is_antihermitian(M, tol: float = 0.0) -> bool:
    A = as_matrix(M)
    return bool(np.max(np.abs(A + A.conj().T), initial=0.0) <= tol * _scale(A))


def is_diagonal(M, tol: float = 0.0) -> bool:
    A = as_matrix(M)
    off = A - np.diag(np.diag(A))
    return bool(np.max(np.abs(off), initial=0.0) <= tol * _scale(A))


def is_unitary(M, tol: float = DEFAULT_TOL.alg) -> bool:
    A = as_matrix(M)
    eye = np.eye(A.shape[0])
    return bool(np.linalg.norm(A @ A.conj().T - eye, 2) <= tol)


def structure_flag(M, tol: float = 0.0) -> str:
    """Return the most specific of ``diagonal``, ``anti_hermitian``,
    ``hermitian``, ``unitary`` or ``general``."""
    if is_diagonal(M, tol):
        return "diagonal"
    if is_antihermitian(M, tol):
        return "anti_hermitian"
    if is_hermitian(M, tol):
        return "hermitian"
    if is_unitary(M, max(tol, DEFAULT_TOL.alg)):
        return "unitary"
    return "general"


def operator_norm(M) -> float:
    """Largest singular value of ``M``.

    Normal inputs (Hermitian or anti-Hermitian) go through ``eigvalsh`` so
    the result is exactly ``max |eigenvalue|``.
    """
    A = as_matrix(M)
    if A.size == 0:
        return 0.0
    if is_hermitian(A):
        w = np.linalg.eigvalsh(A)
        return float(max(abs(w[0]), abs(w[-1])))
    if is_antihermitian(A):
        w = np.linalg.eigvalsh(-1j * A)
        return float(max(abs(w[0]), abs(w[-1])))
    return float(np.linalg.norm(A, 2))


def _fix_phases(V: np.ndarray) -> np.ndarray:
    # first component above noise made real positive, column by column
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        z = col[idx[0]]
        V[:, k] = col * (abs(z) / z)
    return V


def hermitian_eig(M) -> Spectrum:
    """Ascending eigenvalues and phase-fixed unitary eigenvectors.

    Anti-Hermitian input is diagonalized through ``-i M``; in that case the
    returned eigenvalues are the real numbers ``theta`` with ``M v = i theta v``.
    """
    A = as_matrix(M)
    if is_hermitian(A):
        H = A
    elif is_antihermitian(A):
        H = -1j * A
    else:
        raise StructureError("hermitian_eig needs a Hermitian or anti-Hermitian matrix")
    w, V = np.linalg.eigh(H)
    if np.iscomplexobj(V):
        V = _fix_phases(V)
    else:
        V = V * np.where(_first_sign(V) < 0, -1.0, 1.0)
    return Spectrum(w, V)


def _first_sign(V: np.ndarray) -> np.ndarray:
    signs = np.empty(V.shape[1])
    for k in range(V.shape[1]):
        col = V[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        signs[k] = np.sign(col[idx[0]])
    return signs


def expm_antihermitian(Z, t: float = 1.0) -> np.ndarray:
    """``exp(t Z)`` for anti-Hermitian ``Z`` via its spectral decomposition."""
    A = as_matrix(Z)
    if not is_antihermitian(A, 1e-14):
        raise StructureError("expm_antihermitian needs an anti-Hermitian matrix")
    theta, V = hermitian_eig((A - A.conj().T) / 2)
    return (V * np.exp(1j * t * theta)) @ V.conj().T


def commutator(A, B) -> np.ndarray:
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape != B.shape:
        raise StructureError(f"dimension mismatch {A.shape} vs {B.shape}")
    return A @ B - B @ A


def column_norm(M, j: int) -> float:
    """Euclidean norm of column ``j`` (0-based)."""
    A = as_matrix(M)
    if not 0 <= j < A.shape[1]:
        raise IndexError(f"column {j} out of range for dimension {A.shape[1]}")
    return float(np.linalg.norm(A[:, j]))


class SingularSystemError(RuntimeError):
    """The pivot orthogonality system has a zero pivot entry."""


def pivot_orthogonal_diagonal(S, pivot: int = 0) -> np.ndarray:
    """Diagonal that makes column ``pivot`` orthogonal to all other columns.

    ``S`` is real symmetric; its own diagonal is ignored. Returns the real
    vector ``t`` with ``t[pivot] = 0`` such that ``S_off + diag(t)`` has
    ``<c_pivot, c_n> = 0`` for every ``n != pivot``. The unknown ``t_n`` only
    enters the ``n``-th equation (through the entry ``S[n, pivot]``), so the
    system is diagonal and each value is solved for directly.
    """
    A = np.asarray(S)
    if np.iscomplexobj(A):
        if np.max(np.abs(A.imag), initial=0.0) > 0:
            raise StructureError("pivot solve needs a real matrix")
        A = A.real
    A = as_matrix(A).astype(float)
    off = A - np.diag(np.diag(A))
    s = off[:, pivot]
    others = np.arange(A.shape[0]) != pivot
    if np.any(s[others] == 0):
        bad = int(np.flatnonzero((s == 0) & others)[0])
        raise SingularSystemError(f"zero pivot entry at index {bad}")
    t = np.zeros(A.shape[0])
    t[others] = -(s @ off)[others] / s[others]
    return t
