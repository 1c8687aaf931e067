"""Isospectral curves ``t -> e^{tZ} b e^{-tZ}`` and their Finsler lengths.

A tangent vector at a Hermitian base point ``B`` is a Hermitian ``x = [Y, B]``
with ``Y`` anti-Hermitian. Its Finsler norm is the quotient norm of any such
lifting ``Y`` modulo the operators that are diagonal in an eigenbasis of
``B``. All evaluations go through a fresh eigendecomposition of the base
point, so constant speed along a curve is measured, not assumed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .families import DiagonalSeq, OrbitBasePoint
from .linalg import (DEFAULT_TOL, Spectrum, StructureError, Tolerances, as_matrix, commutator,
                     expm_antihermitian, hermitian_eig, is_antihermitian, is_hermitian, operator_norm)
from .minimality import quotient_norm
from .tails import classify_diagonal_tail


class ShiftError(ValueError):
    """The diagonal has no single nonzero limit to shift away."""


@dataclass(frozen=True)
class TangentVector:
    base: OrbitBasePoint
    value: np.ndarray
    lifting: np.ndarray


def _check_separation(lam: np.ndarray, sep_min: float) -> float:
    if len(lam) < 2:
        return np.inf
    sep = float(np.min(np.diff(np.sort(lam))))
    if sep <= 0 or sep < sep_min:
        raise StructureError(f"eigenvalue separation {sep:.3e} below {sep_min:.3e}")
    return sep


def _lift(x: np.ndarray, lam: np.ndarray, tol: float) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    if np.max(np.abs(np.diag(x)), initial=0.0) > tol * scale:
        raise StructureError("tangent vector must have zero diagonal in the eigenbasis of the base")
    gaps = lam[None, :] - lam[:, None]
    np.fill_diagonal(gaps, 1.0)
    Y = x / gaps
    np.fill_diagonal(Y, 0.0)
    return (Y - Y.conj().T) / 2


def lift_tangent(x, b: OrbitBasePoint, tol: Tolerances = DEFAULT_TOL) -> TangentVector:
    """Zero-diagonal lifting ``Y_ij = x_ij / (lambda_j - lambda_i)`` of ``x = [Y, b]``."""
    X = as_matrix(x).astype(complex)
    if X.shape[0] != b.dim:
        raise StructureError(f"dimension mismatch {X.shape[0]} vs base {b.dim}")
    if not is_hermitian(X, tol.alg):
        raise StructureError("tangent vectors at a Hermitian base point are Hermitian")
    _check_separation(np.asarray(b.lambdas), 0.0)
    return TangentVector(b, X, _lift(X, np.asarray(b.lambdas), tol.alg))


def finsler_norm(x: TangentVector, tol: Tolerances = DEFAULT_TOL) -> float:
    return quotient_norm(x.lifting, tol=tol).value


def finsler_norm_at(x, base, tol: Tolerances = DEFAULT_TOL, spectrum: Spectrum | None = None) -> float:
    """Finsler norm of ``x`` at an arbitrary Hermitian base point ``base``."""
    X = as_matrix(x).astype(complex)
    if spectrum is None:
        B = as_matrix(base)
        if not is_hermitian(B, tol.alg):
            raise StructureError("base point must be Hermitian")
        spectrum = hermitian_eig((B + B.conj().T) / 2)
    lam, V = spectrum
    _check_separation(lam, 0.0)
    Xt = V.conj().T @ X @ V
    Xt = (Xt + Xt.conj().T) / 2
    scale = max(1.0, float(np.max(np.abs(Xt), initial=0.0)))
    if np.max(np.abs(np.diag(Xt)), initial=0.0) <= tol.alg * scale * 10:
        np.fill_diagonal(Xt, 0.0)
    return quotient_norm(_lift(Xt, lam, tol.alg), tol=tol).value


# --------------------------------------------------------------------------
# curves


def chebyshev_times(t_min: float, t_max: float, count: int = 65) -> np.ndarray:
    """Chebyshev points of the interval plus its endpoints and ``0`` when inside."""
    k = np.arange(count)
    x = np.cos((2 * k + 1) * np.pi / (2 * count))
    ts = 0.5 * (t_min + t_max) + 0.5 * (t_max - t_min) * x
    extra = [t_min, t_max] + ([0.0] if t_min <= 0 <= t_max else [])
    return np.unique(np.concatenate([ts, extra]))


@dataclass(frozen=True)
class OrbitCurve:
    base: OrbitBasePoint
    generator: np.ndarray
    interval: tuple[float, float]
    times: np.ndarray
    points: np.ndarray
    spectrum: Spectrum

    @property
    def samples(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.times.tolist(), self.points))

    def unitary(self, t: float) -> np.ndarray:
        theta, V = self.spectrum
        return (V * np.exp(1j * t * theta)) @ V.conj().T

    def point(self, t: float) -> np.ndarray:
        U = self.unitary(t)
        P = (U * self.base.lambdas) @ U.conj().T
        return (P + P.conj().T) / 2

    def velocity(self, t: float) -> np.ndarray:
        """``e^{tZ} [Z, b] e^{-tZ}``, the analytic derivative."""
        U = self.unitary(t)
        return U @ commutator(self.generator, self.base.as_operator()) @ U.conj().T

    def speed(self, t: float, tol: Tolerances = DEFAULT_TOL) -> float:
        return finsler_norm_at(self.velocity(t), self.point(t), tol)


def orbit_curve(Z, b: OrbitBasePoint, interval: tuple[float, float], n_samples: int = 65) -> OrbitCurve:
    A = as_matrix(Z).astype(complex)
    if not is_antihermitian(A, 1e-14):
        raise StructureError("curve generator must be anti-Hermitian")
    if A.shape[0] != b.dim:
        raise StructureError(f"dimension mismatch {A.shape[0]} vs base {b.dim}")
    t0, t1 = float(interval[0]), float(interval[1])
    if not t0 <= t1:
        raise ValueError("interval must satisfy t_min <= t_max")
    spec = hermitian_eig((A - A.conj().T) / 2)
    curve = OrbitCurve(b, A, (t0, t1), np.empty(0), np.empty((0, b.dim, b.dim)), spec)
    times = chebyshev_times(t0, t1, n_samples)
    pts = np.stack([curve.point(t) for t in times])
    if t0 <= 0 <= t1:
        pts[np.flatnonzero(times == 0.0)[0]] = b.as_operator()
    return OrbitCurve(b, A, (t0, t1), times, pts, spec)


def gauss_legendre_nodes(a: float, b: float, order: int = 16, panels: int = 4):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def curve_length(c: OrbitCurve, order: int = 16, panels: int = 4,
                 interval: tuple[float, float] | None = None, tol: Tolerances = DEFAULT_TOL) -> float:
    """Composite Gauss-Legendre integral of the Finsler speed."""
    a, b = interval if interval is not None else c.interval
    if a == b:
        return 0.0
    nodes, weights = gauss_legendre_nodes(a, b, order, panels)
    return float(sum(w * c.speed(t, tol) for t, w in zip(nodes, weights)))


def constant_speed_profile(c: OrbitCurve, tol: Tolerances = DEFAULT_TOL) -> list[tuple[float, float]]:
    return [(float(t), c.speed(float(t), tol)) for t in c.times]


def isospectral_deviation(c: OrbitCurve) -> float:
    ref = np.sort(np.asarray(c.base.lambdas))
    return max(float(np.max(np.abs(np.linalg.eigvalsh(P) - ref))) for P in c.points)


def phase_equivalence_check(Z, shift: complex, b: OrbitBasePoint, interval: tuple[float, float],
                            n_samples: int = 65) -> float:
    """Largest ``||e^{t(Z+sI)} b e^{-t(Z+sI)} - e^{tZ} b e^{-tZ}||`` over the sample grid."""
    if abs(np.real(shift)) > 0:
        raise ValueError("shift must be purely imaginary")
    if shift == 0:
        return 0.0
    A = as_matrix(Z).astype(complex)
    shifted = A + shift * np.eye(A.shape[0])
    B = b.as_operator()
    worst = 0.0
    for t in chebyshev_times(*interval, n_samples):
        U = expm_antihermitian(A, t)
        W = expm_antihermitian(shifted, t)
        diff = W @ B @ W.conj().T - U @ B @ U.conj().T
        worst = max(worst, operator_norm((diff + diff.conj().T) / 2))
    return worst


@dataclass(frozen=True)
class ShiftResult:
    """``Z + i Diag(d) - i lim(d) I`` and the norm bookkeeping around it."""

    generator: np.ndarray
    shift: complex
    inflated_norm: float
    quotient_norm: float
    identity_residual: float
    shifted_tail: str


def scalar_shift_to_compact(Z, D1: DiagonalSeq, tol: Tolerances = DEFAULT_TOL) -> ShiftResult:
    """Remove the single nonzero limit of ``D1`` by a scalar shift.

    The shifted diagonal tends to zero, so the new generator is a compact
    proxy, at the price of the norm: ``||Z + D1 - lambda I||`` is compared with
    ``||[Z]|| + |lambda|`` and must exceed ``||[Z]||``.
    """
    cls = classify_diagonal_tail(D1)
    if cls.kind != "single_limit":
        raise ShiftError(
            f"scalar shift needs a diagonal with a single nonzero limit; got {cls.kind}"
            + (f" with limits {cls.limits}" if cls.limits else "")
        )
    lim = cls.limits[0]
    A = as_matrix(Z).astype(complex)
    d = np.asarray(D1.values, dtype=float)
    off = A - np.diag(np.diag(A))
    shifted = off + 1j * np.diag(d - lim)
    q = quotient_norm(off, tol=tol).value
    inflated = operator_norm(shifted)
    tail = classify_diagonal_tail(d - lim).kind
    if not inflated > q:
        raise ShiftError("shifted generator does not exceed the quotient norm")
    return ShiftResult(shifted, -1j * lim, inflated, q, abs(inflated - (q + abs(lim))), tail)
