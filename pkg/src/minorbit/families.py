"""Explicit operator families at finite truncation.

Two families are built here:

* the main family ``L``, ``Y1``, ``Z_r = r L + Y1 + D_0`` and its finite-range
  approximants ``Y_n + D_n``, driven by ``gamma``;
* the oscillant family ``Z_0``, ``D'_0`` and ``Z_n + D'_n``, driven by
  ``(gamma, delta)``.

Matrices are returned as complex ``N x N`` arrays (anti-Hermitian members are
``1j`` times a real symmetric matrix). Matrix indices are 0-based; the
closed-form helpers (``d_limit``, ``d_kn_closed``, ...) keep the 1-based
entry index ``k`` of the series they evaluate, with index 1 the pivot.

Diagonals are always obtained from the pivot-orthogonality solve; the closed
forms serve as cross-checks and a mismatch raises ``ClosedFormMismatch``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .linalg import operator_norm, pivot_orthogonal_diagonal

CLOSED_FORM_TOL = 1e-10


class ParameterError(ValueError):
    """Family parameters outside the admissible region."""


class ClosedFormMismatch(RuntimeError):
    """Orthogonality solve and closed form disagree (internal error)."""


@dataclass(frozen=True)
class FamilyParams:
    gamma: float = 0.5
    delta: float | None = None
    r: float | str = "auto"
    n: int | None = None
    N: int = 64
    n_max: int = 48

    def __post_init__(self):
        if not (isinstance(self.N, int) and self.N >= 2):
            raise ParameterError(f"truncation N must be an integer >= 2, got {self.N}")
        if self.n is not None and not 2 <= self.n <= self.N:
            raise ParameterError(f"rank n must satisfy 2 <= n <= N={self.N}, got {self.n}")
        if not 2 <= self.n_max:
            raise ParameterError("n_max must be >= 2")
        if self.r != "auto" and not (isinstance(self.r, (int, float)) and self.r > 0):
            raise ParameterError(f"r must be positive or 'auto', got {self.r!r}")

    def with_(self, **changes) -> "FamilyParams":
        return replace(self, **changes)

    @property
    def sup_rank(self) -> int:
        """Largest rank entering the sup defining ``M_0``/``M_1``."""
        return min(self.n_max, self.N)


def check_gamma(gamma: float) -> None:
    if not 0 < gamma < 1:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")


def _leq(a: float, b: float) -> bool:
    return a <= b or math.isclose(a, b, rel_tol=1e-12)


def check_oscillant(gamma: float, delta: float | None) -> None:
    check_gamma(gamma)
    if delta is None or not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if not _leq(gamma**2, delta):
        raise ParameterError(
            f"oscillant diagonal needs gamma^2 <= delta for convergence "
            f"(gamma^2={gamma**2:.6g} > delta={delta:.6g})"
        )
    if not _leq(delta**2, gamma):
        raise ParameterError(
            f"oscillant diagonal needs delta^2 <= gamma for convergence "
            f"(delta^2={delta**2:.6g} > gamma={gamma:.6g})"
        )


# --------------------------------------------------------------------------
# diagonal sequences


@dataclass(frozen=True)
class Tail:
    """Analytic description of a diagonal's behaviour past the truncation.

    ``bound`` ``(C, q)`` means ``|values[k] - limit| <= C q^k`` along each
    limit's subsequence (``k`` counted within the subsequence, 1-based).
    """

    kind: str
    support: int | None = None
    limits: tuple[float, ...] = ()
    bound: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "support": self.support,
            "limits": list(self.limits),
            "bound": list(self.bound) if self.bound else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tail":
        bound = d.get("bound")
        return cls(d["kind"], d.get("support"), tuple(d.get("limits", ())),
                   tuple(bound) if bound else None)


@dataclass(frozen=True)
class DiagonalSeq:
    """Purely imaginary diagonal ``i * Diag(values)``."""

    values: np.ndarray
    tail: Tail

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.tail.kind == "finite_support" and np.any(v[self.tail.support:] != 0):
            raise ValueError("finite_support diagonal has entries past its support")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_operator(self) -> np.ndarray:
        return 1j * np.diag(self.values)


@dataclass(frozen=True)
class OrbitBasePoint:
    lambdas: np.ndarray
    sep_min: float

    @property
    def dim(self) -> int:
        return len(self.lambdas)

    def as_operator(self) -> np.ndarray:
        return np.diag(self.lambdas).astype(complex)


def build_base_point(lambdas: Sequence[float] | None = None, N: int = 64) -> OrbitBasePoint:
    """Diagonal base point ``b``; defaults to ``lambda_i = 1/i``."""
    lam = np.asarray(lambdas if lambdas is not None else 1.0 / np.arange(1, N + 1), dtype=float)
    if lam.ndim != 1 or len(lam) < 1:
        raise ParameterError("base point needs a 1-d sequence of eigenvalues")
    if len(lam) == 1:
        return OrbitBasePoint(lam, math.inf)
    s = np.sort(lam)
    sep = float(np.min(np.diff(s)))
    if sep <= 0:
        raise ParameterError("base point eigenvalues must be pairwise distinct")
    lam.setflags(write=False)
    return OrbitBasePoint(lam, sep)


# --------------------------------------------------------------------------
# main family


def _L_real(gamma: float, N: int) -> np.ndarray:
    L = np.zeros((N, N))
    L[0, 1:] = gamma ** np.arange(1, N)
    L[1:, 0] = L[0, 1:]
    return L


def _Y1_real(gamma: float, N: int) -> np.ndarray:
    # entry (i, j), 1-based 2 <= i < j, is gamma^(j-2)
    j = np.arange(N)
    Y = np.where(j[None, :] > j[:, None], gamma ** (j[None, :] - 1.0), 0.0)
    Y[0, :] = 0.0
    Y = Y + Y.T
    return Y


def build_L(p: FamilyParams) -> np.ndarray:
    check_gamma(p.gamma)
    return 1j * _L_real(p.gamma, p.N)


def build_Y1(p: FamilyParams) -> np.ndarray:
    check_gamma(p.gamma)
    return 1j * _Y1_real(p.gamma, p.N)


def c1_L(gamma: float, n: int | None = None) -> float:
    """Norm of the first column of ``P_n L P_n`` (``n=None``: untruncated)."""
    check_gamma(gamma)
    g2 = gamma * gamma
    if n is None:
        return gamma / math.sqrt(1.0 - g2)
    return gamma * math.sqrt((1.0 - g2 ** (n - 1)) / (1.0 - g2))


def d_limit(gamma: float, j: int) -> float:
    """Entry ``j >= 2`` of the minimal diagonal of ``Y_r``."""
    check_gamma(gamma)
    if j < 2:
        raise ValueError("d_limit is defined for j >= 2")
    return -(1.0 - gamma ** (j - 2)) / (1.0 - gamma) - gamma**j / (1.0 - gamma**2)


def d_kn_closed(gamma: float, k: int, n: int) -> float:
    """Entry ``k`` of the finite-support diagonal ``D_n`` as a closed sum."""
    if k == 1 or k > n:
        return 0.0
    head = sum(gamma**j for j in range(0, k - 2))
    tail = sum(gamma ** (2 * j - k) for j in range(k, n))
    return -head - tail


def _extension(q: float, target: float = 1e-18) -> int:
    return int(math.ceil(math.log(target) / math.log(q)))


def _check_closed(values: np.ndarray, closed: np.ndarray, what: str) -> None:
    err = float(np.max(np.abs(values - closed), initial=0.0))
    if err > CLOSED_FORM_TOL:
        raise ClosedFormMismatch(f"{what}: orthogonality solve differs from closed form by {err:.3e}")


def build_D0(p: FamilyParams) -> DiagonalSeq:
    """Minimal (non-compact) diagonal of ``Y_r`` truncated to ``N`` entries.

    Solved on an extended truncation so the omitted rows contribute below
    1e-18, then cut back to ``N``.
    """
    g = p.gamma
    check_gamma(g)
    M = p.N + 2 * _extension(g)
    S = _L_real(g, M) + _Y1_real(g, M)
    values = pivot_orthogonal_diagonal(S)[: p.N]
    closed = np.array([0.0] + [d_limit(g, j) for j in range(2, p.N + 1)])
    _check_closed(values, closed, "D_0")
    tail = Tail("single_limit", limits=(1.0 / (g - 1.0),),
                bound=(1.0 / (g * g * (1.0 - g)), g))
    return DiagonalSeq(values, tail)


@dataclass(frozen=True)
class SupConstant:
    """``max(sup_n ||P_n X1 P_n + D_n||, ||X1 + D_0||)`` with its pieces.

    ``sequence`` maps ``n`` to the finite-rank norms for ``2 <= n <= n_max``;
    ``limit_norm`` is ``||X1 + D_0||`` at truncation ``N``; ``diagonal_bound``
    is ``sup |d_j|`` over the untruncated diagonal, a lower bound for the
    untruncated ``||X1 + D_0||`` that accounts for the entries past ``N``.
    """

    value: float
    sequence: dict[int, float]
    limit_norm: float
    diagonal_bound: float
    monotone: bool
    argmax: str = field(default="")


def _sup_constant(seq: dict[int, float], limit_norm: float, diag_bound: float) -> SupConstant:
    vals = list(seq.values())
    monotone = all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    candidates = {"sequence": max(vals), "limit_norm": limit_norm, "diagonal_bound": diag_bound}
    arg = max(candidates, key=candidates.get)
    return SupConstant(candidates[arg], seq, limit_norm, diag_bound, monotone, arg)


@lru_cache(maxsize=64)
def _m0_cached(gamma: float, N: int, n_max: int) -> SupConstant:
    Y1 = _Y1_real(gamma, N)
    L = _L_real(gamma, N)
    seq = {}
    for n in range(2, n_max + 1):
        dn = pivot_orthogonal_diagonal(L[:n, :n] + Y1[:n, :n])
        seq[n] = operator_norm(Y1[:n, :n] + np.diag(dn))
    d0 = build_D0(FamilyParams(gamma=gamma, N=N)).values
    limit_norm = operator_norm(Y1 + np.diag(d0))
    return _sup_constant(seq, limit_norm, 1.0 / (1.0 - gamma))


def m0_breakdown(p: FamilyParams) -> SupConstant:
    check_gamma(p.gamma)
    return _m0_cached(float(p.gamma), p.N, p.sup_rank)


def compute_M0(p: FamilyParams) -> float:
    return m0_breakdown(p).value


def resolve_r(p: FamilyParams) -> float:
    """Scalar ``r`` of ``Z_r``; ``"auto"`` gives ``M_0 / ||c_1(L)||``."""
    if p.r == "auto":
        return compute_M0(p) / c1_L(p.gamma)
    bd = m0_breakdown(p)
    lower = max(bd.limit_norm, bd.diagonal_bound) / c1_L(p.gamma)
    if p.r < lower * (1 - 1e-12):
        raise ParameterError(
            f"r={p.r} is below the admissible bound ||Y1 + D_0|| / ||c_1(L)|| = {lower:.12g}"
        )
    return float(p.r)


def build_Yr(p: FamilyParams) -> np.ndarray:
    r = resolve_r(p)
    return 1j * (r * _L_real(p.gamma, p.N) + _Y1_real(p.gamma, p.N))


def build_Zr(p: FamilyParams) -> np.ndarray:
    return build_Yr(p) + build_D0(p).as_operator()


def r_n(p: FamilyParams, n: int) -> float:
    return compute_M0(p) / c1_L(p.gamma, n)


def r_gap(p: FamilyParams, n: int) -> float:
    """``|r - r_n|`` evaluated without cancellation."""
    a = c1_L(p.gamma)
    an = c1_L(p.gamma, n)
    g2 = p.gamma**2
    diff_sq = g2**n / (1.0 - g2)  # a^2 - a_n^2
    return compute_M0(p) * diff_sq / (a * an * (a + an))


def _rank(p: FamilyParams, n: int | None) -> int:
    n = p.n if n is None else n
    if n is None or not 2 <= n <= p.N:
        raise ParameterError(f"rank n must satisfy 2 <= n <= N={p.N}, got {n}")
    return n


def build_Yn_Dn(p: FamilyParams, n: int | None = None) -> tuple[np.ndarray, DiagonalSeq]:
    """Finite-range ``Y_n`` (embedded in ``N x N``) and its minimal ``D_n``."""
    check_gamma(p.gamma)
    n = _rank(p, n)
    g, N = p.gamma, p.N
    S = np.zeros((N, N))
    S[:n, :n] = r_n(p, n) * _L_real(g, n) + _Y1_real(g, n)
    values = np.zeros(N)
    values[:n] = pivot_orthogonal_diagonal(S[:n, :n])
    closed = np.array([d_kn_closed(g, k, n) for k in range(1, N + 1)])
    _check_closed(values, closed, f"D_{n}")
    return 1j * S, DiagonalSeq(values, Tail("finite_support", support=n))


# --------------------------------------------------------------------------
# oscillant family


def oscillant_entry(m: int, gamma: float, delta: float) -> float:
    """Off-diagonal value carried by 1-based index ``m = max(i, j) >= 2``."""
    k, odd = divmod(m, 2)
    return gamma**k if odd else -(delta**k)


def _Z0_real(gamma: float, delta: float, N: int) -> np.ndarray:
    m = np.arange(1, N + 1)
    f = np.where(m % 2 == 1, gamma ** (m // 2), -(delta ** (m // 2)))
    idx = np.maximum.outer(np.arange(N), np.arange(N))
    Z = f[idx]
    np.fill_diagonal(Z, 0.0)
    return Z


def build_Z0(p: FamilyParams) -> np.ndarray:
    check_gamma(p.gamma)
    if p.delta is None or not 0 < p.delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {p.delta}")
    return 1j * _Z0_real(p.gamma, p.delta, p.N)


def _first_row_col(S: np.ndarray) -> np.ndarray:
    E = np.zeros_like(S)
    E[0, :] = S[0, :]
    E[:, 0] = S[:, 0]
    return E


def d0prime_closed(gamma: float, delta: float, l: int) -> float:
    """Entry ``l`` of the oscillant minimal diagonal ``D'_0``."""
    if l == 1:
        return 0.0
    g, de = gamma, delta
    k = (l + 1) // 2
    sde = sum(de**j for j in range(1, k))
    if l % 2 == 0:
        return sde - sum(g**j for j in range(1, k)) + de ** (k + 2) / (1 - de**2) \
            + (g**2 / de) ** k / (1 - g**2)
    return sde - sum(g**j for j in range(1, k - 1)) - g ** (k + 1) / (1 - g**2) \
        - (de**2 / g) ** k * g / (1 - de**2)


def dnprime_closed(gamma: float, delta: float, l: int, n: int) -> float:
    """Entry ``l`` of ``D'_n`` as floor-indexed finite sums.

    Even ``l = 2k``: rows ``2j`` with ``k < j <= n/2`` and rows ``2j + 1`` with
    ``k <= j <= (n-1)/2`` feed the ratio sums. Odd ``l = 2k - 1``: rows ``2j``
    and ``2j + 1`` with ``j >= k``.
    """
    if l == 1 or l > n:
        return 0.0
    g, de = gamma, delta
    k = (l + 1) // 2
    sde = sum(de**j for j in range(1, k))
    if l % 2 == 0:
        even = sum(de ** (2 * j - k) for j in range(k + 1, n // 2 + 1))
        odd = sum(g ** (2 * j) for j in range(k, (n - 1) // 2 + 1)) / de**k
        return sde - sum(g**j for j in range(1, k)) + even + odd
    odd = sum(g ** (2 * j - k + 1) for j in range(k, (n - 1) // 2 + 1))
    even = sum(de ** (2 * j) for j in range(k, n // 2 + 1)) / g ** (k - 1)
    return sde - sum(g**j for j in range(1, k - 1)) - odd - even


def oscillant_limits(gamma: float, delta: float) -> tuple[float, float]:
    """Limits ``(lambda, mu)`` of the even- and odd-indexed entries of ``D'_0``."""
    check_oscillant(gamma, delta)
    base = delta / (1 - delta) - gamma / (1 - gamma)
    lam = base + (1 / (1 - gamma**2) if math.isclose(gamma**2, delta, rel_tol=1e-12) else 0.0)
    mu = base - (gamma / (1 - delta**2) if math.isclose(delta**2, gamma, rel_tol=1e-12) else 0.0)
    return lam, mu


def build_D0prime(p: FamilyParams) -> DiagonalSeq:
    g, de = p.gamma, p.delta
    check_oscillant(g, de)
    M = p.N + 2 * _extension(max(g, de)) + 4
    values = pivot_orthogonal_diagonal(_Z0_real(g, de, M))[: p.N]
    closed = np.array([d0prime_closed(g, de, l) for l in range(1, p.N + 1)])
    _check_closed(values, closed, "D'_0")
    lam, mu = oscillant_limits(g, de)
    q = max(g, de)
    C = 1 / (1 - de) + 1 / (g * (1 - g)) + g / (1 - g**2) + 1 / (1 - de**2)
    if math.isclose(lam, mu, rel_tol=0, abs_tol=1e-15):
        tail = Tail("single_limit", limits=(lam,), bound=(C, q))
    else:
        tail = Tail("two_limits", limits=(lam, mu), bound=(C, q))
    return DiagonalSeq(values, tail)


def c1_Z0(gamma: float, delta: float, n: int | None = None) -> float:
    """Norm of the first column of ``P_n Z_0 P_n`` (``n=None``: untruncated)."""
    if n is None:
        return math.sqrt(delta**2 / (1 - delta**2) + gamma**2 / (1 - gamma**2))
    m = np.arange(2, n + 1)
    f = np.where(m % 2 == 1, gamma ** (m // 2), -(delta ** (m // 2)))
    return float(np.sqrt(np.sum(f * f)))


@lru_cache(maxsize=64)
def _m1_cached(gamma: float, delta: float, N: int, n_max: int) -> SupConstant:
    Z = _Z0_real(gamma, delta, N)
    Z1 = Z - _first_row_col(Z)
    seq = {}
    for n in range(2, n_max + 1):
        dn = pivot_orthogonal_diagonal(Z[:n, :n])
        seq[n] = operator_norm(Z1[:n, :n] + np.diag(dn))
    d0 = build_D0prime(FamilyParams(gamma=gamma, delta=delta, N=N)).values
    limit_norm = operator_norm(Z1 + np.diag(d0))
    lam, mu = oscillant_limits(gamma, delta)
    return _sup_constant(seq, limit_norm, max(abs(lam), abs(mu), float(np.max(np.abs(d0)))))


def m1_breakdown(p: FamilyParams) -> SupConstant:
    check_oscillant(p.gamma, p.delta)
    return _m1_cached(float(p.gamma), float(p.delta), p.N, p.sup_rank)


def compute_M1(p: FamilyParams) -> float:
    return m1_breakdown(p).value


def oscillant_r(p: FamilyParams) -> float:
    return compute_M1(p) / c1_Z0(p.gamma, p.delta)


def oscillant_r_n(p: FamilyParams, n: int) -> float:
    return compute_M1(p) / c1_Z0(p.gamma, p.delta, n)


def build_Znprime_Dnprime(p: FamilyParams, n: int | None = None) -> tuple[np.ndarray, DiagonalSeq]:
    """Finite-range ``Z_n = r_n P_n(Z_0 - Z_0^[1])P_n + P_n Z_0^[1] P_n`` and ``D'_n``."""
    check_oscillant(p.gamma, p.delta)
    n = _rank(p, n)
    g, de, N = p.gamma, p.delta, p.N
    Zb = _Z0_real(g, de, n)
    E = _first_row_col(Zb)
    S = np.zeros((N, N))
    S[:n, :n] = oscillant_r_n(p, n) * E + (Zb - E)
    values = np.zeros(N)
    values[:n] = pivot_orthogonal_diagonal(S[:n, :n])
    closed = np.array([dnprime_closed(g, de, l, n) for l in range(1, N + 1)])
    _check_closed(values, closed, f"D'_{n}")
    return 1j * S, DiagonalSeq(values, Tail("finite_support", support=n))


def build_oscillant_limit(p: FamilyParams) -> np.ndarray:
    """``r(Z_0 - Z_0^[1]) + Z_0^[1] + D'_0 - lambda P^even - mu P^odd`` at truncation ``N``."""
    check_oscillant(p.gamma, p.delta)
    Z = _Z0_real(p.gamma, p.delta, p.N)
    E = _first_row_col(Z)
    lam, mu = oscillant_limits(p.gamma, p.delta)
    d = build_D0prime(p).values - (lam * parity_mask(p.N, even=True) + mu * parity_mask(p.N, even=False))
    return 1j * (oscillant_r(p) * E + (Z - E) + np.diag(d))


# --------------------------------------------------------------------------
# projections


def parity_mask(N: int, even: bool) -> np.ndarray:
    """Indicator of 1-based even (``even=True``) or odd positions."""
    pos = np.arange(1, N + 1)
    return ((pos % 2 == 0) == even).astype(float)


def build_Psigma(sigma: Callable[[int], int], N: int) -> np.ndarray:
    """Projection onto ``span{e_sigma(k)}`` truncated to ``N``.

    ``sigma`` maps 1-based ``k`` to a 1-based basis index; images beyond ``N``
    fall outside the truncation and are dropped.
    """
    seen = {}
    diag = np.zeros(N, dtype=complex)
    for k in range(1, N + 1):
        s = int(sigma(k))
        if s < 1:
            raise ValueError(f"sigma({k}) = {s} is not a basis index")
        if s in seen:
            raise ValueError(f"sigma is not injective: sigma({seen[s]}) = sigma({k}) = {s}")
        seen[s] = k
        if s <= N:
            diag[s - 1] = 1.0
    return np.diag(diag)


def sigma_even(k: int) -> int:
    return 2 * k


def sigma_odd(k: int) -> int:
    return 2 * k - 1
