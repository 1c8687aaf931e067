"""Minimality certificates and quotient norms.

The certificate checks a column-pivot sufficient condition for ``T`` to be a
best diagonal approximant of itself: with ``S = -iT`` real symmetric and a
pivot ``i0``,

1. ``-iT`` is real;
2. ``T[i0, i0] = 0`` and ``T[i0, n] != 0`` for ``n != i0``;
3. ``||c_i0(T)|| >= ||T'||`` where ``T'`` is ``T`` with row and column ``i0``
   zeroed;
4. the pivot column is orthogonal to every other column.

Under these conditions ``||T|| = ||c_i0(T)|| = min_D ||T + D||``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .linalg import (DEFAULT_TOL, SingularSystemError, StructureError, Tolerances, as_matrix,
                     is_antihermitian, operator_norm, pivot_orthogonal_diagonal)
from .oracle import QuotientNormResult, best_diagonal_oracle, hermitian_part
from .seeds import derive_seed

TINY_ENTRY = 1e-13
ENTRY_FLOORS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

CERTIFIED = "certified_minimal"
FAILED = "conditions_fail"
MARGINAL = "numerically_marginal"


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    witness: float
    detail: str = ""


@dataclass(frozen=True)
class MinimalityCertificate:
    pivot_index: int
    conditions: tuple[ConditionResult, ...]
    certified_norm: float
    operator_norm: float
    conclusion_residual: float
    verdict: str
    offending_index: int | None = None
    tiny_entries: tuple[int, ...] = field(default=())

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    def condition(self, name: str) -> ConditionResult:
        return next(c for c in self.conditions if c.name == name)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conditions"] = [asdict(c) for c in self.conditions]
        d["tiny_entries"] = list(self.tiny_entries)
        return d


def _real_part(T: np.ndarray) -> tuple[np.ndarray, float]:
    S = -1j * T
    scale = max(1.0, float(np.max(np.abs(S), initial=0.0)))
    asym = float(np.max(np.abs(S - S.T), initial=0.0))
    imag = float(np.max(np.abs(S.imag), initial=0.0))
    return ((S.real + S.real.T) / 2), max(asym, imag) / scale


def check_theorem_minimality(T, i0: int = 0, tol: Tolerances = DEFAULT_TOL) -> MinimalityCertificate:
    """Evaluate the four pivot conditions for ``T`` at 0-based pivot ``i0``.

    Off-pivot entries smaller than ``1e-13 ||T||`` (but nonzero) are recorded
    in ``tiny_entries``: the orthogonality and margin checks are then
    ill-conditioned, so the verdict falls back on the numerical conclusion
    ``||T|| = ||c_i0(T)||`` and is ``numerically_marginal`` if it misses.
    """
    A = as_matrix(T).astype(complex)
    n = A.shape[0]
    if not 0 <= i0 < n:
        raise IndexError(f"pivot {i0} out of range for dimension {n}")
    norm = operator_norm(A)
    S, realness = _real_part(A)
    conds = [ConditionResult("real_after_factoring_i", realness <= tol.min, realness)]

    s = S[:, i0].copy()
    others = np.arange(n) != i0
    zero = np.flatnonzero((s == 0) & others)
    tiny = np.flatnonzero((np.abs(s) < TINY_ENTRY * norm) & (s != 0) & others)
    diag0 = abs(S[i0, i0])
    offending = int(zero[0]) if len(zero) else None
    detail = f"zero pivot-row entry at index {offending}" if offending is not None else ""
    conds.append(ConditionResult("pivot_diagonal_zero_and_row_nonzero",
                                 diag0 <= tol.min and offending is None, diag0, detail))

    c = float(np.linalg.norm(s))
    rest = S.copy()
    rest[i0, :] = 0.0
    rest[:, i0] = 0.0
    margin = c - operator_norm(rest)
    conds.append(ConditionResult("column_dominates_complement", margin >= -tol.min, margin))

    if c > 0 and norm > 0:
        inner = s @ S
        inner[i0] = 0.0
        orth = float(np.max(np.abs(inner))) / (c * norm)
    else:
        orth = np.inf if n > 1 else 0.0
    conds.append(ConditionResult("pivot_column_orthogonal", orth <= tol.min, orth))

    resid = abs(norm - c)
    if not all(x.passed for x in conds):
        verdict = FAILED
    elif resid <= tol.min:
        verdict = CERTIFIED
    else:
        verdict = MARGINAL
    return MinimalityCertificate(i0, tuple(conds), c, norm, resid, verdict, offending,
                                 tuple(int(t) for t in tiny))


# --------------------------------------------------------------------------
# quotient norm


def _certify_block(H: np.ndarray, tol: Tolerances):
    """Try each pivot of a connected Hermitian block; return (value, d) or None."""
    m = H.shape[0]
    order = np.argsort(-np.linalg.norm(H - np.diag(np.diag(H)), axis=0), kind="stable")
    for p in order:
        row = H[p]
        nz = np.arange(m) != p
        if np.any(row[nz] == 0):
            continue
        # diagonal unitary gauge making the pivot row real positive
        u = np.ones(m, dtype=complex)
        u[nz] = np.conj(row[nz]) / np.abs(row[nz])
        G = (u.conj()[:, None] * H) * u[None, :]
        if np.max(np.abs(G.imag), initial=0.0) > tol.alg * max(1.0, np.max(np.abs(G))):
            continue
        R = (G.real + G.real.T) / 2
        try:
            t = pivot_orthogonal_diagonal(R, p)
        except SingularSystemError:
            continue
        off = R - np.diag(np.diag(R))
        cert = check_theorem_minimality(1j * (off + np.diag(t)), int(p), tol)
        if cert.certified:
            return cert.certified_norm, t - np.real(np.diag(H))
    return None


def quotient_norm(Y, diagonal=None, tol: Tolerances = DEFAULT_TOL, budget: int = 2000) -> QuotientNormResult:
    """``inf_d ||Y + i Diag(d)||`` over real diagonals ``d``.

    ``diagonal`` (values of a candidate ``i Diag(d)``) is certified first.
    Otherwise the indices are split into the connected components of the
    graph of entries above ``1e-10 max|Y|`` (retried with coarser floors
    up to ``1e-6`` when a block resists certification); each component's principal
    submatrix is certified through its pivot-orthogonal diagonal, falling
    back to the convex oracle for blocks that admit no certificate. The
    Frobenius mass of the entries between components is reported as
    ``error_bound`` (the quotient norm is 1-Lipschitz, and the value is a
    lower bound since each block is a compression).
    """
    A = as_matrix(Y).astype(complex)
    if not is_antihermitian(A, 1e-12):
        raise StructureError("quotient_norm needs an anti-Hermitian matrix")
    H = hermitian_part(A)
    n = H.shape[0]

    if diagonal is not None:
        d = np.asarray(getattr(diagonal, "values", diagonal), dtype=float)
        if d.shape != (n,):
            raise ValueError(f"diagonal has length {d.shape}, expected {n}")
        T = A + 1j * np.diag(d)
        S = H + np.diag(d)
        for p in range(n):
            if abs(S[p, p]) > tol.min or np.any(S[np.arange(n) != p, p] == 0):
                continue
            cert = check_theorem_minimality(T, p, tol)
            if cert.certified:
                return QuotientNormResult(cert.certified_norm, d, 0, 0.0, cert.certified_norm,
                                          "certificate")

    off = H - np.diag(np.diag(H))
    big = float(np.max(np.abs(off), initial=0.0))
    if big == 0:
        return QuotientNormResult(0.0, -np.real(np.diag(H)), 0, 0.0, 0.0, "diagonal")
    scale = max(big, float(np.max(np.abs(H))))
    # Coarser floors shrink blocks, keeping the pivot solve away from entries
    # so small that rounding noise dominates them.
    for floor in ENTRY_FLOORS:
        blocks, dropped = _blocks(off, floor * scale)
        solved = [(_certify_block(H[np.ix_(idx, idx)], tol), idx) for idx in blocks]
        if all(got is not None for got, _ in solved):
            d = -np.real(np.diag(H)).copy()
            value = 0.0
            for (v, db), idx in solved:
                d[idx] = db
                value = max(value, v)
            return QuotientNormResult(value, d, 0, 0.0, value, "certificate", False, None, dropped)

    blocks, dropped = _blocks(off, ENTRY_FLOORS[0] * scale)
    d = -np.real(np.diag(H)).copy()
    value, lower, iters, methods, marginal = 0.0, 0.0, 0, set(), False
    for idx in blocks:
        block = H[np.ix_(idx, idx)]
        got = _certify_block(block, tol)
        if got is not None:
            v, db = got
            lb = v
            methods.add("certificate")
        else:
            res = best_diagonal_oracle(1j * block, budget=budget, tol=tol)
            v, db, lb = res.value, res.minimizer, res.lower_bound
            iters += res.iterations
            marginal |= res.marginal
            methods.add("oracle")
        d[idx] = db
        value = max(value, v)
        lower = max(lower, lb)
    method = "+".join(sorted(methods))
    return QuotientNormResult(value, d, iters, max(0.0, value - lower), lower, method,
                              marginal, None, dropped)


def _blocks(off: np.ndarray, threshold: float) -> tuple[list[np.ndarray], float]:
    """Non-singleton components of the graph ``|off| >= threshold`` and the
    Frobenius mass of entries joining different components."""
    ncomp, labels = connected_components((np.abs(off) >= threshold).astype(int), directed=False)
    same = labels[:, None] == labels[None, :]
    dropped = float(np.linalg.norm(off[~same]))
    blocks = [np.flatnonzero(labels == c) for c in range(ncomp)]
    return [b for b in blocks if len(b) > 1], dropped


# --------------------------------------------------------------------------
# perturbation audit


@dataclass(frozen=True)
class AuditResult:
    worst: float
    trials: int
    radius: float
    seed: int
    base_norm: float

    def to_dict(self) -> dict:
        return asdict(self)


def _audit_chunk(S: np.ndarray, base: float, count: int, radius: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    n = S.shape[0]
    E = np.zeros((count, n))
    half = count // 2
    E[:half] = rng.uniform(-radius, radius, size=(half, n))
    # single-coordinate perturbations probe each diagonal direction directly
    rows = np.arange(half, count)
    E[rows, rng.integers(0, n, size=count - half)] = rng.uniform(-radius, radius, size=count - half)
    M = S[None] + E[:, :, None] * np.eye(n)[None]
    w = np.linalg.eigvalsh(M)
    norms = np.maximum(np.abs(w[:, 0]), np.abs(w[:, -1]))
    return float(np.min(norms) - base)


def perturbation_audit(T, trials: int = 10_000, radius: float = 0.5, seed: int = 0,
                       chunk: int = 500, workers: int | None = None) -> AuditResult:
    """Smallest ``||T + i Diag(e)|| - ||T||`` over random real ``e``.

    Half the trials draw ``e`` uniformly from ``[-radius, radius]^N``, the
    other half move a single random coordinate. Chunk ``k`` uses the seed
    ``derive_seed(seed, "perturbation_audit", k)`` so results do not depend
    on the worker count.
    """
    A = as_matrix(T).astype(complex)
    if not is_antihermitian(A, 1e-12):
        raise StructureError("perturbation_audit needs an anti-Hermitian matrix")
    S = hermitian_part(A)
    base = operator_norm(A)
    sizes = [min(chunk, trials - k) for k in range(0, trials, chunk)]
    seeds = [derive_seed(seed, "perturbation_audit", k) for k in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        worst = list(ex.map(lambda a: _audit_chunk(S, base, a[0], radius, a[1]), zip(sizes, seeds)))
    return AuditResult(min(worst) if worst else 0.0, trials, radius, seed, base)
