"""Numerical minimization of ``d -> ||Y + i Diag(d)||`` over real diagonals.

Works on the Hermitian matrix ``H = -iY`` so the objective is
``f(d) = ||H + Diag(d)||``, a convex nonsmooth function. The main oracle runs
subgradient descent, polishes with a smoothed (log-sum-exp) objective and a
coordinate-wise golden-section pass, and reports a dual lower bound so every
answer carries a gap estimate. ``grid_refine_oracle`` is an independent
brute-force check for small dimensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, nnls
from scipy.special import logsumexp

from .families import DiagonalSeq, Tail
from .linalg import DEFAULT_TOL, StructureError, Tolerances, as_matrix, is_antihermitian

ORACLE_DIM_MAX = 64
SMOOTHING_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)


@dataclass(frozen=True)
class QuotientNormResult:
    """Best value of ``||Y + i Diag(d)||`` found, with its witness.

    ``lower_bound`` is a certified lower bound on the infimum, so
    ``gap_estimate = value - lower_bound`` bounds the suboptimality.
    ``method`` records which route produced the value.
    """

    value: float
    minimizer: np.ndarray
    iterations: int
    gap_estimate: float
    lower_bound: float
    method: str
    marginal: bool = False
    grid_agrees: bool | None = None
    error_bound: float = 0.0

    @property
    def minimizer_diagonal(self) -> DiagonalSeq:
        return DiagonalSeq(self.minimizer, Tail("unclassified"))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "minimizer": [float(x) for x in self.minimizer],
            "iterations": self.iterations,
            "gap_estimate": self.gap_estimate,
            "lower_bound": self.lower_bound,
            "method": self.method,
            "marginal": self.marginal,
            "grid_agrees": self.grid_agrees,
            "error_bound": self.error_bound,
        }


def hermitian_part(Y, tol: float = 1e-12) -> np.ndarray:
    """``H = -iY`` for anti-Hermitian ``Y``, real when possible."""
    A = as_matrix(Y)
    if not is_antihermitian(A, tol):
        raise StructureError("expected an anti-Hermitian matrix")
    H = -1j * A
    H = (H + H.conj().T) / 2
    if np.max(np.abs(H.imag), initial=0.0) == 0:
        return np.ascontiguousarray(H.real)
    return H


def objective(H: np.ndarray, d: np.ndarray) -> float:
    w = np.linalg.eigvalsh(H + np.diag(d))
    return float(max(abs(w[0]), abs(w[-1])))


def subgradient(H: np.ndarray, d: np.ndarray, degeneracy: float = 1e-12) -> tuple[float, np.ndarray]:
    """Value and a subgradient, averaged over the maximizing eigenspace."""
    w, V = np.linalg.eigh(H + np.diag(d))
    top = max(abs(w[0]), abs(w[-1]))
    act = np.abs(w) >= top - degeneracy * max(top, 1.0)
    g = (np.abs(V[:, act]) ** 2) @ np.sign(w[act])
    return float(top), g / np.count_nonzero(act)


def _subgradient_descent(H, d0, budget, a, b):
    d = d0.copy()
    best_f, best_d = math.inf, d.copy()
    for k in range(budget):
        f, g = subgradient(H, d)
        if f < best_f:
            best_f, best_d = f, d.copy()
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        d -= (a / (k + b)) * g / gn
    return best_f, best_d


def _smoothed(H, mu):
    def fg(x):
        w, V = np.linalg.eigh(H + np.diag(x))
        z = np.concatenate([w, -w]) / mu
        lse = logsumexp(z)
        p = np.exp(z - lse)
        weights = p[: len(w)] - p[len(w):]
        return mu * lse, (np.abs(V) ** 2) @ weights
    return fg


def _smoothing_polish(H, d0, schedule=SMOOTHING_SCHEDULE):
    d = d0.copy()
    iters = 0
    for mu in schedule:
        res = minimize(_smoothed(H, mu), d, jac=True, method="L-BFGS-B",
                       options=dict(maxiter=5000, gtol=1e-14, ftol=1e-16, maxcor=30))
        d = res.x
        iters += res.nit
    return d, iters


def _golden_polish(H, d, width, sweeps=2, steps=40):
    invphi = (math.sqrt(5) - 1) / 2
    d = d.copy()
    f = objective(H, d)
    for _ in range(sweeps):
        for i in range(len(d)):
            lo, hi = d[i] - width, d[i] + width
            x1, x2 = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
            e = d.copy()

            def at(x):
                e[i] = x
                return objective(H, e)

            f1, f2 = at(x1), at(x2)
            for _ in range(steps):
                if f1 <= f2:
                    hi, x2, f2 = x2, x1, f1
                    x1 = hi - invphi * (hi - lo)
                    f1 = at(x1)
                else:
                    lo, x1, f1 = x1, x2, f2
                    x2 = lo + invphi * (hi - lo)
                    f2 = at(x2)
            x, fx = (x1, f1) if f1 <= f2 else (x2, f2)
            if fx < f:
                d[i], f = x, fx
        width *= 0.1
    return f, d


def dual_lower_bound(H: np.ndarray, d: np.ndarray, mu: float = 1e-9) -> float:
    """Lower bound on ``inf_d ||H + Diag(d)||`` from a smoothed dual witness.

    With ``W`` the soft-max spectral weights at ``d`` and ``W0`` its
    off-diagonal part, ``Tr(W0 (H + D)) = Tr(W0 H)`` for every diagonal ``D``
    while ``|Tr(W0 X)| <= ||W0||_1 ||X||``.
    """
    w, V = np.linalg.eigh(H + np.diag(d))
    z = np.concatenate([w, -w]) / mu
    p = np.exp(z - logsumexp(z))
    W = (V * (p[: len(w)] - p[len(w):])) @ V.conj().T
    return _off_diagonal_bound(H, W)


def _off_diagonal_bound(H: np.ndarray, W: np.ndarray) -> float:
    W0 = W - np.diag(np.diag(W))
    nuc = float(np.sum(np.abs(np.linalg.eigvalsh(W0))))
    if nuc == 0:
        return 0.0
    return max(0.0, float(np.real(np.trace(W0 @ H))) / nuc)


def active_set_lower_bound(H: np.ndarray, d: np.ndarray, cluster: float = 1e-4) -> float:
    """Dual bound from weights on the near-maximal eigenvectors at ``d``.

    Nonnegative weights on the eigenprojections whose ``|eigenvalue|`` lies
    within ``cluster`` of the top are fitted (NNLS) so that the signed
    combination has a nearly vanishing diagonal.
    """
    w, V = np.linalg.eigh(H + np.diag(d))
    top = max(abs(w[0]), abs(w[-1]))
    act = np.flatnonzero(np.abs(w) >= top * (1 - cluster))
    sgn = np.sign(w[act])
    A = (np.abs(V[:, act]) ** 2) * sgn
    rho = 1e3
    c, _ = nnls(np.vstack([A, rho * np.ones((1, len(act)))]),
                np.concatenate([np.zeros(len(w)), [rho]]))
    if not np.any(c):
        return 0.0
    W = (V[:, act] * (c * sgn)) @ V[:, act].conj().T
    return _off_diagonal_bound(H, W)


def _trivial(H, method):
    d = -np.real(np.diag(H)).astype(float)
    return QuotientNormResult(0.0, d, 0, 0.0, 0.0, method)


def best_diagonal_oracle(Y, budget: int = 2000, tol: Tolerances = DEFAULT_TOL,
                         dim_max: int = ORACLE_DIM_MAX, grid_check: bool = True) -> QuotientNormResult:
    """Minimize ``||Y + i Diag(d)||`` over real ``d``.

    Multi-start subgradient descent (from ``0`` and ``-diag(-iY)``) is
    followed by a smoothing-continuation polish and a golden-section pass.
    The result is flagged ``marginal`` when the dual gap exceeds
    ``tol.oracle``, or, for dimension at most 4, when the independent grid
    oracle disagrees by more than ``tol.oracle``.
    """
    H = hermitian_part(Y)
    n = H.shape[0]
    if n > dim_max:
        raise ValueError(f"oracle dimension {n} exceeds oracle_dim_max={dim_max}")
    off = H - np.diag(np.diag(H))
    if not np.any(off):
        return _trivial(H, "diagonal")
    scale = objective(H, np.zeros(n))
    Hs = H / scale
    starts = [np.zeros(n), -np.real(np.diag(Hs)).astype(float)]
    runs = [_subgradient_descent(Hs, s, budget, 1.0, 10) for s in starts]
    f, d = min(runs, key=lambda t: t[0])
    d_s, iters = _smoothing_polish(Hs, d)
    lb = max(dual_lower_bound(Hs, d_s, mu) for mu in (1e-6, 1e-7, 1e-8, 1e-9))
    if objective(Hs, d_s) < f:
        d = d_s
    width = 1e-6 if n > 16 else 1e-4
    f, d = _golden_polish(Hs, d, width, sweeps=1 if n > 16 else 2)
    lb = max(lb, dual_lower_bound(Hs, d), active_set_lower_bound(Hs, d_s), active_set_lower_bound(Hs, d))
    value, lower = f * scale, lb * scale
    grid_agrees = None
    if grid_check and n <= 4:
        g = grid_refine_oracle(Y)
        grid_agrees = abs(g.value - value) <= tol.oracle
        lower = max(lower, g.lower_bound)
    gap = max(0.0, value - lower)
    marginal = gap > tol.oracle or grid_agrees is False
    return QuotientNormResult(value, d * scale, 2 * budget + iters, gap, lower,
                              "oracle", marginal, grid_agrees)


def grid_refine_oracle(Y, points: int = 9, iterations: int = 4000) -> QuotientNormResult:
    """Brute-force minimization for small dimensions.

    Any minimizer lies in the box ``|d_i + H_ii| <= ||H_off||``; a dense grid
    on that box seeds an ellipsoid method covering the whole box, whose cuts
    also yield a certified lower bound.
    """
    H = hermitian_part(Y)
    n = H.shape[0]
    if n > 6:
        raise ValueError("grid oracle is limited to dimension <= 6")
    off = H - np.diag(np.diag(H))
    R = objective(off, np.zeros(n))
    if R == 0:
        return _trivial(H, "grid")
    centre = -np.real(np.diag(H)).astype(float)
    ax = np.linspace(-R, R, points)
    G = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), -1).reshape(-1, n) + centre
    M = H[None] + G[:, :, None] * np.eye(n)[None]
    w = np.linalg.eigvalsh(M)
    vals = np.maximum(np.abs(w[:, 0]), np.abs(w[:, -1]))
    x = G[int(np.argmin(vals))].copy()
    best_f, best_x = float(vals.min()), x.copy()
    P = np.eye(n) * (2 * R) ** 2 * n
    lb = 0.0
    k = 0
    for k in range(iterations):
        f, g = subgradient(H, x)
        if f < best_f:
            best_f, best_x = f, x.copy()
        Pg = P @ g
        gPg = float(g @ Pg)
        if gPg <= 0:
            break
        lb = max(lb, f - math.sqrt(gPg))
        if best_f - lb < 1e-13 * R:
            break
        gt = Pg / math.sqrt(gPg)
        x = x - gt / (n + 1)
        P = n * n / (n * n - 1.0) * (P - 2.0 / (n + 1) * np.outer(gt, gt))
        P = (P + P.T) / 2
    return QuotientNormResult(best_f, best_x, k + 1, max(0.0, best_f - lb), lb, "grid")
