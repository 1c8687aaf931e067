"""Classification of a diagonal's limiting behaviour from its finite entries.

For ``m = 1, 2, ...`` the entries are split into ``m`` residue classes
(position ``k`` goes to class ``k mod m``) and each class is tested for
geometric convergence; its limit is estimated by Aitken's delta-squared
extrapolation on the last three terms. The smallest ``m`` whose classes all
converge wins; classes sharing a limit are merged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_ENTRIES = 16


@dataclass(frozen=True)
class TailClass:
    """``kind`` is ``compact_proxy``, ``single_limit``, ``oscillant`` or ``unclassified``.

    ``limits`` are listed by residue class of the 1-based position (for
    ``m = 2``: even positions first, then odd ones).
    """

    kind: str
    m: int | None
    limits: tuple[float, ...]
    residual: float
    ratio: float | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "limits": list(self.limits),
                "residual": self.residual, "ratio": self.ratio}


def aitken(x0: float, x1: float, x2: float) -> float:
    d1, d2 = x1 - x0, x2 - x1
    den = d2 - d1
    if den == 0 or abs(d2) <= 1e-15 * max(1.0, abs(x2)):
        return x2
    return x2 - d2 * d2 / den


def _fit(seq: np.ndarray, fit_tol: float) -> tuple[bool, float, float, float]:
    """Return (converges, limit, remainder estimate, ratio) for one class."""
    if len(seq) < 4:
        return False, float("nan"), float("inf"), float("nan")
    diffs = np.abs(np.diff(seq[-4:]))
    scale = max(1.0, float(np.max(np.abs(seq[-4:]))))
    floor = 1e-14 * scale
    if diffs[-1] <= floor:
        return True, float(seq[-1]), float(diffs[-1]), 0.0
    if diffs[-2] <= floor:
        return False, float("nan"), float("inf"), float("nan")
    q = max(diffs[-1] / diffs[-2], diffs[-2] / max(diffs[-3], floor))
    if q >= 1:
        return False, float("nan"), float("inf"), float(q)
    lim = aitken(*seq[-3:])
    earlier = aitken(*seq[-4:-1])
    remainder = abs(lim - earlier)
    return remainder <= fit_tol * scale, float(lim), float(remainder), float(q)


def classify_diagonal_tail(D, m_max: int = 2, fit_tol: float = 1e-6, merge_tol: float = 1e-6) -> TailClass:
    """Classify the entries of ``D`` (a :class:`DiagonalSeq` or an array)."""
    v = np.asarray(getattr(D, "values", D), dtype=float)
    if len(v) < MIN_ENTRIES:
        raise ValueError(f"need at least {MIN_ENTRIES} entries, got {len(v)}")
    tail = v[len(v) // 2:]
    if not np.any(tail):
        return TailClass("compact_proxy", 1, (0.0,), 0.0, 0.0)
    pos = np.arange(1, len(v) + 1)
    for m in range(1, m_max + 1):
        limits, resid, ratio, ok = [], 0.0, 0.0, True
        # even positions first for m = 2, matching the P^even / P^odd split
        for r in [(m - j) % m for j in range(m)] if m > 1 else [0]:
            cls = v[(pos % m == r) & (pos > 1)]
            good, lim, rem, q = _fit(cls, fit_tol)
            if not good:
                ok = False
                break
            limits.append(lim)
            resid = max(resid, rem)
            ratio = max(ratio, q)
        if not ok:
            continue
        distinct = []
        for lim in limits:
            if not any(abs(lim - u) <= merge_tol * max(1.0, abs(u)) for u in distinct):
                distinct.append(lim)
        if len(distinct) == 1:
            lim = distinct[0]
            if abs(lim) <= merge_tol:
                return TailClass("compact_proxy", 1, (0.0,), resid, ratio)
            return TailClass("single_limit", 1, (lim,), resid, ratio)
        if len(distinct) == m:
            return TailClass("oscillant", m, tuple(limits), resid, ratio)
    return TailClass("unclassified", None, (), float("inf"))
