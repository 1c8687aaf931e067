"""Convergence experiments for the finite-range approximants.

Each ``run_*`` function returns a :class:`ConvergenceReport` whose pass/fail
assertions are pure functions of its metrics. Thresholds come from analytic
tail formulas for the given ``(gamma, N)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import families as fam
from .families import FamilyParams, ParameterError
from .geodesics import chebyshev_times, curve_length, finsler_norm_at, orbit_curve
from .linalg import DEFAULT_TOL, Tolerances, commutator, operator_norm
from .minimality import check_theorem_minimality
from .tails import classify_diagonal_tail

DEFAULT_N_LIST = (4, 8, 16, 32)
SOT_PROBES = 8
EXPERIMENTS = ("norm", "sot", "shifted", "curves", "oscillant")


@dataclass
class Assertion:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConvergenceReport:
    experiment_id: str
    params: dict
    n_list: list[int]
    metrics: dict[str, list[float]] = field(default_factory=dict)
    tables: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    constants: dict[str, float] = field(default_factory=dict)
    fitted_ratios: dict[str, float | None] = field(default_factory=dict)
    assertions: list[Assertion] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    @property
    def first_failure(self) -> Assertion | None:
        return next((a for a in self.assertions if not a.passed), None)

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.assertions.append(Assertion(name, bool(passed), detail))

    def assertion(self, name: str) -> Assertion:
        return next(a for a in self.assertions if a.name == name)

    def fit(self, *names: str) -> None:
        for name in names:
            self.fitted_ratios[name] = fitted_ratio(self.n_list, self.metrics[name])

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "experiment_id": self.experiment_id,
            "params": self.params,
            "n_list": list(self.n_list),
            "metrics": self.metrics,
            "tables": self.tables,
            "constants": self.constants,
            "fitted_ratios": self.fitted_ratios,
            "assertions": [vars(a) for a in self.assertions],
            "passed": self.passed,
        }

    def csv_rows(self) -> tuple[list[str], list[list]]:
        """Header and rows of the per-``n`` table (metrics, then table columns)."""
        cols = list(self.metrics)
        for tname, table in self.tables.items():
            cols += [f"{tname}.{k}" for k in table]
        rows = []
        for i, n in enumerate(self.n_list):
            row = [n] + [self.metrics[c][i] for c in self.metrics]
            for table in self.tables.values():
                row += [v[i] for v in table.values()]
            rows.append(row)
        return ["n"] + cols, rows


def fitted_ratio(ns: Sequence[int], values: Sequence[float]) -> float | None:
    """``exp`` of the least-squares slope of ``log(value)`` against ``n``."""
    pts = [(n, v) for n, v in zip(ns, values) if v > 0 and math.isfinite(v)]
    if len(pts) < 4:
        return None
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.log([p[1] for p in pts])
    return float(np.exp(np.polyfit(x, y, 1)[0]))


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _check_n_list(p: FamilyParams, n_list: Sequence[int]) -> list[int]:
    ns = [int(n) for n in n_list]
    if not ns or any(not 2 <= n <= p.N for n in ns):
        raise ParameterError(f"n_list entries must lie in [2, N={p.N}], got {ns}")
    if ns != sorted(set(ns)):
        raise ParameterError("n_list must be strictly increasing")
    return ns


def _params(p: FamilyParams, ns) -> dict:
    return {"gamma": p.gamma, "delta": p.delta, "N": p.N, "n_max": p.sup_rank, "r": p.r}


# --------------------------------------------------------------------------
# analytic tails


def L_tail(gamma: float, n: int) -> float:
    """Frobenius norm of ``L - P_n L P_n`` (untruncated)."""
    return math.sqrt(2 * gamma ** (2 * n) / (1 - gamma**2))


def Y1_tail(gamma: float, n: int) -> float:
    """Frobenius norm of ``Y1 - P_n Y1 P_n`` (untruncated)."""
    x, M = gamma**2, n - 1
    return math.sqrt(2 * x**M * (M - (M - 1) * x) / (1 - x) ** 2)


def norm_threshold(p: FamilyParams, n: int) -> float:
    return fam.r_gap(p, n) * fam.c1_L(p.gamma) + fam.r_n(p, n) * L_tail(p.gamma, n) + Y1_tail(p.gamma, n)


def shifted_diagonal_component(gamma: float, n: int, N: int) -> float:
    """``max{gamma^n / (1 - gamma^2), sup_{n < k <= N} |d_k + 1/(1 - gamma)|}``."""
    inner = gamma**n / (1 - gamma**2)
    outer = max((abs(fam.d_limit(gamma, k) + 1 / (1 - gamma)) for k in range(n + 1, N + 1)), default=0.0)
    return max(inner, outer)


# --------------------------------------------------------------------------
# experiments


def _embedded_Yn(p: FamilyParams, n: int):
    Y, D = fam.build_Yn_Dn(p, n)
    return Y, D


def run_norm_convergence(p: FamilyParams, n_list: Sequence[int] = DEFAULT_N_LIST,
                         tol: Tolerances = DEFAULT_TOL) -> ConvergenceReport:
    ns = _check_n_list(p, n_list)
    rep = ConvergenceReport("norm", _params(p, ns), ns)
    Yr = fam.build_Yr(p)
    L = fam.build_L(p)
    Y1 = fam.build_Y1(p)
    normL = operator_norm(L)
    dist, rgap, bound, thr = [], [], [], []
    for n in ns:
        Yn, _ = _embedded_Yn(p, n)
        dist.append(operator_norm(Yr - Yn))
        rgap.append(fam.r_gap(p, n))
        P = np.zeros(p.N)
        P[:n] = 1.0
        Ln = L * P[:, None] * P[None, :]
        Y1n = Y1 * P[:, None] * P[None, :]
        bound.append(rgap[-1] * normL + fam.r_n(p, n) * operator_norm(L - Ln) + operator_norm(Y1 - Y1n))
        thr.append(norm_threshold(p, n))
    rep.metrics = {"Yr_minus_Yn": dist, "r_gap": rgap, "triangle_bound": bound, "analytic_threshold": thr}
    rep.constants = {"M0": fam.compute_M0(p), "r": fam.resolve_r(p), "norm_L": normL}
    rep.fit("Yr_minus_Yn", "r_gap")
    rep.check("Yr_minus_Yn_strictly_decreasing", strictly_decreasing(dist))
    rep.check("r_gap_strictly_decreasing", strictly_decreasing(rgap))
    slack = [b - d for b, d in zip(bound, dist)]
    rep.check("triangle_bound_dominates", all(s >= -tol.alg for s in slack), f"min slack {min(slack):.3e}")
    rep.check("final_below_analytic_threshold", dist[-1] <= thr[-1], f"{dist[-1]:.3e} <= {thr[-1]:.3e}")
    return rep


def run_sot_convergence(p: FamilyParams, n_list: Sequence[int] = DEFAULT_N_LIST,
                        probes: Sequence[int] | None = None, tol: Tolerances = DEFAULT_TOL) -> ConvergenceReport:
    """``probes`` are 0-based basis indices (default the first eight)."""
    ns = _check_n_list(p, n_list)
    ks = list(probes) if probes is not None else list(range(min(SOT_PROBES, p.N)))
    rep = ConvergenceReport("sot", _params(p, ns), ns)
    d0 = fam.build_D0(p).values
    table = {f"e{k + 1}": [] for k in ks}
    gap, worst, bound = [], [], []
    g = p.gamma
    for n in ns:
        dn = fam.build_Yn_Dn(p, n)[1].values
        diff = np.abs(dn - d0)
        for k in ks:
            table[f"e{k + 1}"].append(float(diff[k]))
        worst.append(float(max(diff[k] for k in ks)))
        gap.append(float(np.max(diff)))
        # |d_k^{(n)} - d_k| = gamma^{2n-k} / (1 - gamma^2) for 1-based 2 <= k <= n
        bound.append(max((g ** (2 * n - (k + 1)) / (1 - g * g) for k in ks if 1 <= k < n), default=0.0))
    rep.metrics = {"max_probe_error": worst, "diagonal_norm_gap": gap, "analytic_probe_bound": bound}
    rep.tables = {"probe": table}
    rep.constants = {"limit": 1 / (g - 1)}
    rep.fit("max_probe_error")
    mono = all(all(b <= a for a, b in zip(col, col[1:])) for col in table.values())
    rep.check("probe_errors_nonincreasing", mono)
    within = all(w <= b * (1 + 1e-9) + 1e-15 for w, b, n in zip(worst, bound, ns) if n >= max(ks) + 1)
    rep.check("probe_errors_within_analytic_bound", within)
    rep.check("final_probe_error_below_threshold", worst[-1] <= bound[-1] * (1 + 1e-9) + 1e-15,
              f"{worst[-1]:.3e} <= {bound[-1]:.3e}")
    floor = abs(1 / (g - 1)) - 0.1
    persists = all(v >= floor for v, n in zip(gap, ns) if n < p.N)
    rep.check("operator_norm_gap_persists", persists, f"min gap {min(gap):.6f} vs {floor:.6f}")
    return rep


def run_shifted_norm_convergence(p: FamilyParams, n_list: Sequence[int] = DEFAULT_N_LIST,
                                 tol: Tolerances = DEFAULT_TOL) -> ConvergenceReport:
    ns = _check_n_list(p, n_list)
    rep = ConvergenceReport("shifted", _params(p, ns), ns)
    g, N = p.gamma, p.N
    c = 1 / (1 - g)
    target = fam.build_Zr(p) + 1j * c * np.eye(N)
    Yr = fam.build_Yr(p)
    d0 = fam.build_D0(p).values
    dist, off_part, diag_part, formula, thr = [], [], [], [], []
    for n in ns:
        Yn, Dn = fam.build_Yn_Dn(p, n)
        P = np.zeros(N)
        P[:n] = 1.0
        approx = Yn + Dn.as_operator() + 1j * c * np.diag(P)
        dist.append(operator_norm(approx - target))
        off_part.append(operator_norm(Yn - Yr))
        diag_part.append(float(np.max(np.abs(Dn.values + c * P - d0 - c))))
        formula.append(shifted_diagonal_component(g, n, N))
        thr.append(norm_threshold(p, n) + formula[-1])
    rep.metrics = {"shifted_distance": dist, "off_diagonal_component": off_part,
                   "diagonal_component": diag_part, "diagonal_formula": formula, "analytic_threshold": thr}
    rep.constants = {"M0": fam.compute_M0(p), "shift": c}
    rep.fit("shifted_distance", "diagonal_component")
    rep.check("shifted_distance_strictly_decreasing", strictly_decreasing(dist))
    ident = max(abs(a - b) for a, b in zip(diag_part, formula))
    rep.check("diagonal_component_matches_formula", ident <= tol.alg, f"max deviation {ident:.3e}")
    rep.check("final_below_analytic_threshold", dist[-1] <= thr[-1], f"{dist[-1]:.3e} <= {thr[-1]:.3e}")
    return rep


def run_curve_convergence(p: FamilyParams, n_list: Sequence[int] = DEFAULT_N_LIST,
                          t_samples: int = 65, tol: Tolerances = DEFAULT_TOL) -> ConvergenceReport:
    ns = _check_n_list(p, n_list)
    rep = ConvergenceReport("curves", _params(p, ns), ns)
    M0 = fam.compute_M0(p)
    half = math.pi / (2 * M0)
    interval = (-half, half)
    b = fam.build_base_point(N=p.N)
    B = b.as_operator()
    Zr = fam.build_Zr(p)
    sigma = orbit_curve(Zr, b, interval, t_samples)
    times = chebyshev_times(*interval, t_samples)
    sup_dist, lengths, tangent = [], [], []
    for n in ns:
        Yn, Dn = fam.build_Yn_Dn(p, n)
        Zn = Yn + Dn.as_operator()
        sn = orbit_curve(Zn, b, interval, t_samples)
        sup_dist.append(max(operator_norm(sn.point(t) - sigma.point(t)) for t in times))
        lengths.append(curve_length(sn, tol=tol))
        tangent.append(finsler_norm_at(commutator(Zn - Zr, B), B, tol))
    expected = (interval[1] - interval[0]) * M0
    rep.metrics = {"sup_distance": sup_dist, "length": lengths, "tangent_distance": tangent}
    rep.constants = {"M0": M0, "t_min": interval[0], "t_max": interval[1],
                     "expected_length": expected, "sigma_length": curve_length(sigma, tol=tol)}
    rep.fit("sup_distance", "tangent_distance")
    rep.check("sup_distance_strictly_decreasing", strictly_decreasing(sup_dist))
    dev = max(abs(x - expected) for x in lengths + [rep.constants["sigma_length"]])
    rep.check("lengths_equal_interval_times_M0", dev <= tol.quad, f"max deviation {dev:.3e}")
    rep.check("tangent_distance_strictly_decreasing", strictly_decreasing(tangent))
    return rep


def interleaving_audit(gamma: float, delta: float, n: int, d_n: np.ndarray) -> dict:
    """Check ``d'_{2k-1} <= d^{(n)}_{2k-1} <= d^{(n)}_{2k} <= d'_{2k}`` for ``2k <= n``.

    Interior indices (``2k < n``) and the edge ``2k = n`` are counted apart.
    """
    interior, edge = [], []
    for k in range(1, n // 2 + 1):
        lo = fam.d0prime_closed(gamma, delta, 2 * k - 1)
        hi = fam.d0prime_closed(gamma, delta, 2 * k)
        a, b = d_n[2 * k - 2], d_n[2 * k - 1]
        slack = min(a - lo, b - a, hi - b)
        (edge if 2 * k == n else interior).append(slack)
    return {"interior_min_slack": min(interior, default=math.inf),
            "edge_min_slack": min(edge, default=math.inf),
            "audited": len(interior) + len(edge)}


def run_oscillant_convergence(p: FamilyParams, n_list: Sequence[int] = DEFAULT_N_LIST,
                              tol: Tolerances = DEFAULT_TOL) -> ConvergenceReport:
    fam.check_oscillant(p.gamma, p.delta)
    g, de, N = p.gamma, p.delta, p.N
    if not math.isclose(g * g, de, rel_tol=1e-12) or not de * de < g:
        raise ParameterError("oscillant convergence needs gamma^2 = delta and delta^2 < gamma")
    ns = _check_n_list(p, n_list)
    rep = ConvergenceReport("oscillant", _params(p, ns), ns)
    M1 = fam.compute_M1(p)
    lam, mu = fam.oscillant_limits(g, de)
    limit = fam.build_oscillant_limit(p)
    even = fam.parity_mask(N, even=True)
    odd = fam.parity_mask(N, even=False)
    cert_dev, verdict_ok, dist, diag_dev, inner, edge = [], [], [], [], [], []
    d0 = fam.build_D0prime(p).values
    for n in ns:
        Zn, Dn = fam.build_Znprime_Dnprime(p, n)
        T = Zn + Dn.as_operator()
        cert = check_theorem_minimality(T[:n, :n], 0, tol)
        verdict_ok.append(1.0 if cert.certified else 0.0)
        cert_dev.append(abs(cert.certified_norm - M1))
        P = np.zeros(N)
        P[:n] = 1.0
        shifted = T - 1j * np.diag(P * (lam * even + mu * odd))
        dist.append(operator_norm(shifted - limit))
        diag_dev.append(float(np.max(np.abs(Dn.values[:n] - d0[:n]))))
        audit = interleaving_audit(g, de, n, Dn.values)
        inner.append(audit["interior_min_slack"])
        edge.append(audit["edge_min_slack"])
    cls = classify_diagonal_tail(fam.build_D0prime(p))
    rep.metrics = {"certified": verdict_ok, "certified_minus_M1": cert_dev, "shifted_distance": dist,
                   "max_diagonal_deviation": diag_dev, "interleaving_interior_slack": inner,
                   "interleaving_edge_slack": edge}
    q = max(g, de)
    C = fam.build_D0prime(p).tail.bound[0]
    thr = [C * q ** (n // 2) for n in ns]
    rep.metrics["analytic_threshold"] = thr
    rep.constants = {"M1": M1, "lambda": lam, "mu": mu, "r": fam.oscillant_r(p),
                     "classified_kind": cls.kind,
                     "classified_even_limit": cls.limits[0] if len(cls.limits) > 0 else math.nan,
                     "classified_odd_limit": cls.limits[1] if len(cls.limits) > 1 else math.nan}
    rep.fit("shifted_distance")
    rep.check("all_certified_with_value_M1",
              all(v == 1.0 for v in verdict_ok) and max(cert_dev) <= tol.min, f"max |value - M1| {max(cert_dev):.3e}")
    rep.check("interleaving_holds", min(inner + edge) >= -tol.alg,
              f"interior min slack {min(inner):.3e}, edge min slack {min(edge):.3e}")
    rep.check("shifted_distance_strictly_decreasing", strictly_decreasing(dist))
    rep.check("final_shifted_distance_below_threshold", dist[-1] <= thr[-1], f"{dist[-1]:.6g} <= {thr[-1]:.3e}")
    lim_err = max(abs(cls.limits[0] - lam), abs(cls.limits[1] - mu)) if cls.kind == "oscillant" else math.inf
    rep.check("two_limits_classified", lim_err <= 1e-8, f"limit error {lim_err:.3e}")
    return rep


RUNNERS = {
    "norm": run_norm_convergence,
    "sot": run_sot_convergence,
    "shifted": run_shifted_norm_convergence,
    "curves": run_curve_convergence,
    "oscillant": run_oscillant_convergence,
}
