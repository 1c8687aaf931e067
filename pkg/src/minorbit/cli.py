"""Command-line front end.

Exit codes: 0 success, 1 unreadable input, 2 invalid parameters or config,
3 certificate conditions fail, 4 numerically marginal, 5 an experiment
assertion failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import convergence, families as fam
from .exchange import ExchangeError, OperatorFile, atomic_write, csv_text, dump_operator, dumps17, read_operator
from .families import FamilyParams, ParameterError
from .geodesics import constant_speed_profile, curve_length, orbit_curve
from .linalg import StructureError, Tolerances, operator_norm
from .minimality import (CERTIFIED, MARGINAL, check_theorem_minimality, perturbation_audit,
                         quotient_norm)
from .seeds import derive_seed

log = logging.getLogger("minorbit")

EXIT_OK, EXIT_INPUT, EXIT_PARAMS, EXIT_CONDITIONS, EXIT_MARGINAL, EXIT_ASSERTION = range(6)

FAMILIES = ("L", "Y1", "D0", "Zr", "Yn", "Dn", "Z0", "D0prime", "Znprime", "Dnprime", "Psigma", "base_point")
CONFIG_KEYS = {"schema", "command", "family", "gamma", "delta", "r", "n", "N", "n_max", "n_list",
               "tolerances", "budget", "seed", "out_dir", "experiment", "sigma", "audit_trials"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    gamma: float = 0.5
    delta: float | None = None
    r: float | str = "auto"
    n: int | None = None
    N: int = 64
    n_max: int = 48
    n_list: list[int] = field(default_factory=lambda: list(convergence.DEFAULT_N_LIST))
    tolerances: Tolerances = field(default_factory=Tolerances)
    budget: int = 2000
    seed: int = 0
    out_dir: str = "."
    sigma: str = "even"
    audit_trials: int = 0

    def family_params(self, **changes) -> FamilyParams:
        p = FamilyParams(self.gamma, self.delta, self.r, self.n, self.N, self.n_max)
        return p.with_(**changes) if changes else p

    def validate(self, command: str | None = None) -> None:
        if command == "experiment" and self.n_list and max(self.n_list) > self.N:
            raise ConfigError(f"n_list {self.n_list} exceeds the truncation N={self.N}")
        if self.budget < 1:
            raise ConfigError("budget must be positive")
        if self.audit_trials < 0:
            raise ConfigError("audit_trials must be non-negative")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema") != 1:
        raise ConfigError(f"config schema must be 1, got {cfg.get('schema')!r}")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def build_config(cfg: dict, args: argparse.Namespace, command: str | None = None) -> RunConfig:
    """Merge config file values with command-line flags (flags win)."""
    merged = {k: v for k, v in cfg.items() if k not in {"schema", "command", "family", "experiment"}}
    tol = dict(merged.pop("tolerances", {}) or {})
    for key in ("gamma", "delta", "r", "n", "N", "n_max", "n_list", "budget", "seed", "out_dir", "sigma",
                "audit_trials"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    for key in ("alg", "min", "oracle", "quad"):
        val = getattr(args, f"tol_{key}", None)
        if val is not None:
            tol[key] = val
    if isinstance(merged.get("r"), str) and merged["r"] != "auto":
        try:
            merged["r"] = float(merged["r"])
        except ValueError as exc:
            raise ConfigError(f"r must be a number or 'auto', got {merged['r']!r}") from exc
    try:
        merged["tolerances"] = Tolerances(**tol)
        rc = RunConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    rc.validate(command)
    return rc


# --------------------------------------------------------------------------
# commands


def _emit(obj) -> None:
    sys.stdout.write(dumps17(obj) + "\n")


def construct_operator(family: str, rc: RunConfig) -> OperatorFile:
    p = rc.family_params()
    g = p.gamma
    params = {"gamma": g, "delta": p.delta, "r": p.r, "n": p.n, "N": p.N, "n_max": p.n_max}
    consts: dict = {}
    tail = None
    if family in ("L", "Y1", "D0", "Zr", "Yn", "Dn"):
        fam.check_gamma(g)
        consts["column_norm_L_1"] = fam.c1_L(g, p.N)
        consts["column_norm_L_1_tail_sq"] = g ** (2 * p.N) / (1 - g * g)
    if family in ("Z0", "D0prime", "Znprime", "Dnprime"):
        fam.check_oscillant(g, p.delta)
    if family == "L":
        A = fam.build_L(p)
    elif family == "Y1":
        A = fam.build_Y1(p)
    elif family == "D0":
        D = fam.build_D0(p)
        A, tail = D.as_operator(), D.tail
    elif family == "Zr":
        A = fam.build_Zr(p)
        tail = fam.build_D0(p).tail
        consts.update(M0=fam.compute_M0(p), r=fam.resolve_r(p))
    elif family in ("Yn", "Dn"):
        n = p.n if p.n is not None else p.N
        Y, D = fam.build_Yn_Dn(p, n)
        consts.update(M0=fam.compute_M0(p), r_n=fam.r_n(p, n))
        A, tail = (Y, None) if family == "Yn" else (D.as_operator(), D.tail)
    elif family == "Z0":
        A = fam.build_Z0(p)
        consts["column_norm_Z0_1"] = fam.c1_Z0(g, p.delta, p.N)
    elif family == "D0prime":
        D = fam.build_D0prime(p)
        A, tail = D.as_operator(), D.tail
        lam, mu = fam.oscillant_limits(g, p.delta)
        consts.update({"lambda": lam, "mu": mu}, M1=fam.compute_M1(p))
    elif family in ("Znprime", "Dnprime"):
        n = p.n if p.n is not None else p.N
        Z, D = fam.build_Znprime_Dnprime(p, n)
        consts.update(M1=fam.compute_M1(p), r_n=fam.oscillant_r_n(p, n))
        A, tail = (Z, None) if family == "Znprime" else (D.as_operator(), D.tail)
    elif family == "Psigma":
        if rc.sigma not in ("even", "odd"):
            raise ParameterError(f"sigma must be 'even' or 'odd', got {rc.sigma!r}")
        sigma = fam.sigma_even if rc.sigma == "even" else fam.sigma_odd
        A = fam.build_Psigma(sigma, p.N)
        params["sigma"] = rc.sigma
    elif family == "base_point":
        b = fam.build_base_point(N=p.N)
        A = b.as_operator()
        consts["sep_min"] = b.sep_min
    else:
        raise ParameterError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    consts["operator_norm"] = operator_norm(A)
    return OperatorFile(np.asarray(A, dtype=complex), family, params, tail, consts)


def cmd_construct(family: str, rc: RunConfig, out: str | None) -> int:
    op = construct_operator(family, rc)
    path = Path(out) if out else Path(rc.out_dir) / f"{family}_{rc.gamma}_{rc.N}.json"
    atomic_write(path, dump_operator(op))
    log.info("wrote %s", path)
    _emit({"family": family, "file": str(path), "dim": op.dim, "constants": op.constants})
    return EXIT_OK


def cmd_certify(path: str, rc: RunConfig, pivot: int, out: str | None) -> int:
    op = read_operator(path)
    cert = check_theorem_minimality(op.matrix, pivot, rc.tolerances)
    report = {"file": str(path), "certificate": cert.to_dict()}
    if rc.audit_trials:
        try:
            audit = perturbation_audit(op.matrix, rc.audit_trials, seed=derive_seed(rc.seed, "certify"))
        except StructureError as exc:
            log.warning("audit skipped: %s", exc)
        else:
            report["audit"] = audit.to_dict()
    if out:
        atomic_write(out, dumps17(report) + "\n")
    _emit({"verdict": cert.verdict, "certified_norm": cert.certified_norm, "operator_norm": cert.operator_norm,
           "failed_conditions": [c.name for c in cert.conditions if not c.passed],
           "audit_worst": report.get("audit", {}).get("worst")})
    return {CERTIFIED: EXIT_OK, MARGINAL: EXIT_MARGINAL}.get(cert.verdict, EXIT_CONDITIONS)


def cmd_quotient_norm(path: str, rc: RunConfig, out: str | None) -> int:
    op = read_operator(path)
    res = quotient_norm(op.matrix, diagonal=np.zeros(op.dim), tol=rc.tolerances, budget=rc.budget)
    report = {"file": str(path), "result": res.to_dict()}
    if out:
        atomic_write(out, dumps17(report) + "\n")
    _emit({"value": res.value, "lower_bound": res.lower_bound, "method": res.method,
           "marginal": res.marginal, "error_bound": res.error_bound})
    return EXIT_MARGINAL if res.marginal else EXIT_OK


def cmd_curve_length(path: str, rc: RunConfig, t0: float | None, out: str | None, csv_out: str | None) -> int:
    op = read_operator(path)
    b = fam.build_base_point(N=op.dim)
    Z = op.matrix
    norm = operator_norm(Z)
    if t0 is None:
        t0 = math.pi / (4 * norm) if norm > 0 else 1.0
    curve = orbit_curve(Z, b, (min(0.0, t0), max(0.0, t0)))
    length = curve_length(curve, tol=rc.tolerances)
    speeds = [s for _, s in constant_speed_profile(curve, rc.tolerances)]
    report = {"file": str(path), "t0": t0, "length": length, "speed_min": min(speeds), "speed_max": max(speeds),
              "speed_spread": max(speeds) - min(speeds), "operator_norm": norm,
              "times": curve.times, "speeds": speeds}
    if out:
        atomic_write(out, dumps17(report) + "\n")
    if csv_out:
        n = op.dim
        header = ["t"] + [f"{part}_{i}_{j}" for i in range(n) for j in range(n) for part in ("re", "im")]
        rows = [[float(t)] + [v for z in P.ravel() for v in (float(z.real), float(z.imag))] for t, P in curve.samples]
        atomic_write(csv_out, csv_text(header, rows))
    _emit({"length": length, "t0": t0, "speed_spread": report["speed_spread"]})
    return EXIT_OK


def report_paths(rep: convergence.ConvergenceReport, rc: RunConfig) -> tuple[Path, Path]:
    stem = f"{rep.experiment_id}_{rc.gamma}_{rc.N}"
    return Path(rc.out_dir) / f"{stem}.json", Path(rc.out_dir) / f"{stem}.csv"


def run_experiment(name: str, rc: RunConfig) -> convergence.ConvergenceReport:
    p = rc.family_params()
    if name == "oscillant" and p.delta is None:
        p = p.with_(delta=p.gamma**2)
    return convergence.RUNNERS[name](p, rc.n_list, tol=rc.tolerances)


def cmd_experiment(experiment: str, rc: RunConfig) -> int:
    names = list(convergence.EXPERIMENTS) if experiment == "all" else [experiment]
    if any(n not in convergence.RUNNERS for n in names):
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of "
                          f"{', '.join(convergence.EXPERIMENTS)} or all")
    # validate every parameter region before spending time on any run
    for name in names:
        p = rc.family_params()
        fam.check_gamma(p.gamma)
        if name == "oscillant":
            p = p.with_(delta=p.delta if p.delta is not None else p.gamma**2)
            fam.check_oscillant(p.gamma, p.delta)
        convergence._check_n_list(p, rc.n_list)
    with ThreadPoolExecutor(max_workers=len(names)) as ex:
        reports = list(ex.map(lambda n: run_experiment(n, rc), names))
    failure = None
    for rep in reports:
        jpath, cpath = report_paths(rep, rc)
        atomic_write(jpath, dumps17(rep.to_dict()) + "\n")
        atomic_write(cpath, csv_text(*rep.csv_rows()))
        log.info("wrote %s and %s", jpath, cpath)
        bad = rep.first_failure
        status = "PASS" if bad is None else f"FAIL ({bad.name})"
        sys.stdout.write(f"{rep.experiment_id}: {status} -> {jpath}\n")
        if bad is not None and failure is None:
            failure = (rep.experiment_id, bad)
    if failure is not None:
        log.error("experiment %s failed assertion %s: %s", failure[0], failure[1].name, failure[1].detail)
        return EXIT_ASSERTION
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("parameters (override the config file)")
    g.add_argument("--gamma", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--r", help="number or 'auto'")
    g.add_argument("--n", type=int, help="rank of the finite-range approximant")
    g.add_argument("--N", type=int, help="truncation dimension")
    g.add_argument("--n-max", dest="n_max", type=int, help="largest rank in the sup constants")
    g.add_argument("--n-list", dest="n_list", type=_int_list, help="e.g. 4,8,16,32")
    g.add_argument("--budget", type=int, help="oracle iteration budget")
    g.add_argument("--seed", type=int, help="root seed for randomized audits")
    g.add_argument("--out-dir", dest="out_dir")
    for key in ("alg", "min", "oracle", "quad"):
        g.add_argument(f"--tol-{key}", dest=f"tol_{key}", type=float)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="minorbit", description="Minimal anti-Hermitian operators and their orbits.")
    ap.add_argument("--config", help="JSON config with \"schema\": 1")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("construct", help="write a family member as an operator-exchange file")
    p.add_argument("family", nargs="?", choices=FAMILIES)
    p.add_argument("--sigma", choices=("even", "odd"))
    p.add_argument("-o", "--out")
    _common(p)

    p = sub.add_parser("certify", help="run the minimality certificate on an operator file")
    p.add_argument("file")
    p.add_argument("--pivot", type=int, default=0, help="0-based pivot index")
    p.add_argument("--audit-trials", dest="audit_trials", type=int)
    p.add_argument("-o", "--out")
    _common(p)

    p = sub.add_parser("quotient-norm", help="distance to the diagonal operators")
    p.add_argument("file")
    p.add_argument("-o", "--out")
    _common(p)

    p = sub.add_parser("curve-length", help="Finsler length of t -> e^{tZ} b e^{-tZ} over [0, t0]")
    p.add_argument("file")
    p.add_argument("--t0", type=float, help="defaults to pi / (4 ||Z||)")
    p.add_argument("-o", "--out")
    p.add_argument("--csv", dest="csv_out", help="write curve samples (t, entries) as CSV")
    _common(p)

    p = sub.add_parser("experiment", help="run convergence experiments and write reports")
    p.add_argument("experiment", nargs="?", choices=convergence.EXPERIMENTS + ("all",))
    _common(p)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.WARNING - 10 * min(args.verbose, 2))
    log.propagate = False
    try:
        return _dispatch(ap, args)
    finally:
        log.removeHandler(handler)


def _dispatch(ap: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        command = args.command
        if command is None:
            ap.print_usage(sys.stderr)
            return EXIT_PARAMS
        if cfg.get("command") not in (None, command):
            raise ConfigError(f"config is for command {cfg['command']!r}, not {command!r}")
        rc = build_config(cfg, args, command)
        if command == "construct":
            family = args.family or cfg.get("family")
            if family not in FAMILIES:
                raise ParameterError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
            return cmd_construct(family, rc, args.out)
        if command == "certify":
            return cmd_certify(args.file, rc, args.pivot, args.out)
        if command == "quotient-norm":
            return cmd_quotient_norm(args.file, rc, args.out)
        if command == "curve-length":
            return cmd_curve_length(args.file, rc, args.t0, args.out, args.csv_out)
        if command == "experiment":
            return cmd_experiment(args.experiment or cfg.get("experiment") or "all", rc)
        raise ConfigError(f"unknown command {command!r}")
    except ExchangeError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (ParameterError, ConfigError) as exc:
        log.error("%s", exc)
        return EXIT_PARAMS
    except (StructureError, IndexError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
