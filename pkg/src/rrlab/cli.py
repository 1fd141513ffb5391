"""Command-line front end: ``rrlab verify | approx | audit | towers``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

from . import twoadic
from .approximation import (approximation_stage, build_combination, lemma_audit_rows, sot_error,
                            square_tests, weak_star_error)
from .joinings import SHIPPED_JOININGS, JoiningError, check_attachable, load_joining, marginal_audit
from .numerics import IntervalSet, PiecewiseLinear, StepFunction, format_decimal, format_rational, parse_rational
from .rank_one import DepthExceeded, DescriptorError, build, load_descriptor
from .towers import (DEFAULT_EPS, DEFAULT_GRID, check_inclusions, good_levels, level_fibers, tower_triple,
                     verify_conditions)

EXIT_OK, EXIT_AUDIT, EXIT_INPUT = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config


def _eps_list(text: str) -> list[Fraction]:
    try:
        eps = sorted({parse_rational(t.strip()) for t in text.split(",") if t.strip()})
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad --eps: {exc}") from exc
    if not eps or any(not 0 < e < 1 for e in eps):
        raise ConfigError("--eps values must lie in (0, 1)")
    return eps


def _joining_id(source: str) -> str:
    return source if source in SHIPPED_JOININGS else Path(source).stem


class Config:
    def __init__(self, args: argparse.Namespace, need_joining: bool):
        for name in ("grid", "tests", "den_cap", "digits"):
            v = getattr(args, name, None)
            if v is not None and v <= 0:
                raise ConfigError(f"--{name.replace('_', '-')} must be positive")
        try:
            self.descriptor = load_descriptor(args.system)
        except OSError as exc:
            raise ConfigError(f"cannot read system descriptor: {exc}") from exc
        k_max = args.k_max if args.k_max is not None else min(4, self.descriptor.max_stage)
        if not 0 <= args.k_min <= k_max <= self.descriptor.max_stage:
            raise ConfigError(f"need 0 <= k-min <= k-max <= {self.descriptor.max_stage}, "
                              f"got [{args.k_min}, {k_max}]")
        self.k_range = range(args.k_min, k_max + 1)
        if args.digits is not None:
            twoadic.MAX_DIGITS = args.digits
        try:
            self.sys = build(self.descriptor, den_cap=args.den_cap)
        except DepthExceeded as exc:
            raise ConfigError(str(exc)) from exc
        self.joining = self.joining_id = None
        if need_joining:
            try:
                self.joining = load_joining(args.joining)
            except OSError as exc:
                raise ConfigError(f"cannot read joining descriptor: {exc}") from exc
            check_attachable(self.joining, self.sys)
            self.joining_id = _joining_id(args.joining)
        self.eps = _eps_list(args.eps) if hasattr(args, "eps") else None
        self.grid = getattr(args, "grid", DEFAULT_GRID)
        self.tests = getattr(args, "tests", 4)
        self.out = Path(args.out)
        # every stage in range must support the tower computations
        for k in self.k_range:
            tower_triple(self.sys, k)


# ---------------------------------------------------------------------------
# output


def _cells(value) -> list[str]:
    if isinstance(value, bool):
        return [str(value).lower()]
    if isinstance(value, Fraction):
        return [format_rational(value), format_decimal(value)]
    return [str(value)]


def write_csv(path: Path, columns: list[str], rows: list[list]) -> None:
    """Rational cells become ``p/q`` plus a decimal column; written atomically."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fractional = [any(isinstance(r[i], Fraction) for r in rows) for i in range(len(columns))]
    header = []
    for name, frac in zip(columns, fractional):
        header += [name, f"{name}_dec"] if frac else [name]
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            line = []
            for v, frac in zip(r, fractional):
                line += _cells(Fraction(v) if frac and v != "" else v)
            w.writerow(line)
    os.replace(tmp, path)


def write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# commands


def cmd_verify(cfg: Config) -> int:
    reports = verify_conditions(cfg.sys, cfg.k_range)
    columns = list(reports[0].__dataclass_fields__) if reports else []
    rows = [[getattr(r, c) for c in columns] for r in reports]
    write_csv(cfg.out / "conditions.csv", columns, rows)
    ok = all(r.cond2_ok and r.chain_ok for r in reports)
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_towers(cfg: Config) -> int:
    columns = ["k", "m", "n_k", "mass_Rk", "mass_Rk_hat", "mass_Rk_hat_upper", "mass_Rk_tilde",
               "mass_Rk_tilde_upper", "unresolved"]
    rows = []
    for k in cfg.k_range:
        t = tower_triple(cfg.sys, k)
        rows.append([k, t.m, cfg.sys.stages[k].height, t.Rk.mass, t.Rk_hat.mass, t.Rk_hat.mass_upper,
                     t.Rk_tilde.mass, t.Rk_tilde.mass_upper, t.unresolved_mass])
    write_csv(cfg.out / "towers.csv", columns, rows)
    return EXIT_OK


def sot_tests(sys) -> list[tuple[str, object]]:
    """Fixed SOT probes: identity, a centered tent and the indicator of the left half."""
    L = sys.normalization
    return [("identity", PiecewiseLinear((0, L), (0, L))),
            ("tent", PiecewiseLinear((0, L / 2, L), (0, L / 2, 0))),
            ("half", StepFunction.indicator(IntervalSet.interval(0, L / 2), L))]


def cmd_approx(cfg: Config) -> int:
    sys_, joining = cfg.sys, cfg.joining
    tests = square_tests(cfg.tests, sys_.normalization)
    probes = sot_tests(sys_)
    ws_stage = approximation_stage(sys_, cfg.k_range[-1])
    rows, combos = [], []
    failures = 0
    for k in cfg.k_range:
        tri = tower_triple(sys_, k)
        cache = level_fibers(sys_, k, joining, cfg.grid, tri)
        chosen = None
        for eps in cfg.eps:
            comb = build_combination(joining, sys_, k, eps, cfg.grid, tri, cache)
            if comb.selection.threshold_met:
                chosen = comb
                break
        comb = chosen or comb
        sel = comb.selection
        prof_residual = 1 - comb.total
        sot = [sot_error(comb, joining, sys_, f) for _, f in probes]
        ws = weak_star_error(comb, joining, sys_, tests, stage=ws_stage)
        audit = lemma_audit_rows(joining, sys_, k, tri=tri)
        fails = sum(r.verdict == "fail" for r in audit)
        failures += fails
        top = max(range(len(comb.coefficients)), key=lambda i: (comb.coefficients[i], -i))
        row = [k, sys_.stages[k].height, cfg.joining_id, sel.eps, comb.total, prof_residual,
               top, comb.coefficients[top]]
        for b in sot:
            row += [b.lo, b.hi]
        row += [ws.lo, ws.hi, sel.score, sel.threshold_met, sel.y, sel.level, fails]
        rows.append(row)
        combos.append({"k": k, "eps": format_rational(sel.eps), "base_point": format_rational(comb.base_point),
                       "coefficients": {str(i): format_rational(c) for i, c in comb.weights().items()}})
    columns = ["k", "n_k", "joining_id", "eps", "sum_c", "residual", "top_index", "top_coefficient"]
    for name, _ in probes:
        columns += [f"sot_error_sq_{name}_lo", f"sot_error_sq_{name}_hi"]
    columns += ["weak_star_error_lo", "weak_star_error_hi", "score", "threshold_met", "base_point",
                "base_level", "audit_violations"]
    write_csv(cfg.out / "sweep.csv", columns, rows)
    write_json(cfg.out / "combination.json", {"system": cfg.descriptor.name, "joining": cfg.joining_id,
                                               "weak_star_stage": ws_stage, "stages": combos})
    return EXIT_AUDIT if failures else EXIT_OK


def _probe_sets(sys) -> list[IntervalSet]:
    L = sys.normalization
    return [IntervalSet.interval(0, L / 3), IntervalSet.interval(L / 4, 3 * L / 4),
            IntervalSet.of((0, L / 8), (L / 2, 5 * L / 8))]


def cmd_audit(cfg: Config) -> int:
    """Lemma inequalities, tower inclusions, marginals and goodness for the chosen joining.

    Verdicts are ``pass``/``fail``/``indeterminate``; ``info`` rows only
    report values (goodness fractions and the literal open-window inclusions).
    """
    sys_, joining = cfg.sys, cfg.joining
    rows = []
    for k in cfg.k_range:
        tri = tower_triple(sys_, k)
        for r in lemma_audit_rows(joining, sys_, k, tri=tri):
            rows.append([r.lemma, k, r.sample, r.lhs_lo, r.lhs_hi, r.rhs_lo, r.rhs_hi, r.verdict, r.note])
        for closed in (True, False):
            for a in check_inclusions(sys_, k, closed):
                name = f"inclusion_{a.which}" + ("" if closed else "_open")
                verdict = ("pass" if a.passed else "fail") if closed else "info"
                rows.append([name, k, f"radius={a.radius}", a.violations, a.violations + a.indeterminate,
                             Fraction(0), Fraction(0), verdict, f"rhs_mass={format_rational(a.rhs_mass)}"])
        cache = level_fibers(sys_, k, joining, cfg.grid, tri)
        for eps in cfg.eps:
            d = good_levels(sys_, k, joining, eps, cfg.grid, tri, cache)
            rows.append(["good_fraction", k, f"eps={format_rational(eps)}", d.good_fraction, d.good_fraction,
                         1 - eps, 1 - eps, "info", ""])
    for i, r in enumerate(marginal_audit(joining, sys_, _probe_sets(sys_))):
        rows.append(["marginal", "", f"probe={i}", r["lhs_lo"], r["lhs_hi"], r["rhs"], r["rhs"],
                     "pass" if r["pass"] else "fail", ""])
    columns = ["lemma", "k", "sample", "lhs_lo", "lhs_hi", "rhs_lo", "rhs_hi", "verdict", "note"]
    write_csv(cfg.out / "audit.csv", columns, rows)
    return EXIT_AUDIT if any(r[7] == "fail" for r in rows) else EXIT_OK


# ---------------------------------------------------------------------------
# entry point


COMMANDS = {"verify": (cmd_verify, False), "towers": (cmd_towers, False),
            "approx": (cmd_approx, True), "audit": (cmd_audit, True)}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rrlab", description="Rigid rank-one joining laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--system", default="odometer", help="descriptor JSON path or built-in name")
        s.add_argument("--k-min", type=int, default=1)
        s.add_argument("--k-max", type=int, default=None)
        s.add_argument("--out", default="rrlab_out")
        s.add_argument("--den-cap", type=int, default=None)
        s.add_argument("--digits", type=int, default=None, help="2-adic digit budget")
        if COMMANDS[name][1]:
            s.add_argument("--joining", default="shift1", help="joining JSON path or built-in name")
            s.add_argument("--eps", default=",".join(format_rational(e) for e in DEFAULT_EPS))
            s.add_argument("--grid", type=int, default=DEFAULT_GRID)
            s.add_argument("--tests", type=int, default=4, help="grid size of the square test family")
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    fn, need_joining = COMMANDS[args.command]
    try:
        cfg = Config(args, need_joining)
    except (ConfigError, DescriptorError, JoiningError, DepthExceeded, ValueError) as exc:
        print(f"rrlab: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return fn(cfg)


if __name__ == "__main__":
    sys.exit(main())
