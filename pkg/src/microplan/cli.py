"""Command-line front end: ``microplan plan|sweep|audit``.

Exit codes: 0 ok, 1 bad input, 2 infeasible, 3 solver limit or numerical
failure, 4 oracle disagreement or AC divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import (Diverged, InfeasibleError, InputError, IslandedBus, MicroplanError, NumericalFailure,
                     SolverLimitError, TooManyBinaries)
from .grid_model import builtin_case33, load_problem, toy4
from .grid_model.types import DerKind
from .milp import MILP_OPTIMAL

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_ORACLE = 0, 1, 2, 3, 4
AXES = ("beta", "load", "price")
VERIFY_TOL = 1e-6

log = logging.getLogger("microplan")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    with_lines: bool = True  # run every value with and without candidate lines

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")

    def cells(self):
        """``(value, lines)`` pairs in output order; ``lines`` is False for the without-lines run."""
        out = []
        for v in self.values:
            if self.with_lines:
                out += [(v, False), (v, True)]
            else:
                out.append((v, True))
        return out


def apply_axis(problem, axis, value):
    if axis == "beta":
        return problem.with_economics(critical_ratio=value)
    if axis == "load":
        return problem.scaled(load=value)
    return problem.scaled(price=value)


def load_case(args):
    """Resolve ``--case`` and the case-shaping flags into a :class:`PlanningProblem`."""
    name = args.case
    if name == "builtin33":
        problem = builtin_case33(profile_seed=args.seed, rep_days_per_year=args.rep_days,
                                 horizon_years=args.years or 20)
    elif name == "toy4":
        problem = toy4()
    else:
        path = Path(name)
        if not path.is_file():
            raise InputError(f"case file {name} not found")
        problem = load_problem(path)
    if args.years and name != "builtin33":
        problem = problem.with_economics(horizon_years=args.years)
    if args.beta is not None:
        problem = problem.with_economics(critical_ratio=args.beta)
    if args.load_scale != 1.0 or args.price_scale != 1.0:
        problem = problem.scaled(load=args.load_scale, price=args.price_scale)
    if args.no_candidate_lines:
        problem = problem.without_candidate_lines()
    if getattr(args, "dv", None) is not None:
        problem = problem.with_dv_bounds(args.dv)
    return problem


def solve_options(args):
    from .planner import SolveOptions

    return SolveOptions(gap_tol=args.gap, iterate=getattr(args, "iterate", False))


def _dollars(v) -> str:
    return f"{v:.0f}"


def write_cost_table(plan, path):
    c = plan.costs
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "dollars"])
        w.writerow(["Investment Cost ($)", _dollars(c.investment)])
        w.writerow(["Operation Cost ($)", _dollars(c.operation)])
        w.writerow(["Reliability Cost ($)", _dollars(c.reliability)])
        w.writerow(["Planning Cost ($)", _dollars(c.total)])


def read_csv_table(path) -> list[dict]:
    """Parse any CSV written by this tool into a list of row dicts (values as strings)."""
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _verify(problem, plan, out):
    from .oracle import brute_force_plan

    first = plan.stage_info.stage1_plan if plan.stage_info else plan
    try:
        ref = brute_force_plan(problem)
    except TooManyBinaries as exc:
        print(f"verify: skipped ({exc})", file=out)
        return True
    rel = abs(first.objective - ref.objective) / (1.0 + abs(ref.objective))
    ok = rel <= VERIFY_TOL
    print(f"verify: stage-1 objective {first.objective:.6f} vs enumeration {ref.objective:.6f} "
          f"(rel {rel:.2e}) {'ok' if ok else 'MISMATCH'}", file=out)
    return ok


def cmd_plan(args, out=None) -> int:
    from .planner import solve_two_stage, write_dispatch_csv, write_plan_json

    out = out or sys.stdout
    problem = load_case(args)
    plan = solve_two_stage(problem, solve_options(args))
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    write_plan_json(plan, problem, dest / "plan.json")
    write_dispatch_csv(plan, problem, dest / "dispatch.csv")
    write_cost_table(plan, dest / "costs.csv")
    print(f"status {plan.status}", file=out)
    for d in sorted(plan.installed_ders, key=lambda d: d.id):
        extra = f", {d.c_max:.3f} MWh" if d.kind is DerKind.STORAGE else ""
        print(f"DER {d.id} ({d.name or d.kind.value}) at bus {d.bus}: {d.p_max:.3f} MW{extra}", file=out)
    print("lines: " + (", ".join(str(l) for l in plan.installed_lines) or "-"), file=out)
    c = plan.costs
    print(f"Investment Cost ($) {_dollars(c.investment)}", file=out)
    print(f"Operation Cost ($) {_dollars(c.operation)}", file=out)
    print(f"Reliability Cost ($) {_dollars(c.reliability)}", file=out)
    print(f"Planning Cost ($) {_dollars(c.total)}", file=out)
    if args.verify and not _verify(problem, plan, out):
        return EXIT_ORACLE
    return EXIT_OK if plan.status == MILP_OPTIMAL else EXIT_LIMIT


def _run_cell(problem, options):
    """Solve one sweep cell; returns ``(status code, plan or None)``."""
    from .planner import solve_two_stage

    try:
        plan = solve_two_stage(problem, options)
    except InfeasibleError:
        return "infeasible", None
    except (SolverLimitError, NumericalFailure):
        return "limit", None
    except InputError:
        return "input", None
    return ("ok" if plan.status == MILP_OPTIMAL else "gap"), plan


def _cell_label(axis, value, lines):
    return f"{axis}_{value:g}_{'with' if lines else 'without'}_lines"


def cmd_sweep(args, out=None) -> int:
    from .planner import write_plan_json

    out = out or sys.stdout
    spec = SweepSpec(args.axis, tuple(args.values), with_lines=not args.no_candidate_lines)
    base = load_case(args)
    options = solve_options(args)
    problems = []
    for value, lines in spec.cells():
        p = apply_axis(base, spec.axis, value)
        problems.append(p if lines else p.without_candidate_lines())
    workers = max(1, int(os.environ.get("MICROPLAN_THREADS", "1") or 1))
    if workers > 1 and len(problems) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(problems))) as pool:
            results = list(pool.map(_run_cell, problems, [options] * len(problems)))
    else:
        results = [_run_cell(p, options) for p in problems]

    dest = Path(args.out)
    (dest / "cells").mkdir(parents=True, exist_ok=True)
    ders = base.der_candidates
    plan_rows = [[spec.axis, "lines", "status"] + [f"der_{d.id}_mw" for d in ders] + ["installed_lines"]]
    cost_rows = [[spec.axis, "lines", "status", "investment", "operation", "reliability", "planning"]]
    for (value, lines), problem, (status, plan) in zip(spec.cells(), problems, results):
        tag = "w/ lines" if lines else "w/o lines"
        if plan is None:
            plan_rows.append([f"{value:g}", tag, status] + [""] * len(ders) + [""])
            cost_rows.append([f"{value:g}", tag, status, "", "", "", ""])
            print(f"{spec.axis}={value:g} {tag}: {status}", file=out)
            continue
        caps = [f"{plan.der(d.id).p_max:.2f}" if plan.der(d.id) else "0.00" for d in ders]
        lines_txt = ";".join(str(l) for l in plan.installed_lines) or "-"
        plan_rows.append([f"{value:g}", tag, status] + caps + [lines_txt])
        c = plan.costs
        cost_rows.append([f"{value:g}", tag, status, _dollars(c.investment), _dollars(c.operation),
                          _dollars(c.reliability), _dollars(c.total)])
        write_plan_json(plan, problem, dest / "cells" / f"{_cell_label(spec.axis, value, lines)}.json")
        print(f"{spec.axis}={value:g} {tag}: planning {_dollars(c.total)} investment {_dollars(c.investment)} "
              f"lines {lines_txt}", file=out)
    for name, rows in (("sweep_plan.csv", plan_rows), ("sweep_costs.csv", cost_rows)):
        with (dest / name).open("w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    return EXIT_OK


def cmd_audit(args, out=None) -> int:
    from .oracle import linearization_audit
    from .planner import solve_two_stage

    out = out or sys.stdout
    problem = load_case(args)
    plan = solve_two_stage(problem, solve_options(args))
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    for p in (plan.stage_info.stage1_plan, plan):
        rep = linearization_audit(p, problem)
        rep.write_csv(dest / f"audit_stage{p.stage}.csv")
        print(f"stage {p.stage}: max |dPL| {rep.max_abs_p_error:.6f} MW ({100 * rep.max_rel_limit_error:.3f}% of limit), "
              f"mean {rep.mean_abs_p_error:.6f} MW; max |dV| {rep.max_abs_dv_error:.6f} pu, "
              f"mean {rep.mean_abs_dv_error:.6f} pu; {rep.periods_audited} periods", file=out)
    return EXIT_OK


def _case_flags(p):
    p.add_argument("--case", default="builtin33", help="case file, or builtin33 / toy4")
    p.add_argument("--beta", type=float, default=None, help="critical load ratio")
    p.add_argument("--load-scale", type=float, default=1.0)
    p.add_argument("--price-scale", type=float, default=1.0)
    p.add_argument("--no-candidate-lines", action="store_true")
    p.add_argument("--rep-days", type=int, default=2, help="representative days per year (builtin33)")
    p.add_argument("--years", type=int, default=None, help="planning horizon in years")
    p.add_argument("--seed", type=int, default=1, help="profile seed (builtin33)")
    p.add_argument("--gap", type=float, default=1e-6, help="relative MIP gap")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--iterate", action="store_true", help="repeat stage two until voltages settle")
    p.add_argument("-v", "--verbose", action="store_true")


def _values(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="microplan", description="Microgrid DER and line co-planning.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plan", help="solve one planning case")
    _case_flags(p)
    p.add_argument("--verify", action="store_true", help="cross-check stage one by enumeration")
    p.set_defaults(func=cmd_plan)
    s = sub.add_parser("sweep", help="sensitivity sweep over beta, load or price")
    _case_flags(s)
    s.add_argument("--axis", choices=AXES, default="beta")
    s.add_argument("--values", type=_values, default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
                   help="comma-separated, strictly increasing")
    s.set_defaults(func=cmd_sweep)
    a = sub.add_parser("audit", help="compare linearised flows with AC power flow")
    _case_flags(a)
    a.add_argument("--dv", type=float, default=None, help="symmetric voltage-deviation bound (p.u.)")
    a.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SolverLimitError, NumericalFailure) as exc:
        print(f"solver: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (Diverged, IslandedBus) as exc:
        print(f"oracle: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except MicroplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
