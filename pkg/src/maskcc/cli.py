"""Command-line front end: compile, analyze, simulate, oracle.

Pipeline: parse -> type inference -> security sets -> base model ->
security (+implied) constraints -> branch-and-bound -> assembly + report.

Exit codes: 0 success, 2 parse/validate/input errors, 3 infeasible model,
4 budget exhausted without a solution, 1 other failures (e.g. a --verify
run that finds the output leaky).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import leakage, oracle, secsets, solver
from .bits import mask
from .ir import ParseError, parse_program, validate
from .leakage import Exhaustive, MonteCarlo
from .model import (
    ModelBuildError,
    add_implied_constraints,
    add_security_constraints,
    build_base_model,
    dump_model,
)
from .target import TargetError, resolve_target
from .typeinf import infer_types

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_TIMEOUT = 4

DEFAULT_SEED = 2024


def render_asm(model, sol, harness) -> list[str]:
    """Annotated assembly in the artifact's own dialect."""
    t = model.target
    prog = model.program
    env = model.env
    lines = [
        f"; func {prog.name} width {prog.width}  target {t.name}",
        "; in: "
        + " ".join(
            f"t{ti.id}={t.reg_name(prog.temps[ti.id].input_index)}:{cls}"
            for ti, cls in prog.inputs
        ),
    ]
    v_cycles = dict(sol.cycles)
    for ins in harness.instrs:
        op = prog.op(ins.pos)
        c = v_cycles[ins.pos]
        note = f"c={c}"
        if op.defs:
            d = op.defs[0]
            note += f"  t{d}:{env.cls(prog.temps[d].rep)}"
        if ins.opcode == "store":
            where = _memref_str(t, ins.mem)
            src = _src_str(t, ins.srcs[0])
            text = f"st {src}, {where}"
        elif ins.opcode == "load":
            where = _memref_str(t, ins.mem)
            text = f"ld {t.reg_name(ins.dest)}, {where}"
        elif ins.opcode == "copy":
            text = f"mov {t.reg_name(ins.dest)}, {_src_str(t, ins.srcs[0])}"
        elif ins.opcode == "not":
            text = f"not {t.reg_name(ins.dest)}, {_src_str(t, ins.srcs[0])}"
        else:
            a, b = (_src_str(t, s) for s in ins.srcs)
            dest = t.reg_name(ins.dest)
            if model.two_address(op):
                other = b if a == dest else a
                text = f"{ins.opcode} {dest}, {other}"
            else:
                text = f"{ins.opcode} {dest}, {a}, {b}"
        lines.append(f"{text:<28}; {note}")
    if harness.result_reg is not None:
        lines.append(f"; out: {t.reg_name(harness.result_reg)}")
    return lines


def _src_str(t, src) -> str:
    kind, x = src
    return t.reg_name(x) if kind == "reg" else str(x)


def _memref_str(t, ref) -> str:
    kind, x = ref
    if kind == "slot":
        return f"[S{x}]"
    if kind == "lit":
        return f"[{x}]"
    return f"[{t.reg_name(x)}]"


def analysis_dict(model) -> dict:
    env = model.env
    prog = model.program
    cl = env.classifier
    temps = {}
    for tid in prog.visible_temps():
        e = env.expr(tid)
        temps[f"t{tid}"] = {
            "class": str(env.cls(tid)).capitalize(),
            "expr": str(e),
            "supp": sorted(f"t{x}" for x in cl.supp(e)),
            "unq": sorted(f"t{x}" for x in cl.unq(e)),
            "dom": sorted(f"t{x}" for x in cl.dom(e)),
        }
    sets = secsets.compute_sets(prog, env)
    return {
        "program": prog.name,
        "width": prog.width,
        "temps": temps,
        "sets": secsets.sets_to_dict(sets),
    }


REPORT_FIELDS = {
    "program": str,
    "target": str,
    "width": int,
    "secure": bool,
    "status": str,
    "objective": (int, type(None)),
    "types": dict,
    "sets": dict,
    "solver_stats": dict,
    "verify": (dict, type(None)),
    "asm": list,
}


def validate_report(report: dict) -> list[str]:
    """Schema check for compile reports; empty list means well formed."""
    problems = []
    for key, typ in REPORT_FIELDS.items():
        if key not in report:
            problems.append(f"missing field {key}")
        elif not isinstance(report[key], typ):
            problems.append(f"field {key} has type {type(report[key]).__name__}")
    for key in ("nodes", "propagations", "leaves", "wall_time"):
        if "solver_stats" in report and key not in report["solver_stats"]:
            problems.append(f"missing solver_stats.{key}")
    if report.get("status") not in ("Optimal", "Feasible", "Infeasible", "Timeout"):
        problems.append(f"bad status {report.get('status')!r}")
    return problems


def _read_program(path: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {path}")
    prog = parse_program(p.read_text())
    diags = validate(prog)
    if diags:
        raise ParseError(1, 1, "; ".join(str(d) for d in diags))
    return prog


def _default_secret_pair(prog, width):
    s1, s2 = {}, {}
    for t in prog.secret_inputs():
        s1[t.id] = 0
        s2[t.id] = mask(width)
    return s1, s2


def cmd_compile(args) -> int:
    try:
        prog = _read_program(args.ir)
        target = resolve_target(args.target)
        model = build_base_model(prog, target, copy_budget=args.copy_budget)
    except (ParseError, FileNotFoundError, TargetError, ModelBuildError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    sets = secsets.compute_sets(model.program, model.env)
    if args.secure:
        model = add_security_constraints(model, sets)
        if not args.no_implied:
            model = add_implied_constraints(model, sets)
    if args.dump_model:
        Path(args.dump_model).write_text(json.dumps(dump_model(model), indent=2))
    budget = solver.SolveBudget(seconds=args.budget_seconds, nodes=args.budget_nodes)
    outcome = solver.solve(model, budget)
    report = {
        "program": prog.name,
        "target": target.name,
        "width": prog.width,
        "secure": args.secure,
        "status": outcome.status,
        "objective": outcome.solution.objective if outcome.solution else None,
        "types": {
            k: v["class"] for k, v in analysis_dict(model)["temps"].items()
        },
        "sets": secsets.sets_to_dict(sets),
        "solver_stats": {
            "nodes": outcome.stats.nodes,
            "propagations": outcome.stats.propagations,
            "leaves": outcome.stats.leaves,
            "wall_time": outcome.stats.wall_time,
        },
        "verify": None,
        "asm": [],
    }
    if outcome.status == "Infeasible":
        family = outcome.infeasible_family or "unknown"
        print(
            f"infeasible: {outcome.message} (constraint family: {family})",
            file=sys.stderr,
        )
        _emit(args, report)
        return EXIT_INFEASIBLE
    if outcome.status == "Timeout":
        print("budget exhausted without a solution", file=sys.stderr)
        _emit(args, report)
        return EXIT_TIMEOUT

    sol = outcome.solution
    harness = leakage.linearize(model, sol)
    report["asm"] = render_asm(model, sol, harness)
    if args.dump_solution:
        Path(args.dump_solution).write_text(json.dumps(sol.to_dict(), indent=2))
    rc = EXIT_OK
    if args.verify:
        verdict = _verify(prog, harness, args)
        report["verify"] = {
            "verdict": "Equivalent" if verdict.equivalent else "Leaky",
            "positions": [list(p) for p in verdict.positions],
            "delta_mean": str(verdict.delta_mean),
            "delta_var": str(verdict.delta_var),
        }
        if not verdict.equivalent:
            print("verification failed: output is leaky", file=sys.stderr)
            rc = EXIT_FAIL
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{prog.name}.s").write_text("\n".join(report["asm"]) + "\n")
    (out_dir / f"{prog.name}.report.json").write_text(json.dumps(report, indent=2))
    _emit(args, report)
    return rc


def _verify(prog, harness, args):
    s1, s2 = _default_secret_pair(prog, prog.width)
    pub = {t.id: 0 for t in prog.public_inputs()}
    if leakage.exhaustive_ok(harness):
        sampling = Exhaustive()
    else:
        sampling = MonteCarlo(seed=args.seed)
    return leakage.check_equivalence(harness, pub, (s1, s2), sampling)


def _emit(args, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))


def cmd_analyze(args) -> int:
    from .model import elaborate

    try:
        prog = _read_program(args.ir)
        elab = elaborate(prog, copy_budget=args.copy_budget)
        env = infer_types(elab)
    except (ParseError, FileNotFoundError, ModelBuildError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    payload = analysis_dict(_AnalysisView(elab, env))
    print(json.dumps(payload, indent=2))
    return EXIT_OK


class _AnalysisView:
    def __init__(self, program, env):
        self.program = program
        self.env = env


def cmd_simulate(args) -> int:
    try:
        prog = _read_program(args.ir)
        target = resolve_target(args.target)
        model = build_base_model(prog, target, copy_budget=args.copy_budget)
    except (ParseError, FileNotFoundError, TargetError, ModelBuildError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.secure:
        sets = secsets.compute_sets(model.program, model.env)
        model = add_security_constraints(model, sets)
        model = add_implied_constraints(model, sets)
    outcome = solver.solve(
        model, solver.SolveBudget(seconds=args.budget_seconds, nodes=args.budget_nodes)
    )
    if outcome.status == "Infeasible":
        print("infeasible model", file=sys.stderr)
        return EXIT_INFEASIBLE
    if outcome.status == "Timeout":
        return EXIT_TIMEOUT
    harness = leakage.linearize(model, outcome.solution)

    width = prog.width
    secret_ids = [t.id for t in prog.secret_inputs()]
    if args.secrets:
        parts = [int(x, 0) for x in args.secrets.split(",")]
        half = len(parts) // 2
        s1 = dict(zip(secret_ids, parts[:half]))
        s2 = dict(zip(secret_ids, parts[half:]))
    else:
        s1, s2 = _default_secret_pair(prog, width)
    pub_ids = [t.id for t in prog.public_inputs()]
    if args.pub:
        pub = dict(zip(pub_ids, (int(x, 0) for x in args.pub.split(","))))
    else:
        pub = {t: 0 for t in pub_ids}
    if args.samples:
        sampling = MonteCarlo(samples=args.samples, seed=args.seed)
    elif args.exhaustive or leakage.exhaustive_ok(harness):
        sampling = Exhaustive()
    else:
        sampling = MonteCarlo(seed=args.seed)

    verdict = leakage.check_equivalence(harness, pub, (s1, s2), sampling)
    stats = leakage.leak_stats(harness, {**pub, **s1}, sampling)
    values = {**pub, **s1}
    for t in prog.random_inputs():
        values[t.id] = 0
    _, trace = leakage.simulate(harness.instrs, width, harness.initial_regs(values))
    payload = {
        "program": prog.name,
        "verdict": "Equivalent" if verdict.equivalent else "Leaky",
        "positions": [list(p) for p in verdict.positions],
        "delta_mean": str(verdict.delta_mean),
        "delta_var": str(verdict.delta_var),
        "per_position": {
            f"o{pos}:{kind}": {
                "mean": str(stats.mean[(pos, kind)]),
                "var": str(stats.var[(pos, kind)]),
            }
            for pos, kind in stats.positions
        },
        "trace_sample": [[o.pos, o.kind, o.value] for o in trace],
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK if verdict.equivalent else EXIT_FAIL


def cmd_oracle(args) -> int:
    try:
        prog = _read_program(args.ir)
        target = resolve_target(args.target)
        base = build_base_model(prog, target, copy_budget=args.copy_budget)
    except (ParseError, FileNotFoundError, TargetError, ModelBuildError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    sets = secsets.compute_sets(base.program, base.env)
    secure = add_security_constraints(base, sets)
    try:
        report = oracle.compare_with_solver(
            base, secure, op_bound=args.bound, count_slack=args.slack
        )
    except oracle.OracleError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if not report.discrepancies else EXIT_FAIL


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="maskcc",
        description="leak-aware code generation for masked straight-line kernels",
    )
    ap.add_argument("--json", action="store_true", help="echo reports to stdout")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("compile", help="generate leak-free assembly")
    c.add_argument("ir")
    c.add_argument("--seed", type=int, default=DEFAULT_SEED)
    c.add_argument("--target", default="thumb-like")
    c.add_argument("--secure", dest="secure", action="store_true", default=True)
    c.add_argument("--insecure", dest="secure", action="store_false")
    c.add_argument("--no-implied", action="store_true")
    c.add_argument("--copy-budget", default="full", choices=["none", "reg", "full"])
    c.add_argument("--budget-seconds", type=float, default=60.0)
    c.add_argument("--budget-nodes", type=int, default=None)
    c.add_argument("--dump-model", default=None)
    c.add_argument("--dump-solution", default=None)
    c.add_argument("--verify", action="store_true")
    c.add_argument("--out-dir", default=".")
    c.set_defaults(func=cmd_compile)

    a = sub.add_parser("analyze", help="types and security sets as JSON")
    a.add_argument("ir")
    a.add_argument("--copy-budget", default="full", choices=["none", "reg", "full"])
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="simulate a compiled kernel and check leakage")
    s.add_argument("ir")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--target", default="thumb-like")
    s.add_argument("--secure", dest="secure", action="store_true", default=True)
    s.add_argument("--insecure", dest="secure", action="store_false")
    s.add_argument("--copy-budget", default="full", choices=["none", "reg", "full"])
    s.add_argument("--secrets", default=None, help="comma list: first half vs second")
    s.add_argument("--pub", default=None, help="comma list of public input values")
    s.add_argument("--exhaustive", action="store_true")
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--budget-seconds", type=float, default=60.0)
    s.add_argument("--budget-nodes", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="brute-force cross-check of the solver")
    o.add_argument("ir")
    o.add_argument("--target", default="thumb-like")
    o.add_argument("--bound", type=int, default=8)
    o.add_argument("--slack", type=int, default=0)
    o.add_argument("--copy-budget", default="none", choices=["none", "reg", "full"])
    o.set_defaults(func=cmd_oracle)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
