"""Command-line interface: validate, solve, compare, ulm, gen.

Exit codes: 0 ok, 1 I/O or parse error, 2 validation failure, 3 cap
exceeded, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import sys
import time
from pathlib import Path

import numpy as np

from . import generate as gen_mod
from .errors import CapExceeded, NoConvergence, PosetError, ValidationFailed
from .functions import Instance, cost_of
from .greedy import GreedyConfig, continuous_cost, run as greedy_run
from .io import ParseError, dumps, instance_to_dict, load_instance, names_of, save_instance
from .multilinear import eval_exact
from .oracle import exact_opt
from .poset import is_ideal
from .rounding import RoundingConfig, solve
from .ulm import ulm, verify_straightness

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_CAP, EXIT_NOCONV = 0, 1, 2, 3, 4


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _usage(inst: Instance, X) -> list[dict]:
    return [{"label": c.label, "used": cost_of(c, X), "budget": c.budget} for c in inst.constraints]


def _greedy_cfg(args) -> GreedyConfig:
    mode = "exact" if args.exact_gradient else "auto"
    return GreedyConfig(epsilon=args.epsilon_greedy, gradient_mode=mode, seed=args.seed)


def _rounding_cfg(args) -> RoundingConfig:
    return RoundingConfig(epsilon=args.epsilon_round, enumeration_cap=args.enum_cap, trials=args.trials,
                          seed=args.seed, greedy=_greedy_cfg(args))


def _config_echo(args) -> dict:
    return {"seed": args.seed, "epsilon_greedy": args.epsilon_greedy, "epsilon_round": args.epsilon_round,
            "trials": args.trials, "enum_cap": args.enum_cap, "continuous_only": args.continuous_only,
            "exact_gradient": args.exact_gradient}


def build_report(inst: Instance, args) -> dict:
    P = inst.poset
    t0 = time.perf_counter()
    report = {"schema_version": 1, "command": "solve", "config": _config_echo(args), "dr_status": inst.dr_status}
    if args.continuous_only:
        x, trace = greedy_run(inst, _greedy_cfg(args))
        report["continuous"] = {
            "point": {P.name(p): float(x[p]) for p in range(P.n)},
            "value": float(eval_exact(inst.objective, P, x)) if trace.final_value is None else trace.final_value,
            "iterations": len(trace.steps), "escapes": trace.escapes,
            "usage": [{"label": c.label, "used": continuous_cost(c, x), "budget": c.budget} for c in inst.constraints],
            "trace": [{"k": s.k, "branch": s.branch, "value": s.value, "usage": s.usage} for s in trace.steps],
        }
    else:
        res = solve(inst, _rounding_cfg(args))
        report["solution"] = names_of(P, res.ideal)
        report["value"] = res.value
        report["feasible"] = bool(is_ideal(P, res.ideal) and inst.is_feasible(res.ideal))
        report["usage"] = _usage(inst, res.ideal)
        report["rounding"] = {
            "trials": len(res.trial_values), "mean": res.mean, "half_width": res.half_width,
            "rejection_rate": res.rejection_rate, "rejections": res.rejections, "calls": res.calls,
            "max_removals": res.max_removals, "removal_bound": res.removal_bound,
            "fallbacks": res.fallbacks, "pushdown_skips": res.pushdown_skips, "infeasible": res.infeasible,
            "enumeration_size": res.enumeration_size, "enumeration_limit": res.enumeration_limit,
            "enumeration_truncated": res.enumeration_truncated, "branches": res.branches,
        }
        report["continuous"] = {"greedy_runs": res.greedy_runs, "escapes": res.greedy_escapes,
                                "value_full_problem": res.continuous_value}
    if args.timing:
        report["timing_seconds"] = time.perf_counter() - t0
    return report


def cmd_validate(args) -> int:
    inst, _ = load_instance(args.instance)
    if inst.dr_status == "assumed":
        print("warning: too many ideals for brute-force checks; DR-submodularity and monotonicity assumed",
              file=sys.stderr)
    print(f"ok: {inst.n} elements, {len(inst.constraints)} constraints, dr {inst.dr_status}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst, _ = load_instance(args.instance)
    report = build_report(inst, args)
    text = dumps(report) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        if "solution" in report:
            print(f"value {report['value']:.6g}  solution {{{', '.join(report['solution'])}}}  "
                  f"mean {report['rounding']['mean']:.6g} +- {report['rounding']['half_width']:.2g}")
        else:
            print(f"continuous value {report['continuous']['value']:.6g}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    inst, _ = load_instance(args.instance)
    opt = exact_opt(inst)
    res = solve(inst, _rounding_cfg(args))
    P = inst.poset
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "value", "opt", "ratio", "feasible"])
    for t, (X, v) in enumerate(zip(res.trial_ideals, res.trial_values)):
        ratio = 1.0 if opt.value == 0 and v == 0 else (v / opt.value if opt.value else float("inf"))
        feas = is_ideal(P, X) and inst.is_feasible(X)
        w.writerow([t, format(v, ".17g"), format(opt.value, ".17g"), format(ratio, ".17g"), int(feas)])
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    ratios = [1.0 if opt.value == 0 and v == 0 else v / opt.value for v in res.trial_values] if opt.value else [1.0]
    print(f"mean ratio {np.mean(ratios):.6f}  min {np.min(ratios):.6f}  optimum {opt.value:.6g} "
          f"{{{', '.join(names_of(P, opt.ideal))}}}", file=sys.stderr)
    return EXIT_OK


def _parse_point(text: str, inst: Instance, loc: str) -> np.ndarray:
    n = inst.n
    if text in ("bottom", "bot"):
        return np.zeros(n)
    if text == "top":
        return np.ones(n)
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ParseError(f"cannot parse point {text!r}", loc) from None
    if len(vals) != n:
        raise ParseError(f"expected {n} coordinates, got {len(vals)}", loc)
    return np.array(vals)


def cmd_ulm(args) -> int:
    from .complex import is_member

    inst, _ = load_instance(args.instance, validate=False)
    P = inst.poset
    x = _parse_point(args.from_, inst, "--from")
    y = _parse_point(args.to, inst, "--to")
    for nm, v in (("--from", x), ("--to", y)):
        if not is_member(P, v):
            raise ValidationFailed(f"{nm} point is not in the complex")
    m = ulm(P, x, y)
    if m.is_constant:
        ts = [0.0]
    else:
        grid = np.linspace(0.0, 1.0, max(args.samples, 2)).tolist()
        ts = sorted(set(grid) | set(m.breakpoints))
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [P.name(p) for p in range(P.n)])
    for t in ts:
        w.writerow([format(t, ".17g")] + [format(float(v), ".17g") for v in m(t)])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    rep = verify_straightness(m)
    print("breakpoints: " + " ".join(format(t, ".17g") for t in m.breakpoints), file=sys.stderr)
    print("speeds: " + " ".join(f"{P.name(p)}={s:.17g}" for p, s in enumerate(m.speeds) if s), file=sys.stderr)
    print(f"straight: {rep.ok} ({len(rep.checks)} face crossings, residual {rep.residual:.3g})", file=sys.stderr)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.budget_frac is not None and args.budget_frac < 0:
        raise ValueError("budget fraction must be non-negative")
    inst = gen_mod.generate(args.family, args.n, seed=args.seed, constraints=args.constraints,
                            objective=args.objective, budget_frac=args.budget_frac)
    fixture = None
    if inst.n <= 16:
        opt = exact_opt(inst)
        fixture = {"optimum": names_of(inst.poset, opt.ideal), "value": opt.value}
    if args.out:
        save_instance(inst, args.out, fixture)
    else:
        sys.stdout.write(dumps(instance_to_dict(inst, fixture)) + "\n")
    return EXIT_OK


def _add_solver_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon-greedy", type=float, default=0.05)
    p.add_argument("--epsilon-round", type=float, default=0.3)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--enum-cap", type=int, default=2)
    p.add_argument("--continuous-only", action="store_true")
    p.add_argument("--exact-gradient", action="store_true")
    p.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
    p.add_argument("--out")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lattice-dr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check poset, costs and objective of an instance file")
    p.add_argument("instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="run the solver and write a report")
    p.add_argument("instance")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="solver versus brute-force optimum, per trial")
    p.add_argument("instance")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ulm", help="dump a uniform linear motion as CSV")
    p.add_argument("instance")
    p.add_argument("--from", dest="from_", default="bottom", help="'bottom', 'top' or comma-separated coordinates")
    p.add_argument("--to", default="top")
    p.add_argument("--samples", type=int, default=31)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ulm)

    p = sub.add_parser("gen", help="generate a validated random instance")
    p.add_argument("family", choices=gen_mod.FAMILIES)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--constraints", type=int, default=1)
    p.add_argument("--objective", choices=gen_mod.OBJECTIVES)
    p.add_argument("--budget-frac", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        _err(str(e))
        return EXIT_IO
    except (ValidationFailed, PosetError) as e:
        _err(str(e))
        rep = getattr(e, "report", None)
        if rep is not None and rep.witness:
            print(f"witness: {rep.witness}", file=sys.stderr)
        return EXIT_VALIDATION
    except CapExceeded as e:
        _err(str(e))
        return EXIT_CAP
    except NoConvergence as e:
        _err(str(e))
        return EXIT_NOCONV
    except ValueError as e:
        _err(str(e))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
