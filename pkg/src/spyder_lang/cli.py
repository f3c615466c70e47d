"""Command-line driver: check, synth, run, emit-smt and bench."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import imp
from . import syntax as spy
from .analysis import TranslationContext, WellFormednessError, program_violations
from .frontend import SourceError, load_program
from .printer import inv_str, pretty_print, program_str
from .synth import PatchGrammar, SynthesisFailure, enforce_procedure
from .verify import BoundedDomain, HoareGoal, check_triple_spy, emit_smtlib

EXIT_OK, EXIT_VERIFY, EXIT_SYNTH, EXIT_INPUT = 0, 1, 2, 3

CORPUS = Path(__file__).parent / "corpus"


class InputError(Exception):
    pass


# -- shared plumbing --------------------------------------------------------


def _int_range(text: str):
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo:hi, e.g. -4:4") from None
    if lo > hi:
        raise argparse.ArgumentTypeError("lo must not exceed hi")
    return lo, hi


def _sizes(text: str):
    try:
        sizes = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated lengths, e.g. 1,2,3") from None
    if not sizes or any(n <= 0 for n in sizes):
        raise argparse.ArgumentTypeError("lengths must be positive")
    return sizes


def _domain(args) -> BoundedDomain:
    lo, hi = args.int_range
    return BoundedDomain(lo, hi, args.sizes, sample_budget=args.budget, rng_seed=args.seed)


def _load(path: str):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        rp = load_program(text)
    except SourceError as exc:
        raise InputError(exc.format(path)) from None
    bad = program_violations(rp.program)
    if bad:
        raise InputError("\n".join(f"{path}: well-formedness: {where}: {v}" for where, v in bad))
    return rp.program


def _procedures(prog, names):
    if not names:
        return list(prog.procedures)
    out = []
    for n in names:
        try:
            out.append(prog.procedure(n))
        except KeyError:
            raise InputError(f"no procedure named {n!r}") from None
    return out


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- check ------------------------------------------------------------------


def check_program(prog, dom, names=()) -> list:
    """Verdict rows for every (procedure, invariant) pair."""
    phi = prog.invariant()
    rows = []
    for proc in _procedures(prog, names):
        ctx = TranslationContext.for_program(prog, [n for n, _ in proc.params])
        for k, inv in enumerate(prog.invariants):
            v = check_triple_spy(HoareGoal(phi, proc.body, inv, ctx), dom, prog)
            row = {"procedure": proc.name, "invariant": k, "text": inv_str(inv), "verdict": v.status}
            if v.is_invalid:
                row["counterexample"] = v.counterexample.to_json()
                row["reason"] = v.condition
            elif v.is_unknown:
                row["reason"] = v.condition
            rows.append(row)
    return rows


def cmd_check(args) -> int:
    prog = _load(args.file)
    rows = check_program(prog, _domain(args), args.procedure)
    if args.format == "json":
        _emit(json.dumps(rows, indent=2, sort_keys=True) + "\n", args.out)
    else:
        lines = []
        for r in rows:
            line = f"{r['procedure']}: invariant {r['invariant']} ({r['text']}): {r['verdict']}"
            if "counterexample" in r:
                line += f"\n  counterexample: {json.dumps(r['counterexample'], sort_keys=True)}"
            elif "reason" in r:
                line += f" ({r['reason']})"
            lines.append(line)
        _emit("".join(l + "\n" for l in lines), args.out)
    return EXIT_OK if all(r["verdict"] == "valid" for r in rows) else EXIT_VERIFY


# -- synth ------------------------------------------------------------------


def _failure_text(name, exc: SynthesisFailure) -> str:
    lines = [f"synthesis failed in {name}: {exc.reason} at {exc.path or 'procedure start'}"]
    if exc.pre is not None:
        pre = exc.pre.as_inv() if hasattr(exc.pre, "as_inv") else exc.pre
        lines.append(f"  pre:      {inv_str(pre) if pre is not None else '(after a loop)'}")
    if exc.post is not None:
        lines.append(f"  post:     {inv_str(exc.post)}")
    lines.append(f"  writable: {', '.join(exc.writable) or '(none)'}")
    if exc.counterexample is not None:
        lines.append(f"  failing state: {json.dumps(exc.counterexample.to_json(), sort_keys=True)}")
    return "\n".join(lines)


def synthesize(prog, dom, grammar, names=()):
    """Complete the procedures; returns (program, reports, failures)."""
    reports, failures = [], []
    for proc in _procedures(prog, names):
        try:
            new, report = enforce_procedure(prog, proc.name, dom, grammar)
        except SynthesisFailure as exc:
            failures.append((proc.name, exc))
            continue
        prog = prog.replace_procedure(new)
        reports.append(report)
    return prog, reports, failures


def cmd_synth(args) -> int:
    prog = _load(args.file)
    grammar = PatchGrammar(depth_limit=args.depth)
    patched, reports, failures = synthesize(prog, _domain(args), grammar, args.procedure)
    text = program_str(patched)
    doc = json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    if args.report:
        Path(args.report).write_text(doc)
    if args.format == "json" and not args.out:
        sys.stdout.write(doc)
    else:
        _emit(text, args.out)
        if args.format == "json":
            sys.stdout.write(doc)
    for name, exc in failures:
        print(_failure_text(name, exc), file=sys.stderr)
    return EXIT_SYNTH if failures else EXIT_OK


# -- run --------------------------------------------------------------------


def _read_state(path: str, prog, proc):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: cannot read state: {exc}") from None
    scalars = dict(data.get("scalars", {}))
    arrays = {k: list(v) for k, v in data.get("arrays", {}).items()}
    params = {n for n, _ in proc.params}
    for name in prog.scalars:
        if name not in scalars:
            raise InputError(f"{path}: missing scalar {name!r}")
    sizes = prog.size_map
    for name in prog.collections:
        if name not in arrays:
            raise InputError(f"{path}: missing array {name!r}")
        if name in sizes and len(arrays[name]) != sizes[name]:
            raise InputError(f"{path}: {name} must have {sizes[name]} elements")
    bad = [n for n, v in scalars.items() if type(v) is not int]
    bad += [n for n, v in arrays.items() if any(type(x) is not int for x in v)]
    if bad:
        raise InputError(f"{path}: {bad[0]}: values must be integers")
    args = {n: scalars.pop(n) for n in list(scalars) if n in params}
    return imp.ImpState(scalars, arrays), args


def _holds(prog, state) -> bool:
    f = imp.translate_inv(prog.invariant(), TranslationContext(), check=False)
    try:
        return imp.eval_expr(f, state) is True
    except imp.Fault:
        return False


def cmd_run(args) -> int:
    prog = _load(args.file)
    [proc] = _procedures(prog, [args.proc])
    state, call = _read_state(args.state, prog, proc)
    for item in args.arg or []:
        name, _, value = item.partition("=")
        try:
            call[name] = int(value)
        except ValueError:
            raise InputError(f"--arg expects name=int, got {item!r}") from None
    missing = [n for n, _ in proc.params if n not in call]
    if missing:
        raise InputError(f"missing argument {missing[0]!r} (give it in the state file or with --arg)")
    if args.assert_invariants and not _holds(prog, state):
        print("invariant violated on entry", file=sys.stderr)
        return EXIT_VERIFY
    ctx = TranslationContext.for_program(prog, list(call))
    m = imp.Machine({**state.cells(), **call}, state.sizes(), steps=imp.DEFAULT_STEP_BUDGET)
    for s in proc.body:
        # statement by statement so a fault names the top-level statement
        try:
            m.exec(imp.translate_stmt((s,), ctx))
        except (imp.Fault, imp.NeedCell) as exc:
            print(f"fault: {exc} in\n{pretty_print((s,))}", file=sys.stderr)
            return EXIT_VERIFY
    out = imp.ImpState.from_cells(m.values, m.sizes)
    out = imp.ImpState({k: v for k, v in out.scalars.items() if k in state.scalars}, out.arrays)
    doc = out.to_json()
    if args.format == "json":
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        lines = [f"{k} = {v}" for k, v in sorted(doc["scalars"].items())]
        lines += [f"{k} = {v}" for k, v in sorted(doc["arrays"].items())]
        _emit("".join(l + "\n" for l in lines), args.out)
    if args.assert_invariants and not _holds(prog, out):
        print("invariant violated on exit", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- emit-smt ---------------------------------------------------------------


def cmd_emit_smt(args) -> int:
    prog = _load(args.file)
    phi = prog.invariant()
    parts = []
    for proc in _procedures(prog, args.procedure):
        ctx = TranslationContext.for_program(prog, [n for n, _ in proc.params])
        parts.append(f"; procedure {proc.name}\n" + emit_smtlib(HoareGoal(phi, proc.body, phi, ctx), prog))
    _emit("\n".join(parts), args.out)
    return EXIT_OK


# -- bench ------------------------------------------------------------------


def bench_file(path: Path, dom, grammar) -> dict:
    row = {"benchmark": path.stem}
    try:
        prog = _load(str(path))
    except InputError as exc:
        return {**row, "error": str(exc)}
    row["spec_size"] = sum(spy.ast_size(i) for i in prog.invariants)
    row["impl_size"] = sum(spy.ast_size(p) for p in prog.procedures)
    start = time.perf_counter()
    patched, reports, failures = synthesize(prog, dom, grammar)
    row["seconds"] = round(time.perf_counter() - start, 3)
    row["locs"] = sum(r.locs for r in reports)
    row["patch_size"] = sum(r.patch_size for r in reports)
    row["verdicts"] = {r.procedure: r.verdicts for r in reports}
    if failures:
        row["failures"] = {name: exc.reason for name, exc in failures}
    return row


def cmd_bench(args) -> int:
    root = Path(args.corpus) if args.corpus else CORPUS
    if not root.is_dir():
        raise InputError(f"{root}: not a directory")
    dom, grammar = _domain(args), PatchGrammar(depth_limit=args.depth)
    rows = []
    for path in sorted(root.glob("*.spy")):
        rows.append(bench_file(path, dom, grammar))
        if args.format == "text":
            print(_bench_line(rows[-1]), file=sys.stderr)
    if args.format == "json":
        _emit(json.dumps(rows, indent=2, sort_keys=True) + "\n", args.out)
    else:
        head = f"{'benchmark':<18} {'spec':>5} {'impl':>5} {'locs':>5} {'size':>5} {'secs':>8}  status"
        _emit("".join(l + "\n" for l in [head] + [_bench_line(r) for r in rows]), args.out)
    return EXIT_OK


def _bench_line(r) -> str:
    if "error" in r:
        return f"{r['benchmark']:<18} error: {r['error']}"
    if "failures" in r:
        status = "failed: " + ", ".join(f"{k} ({v})" for k, v in sorted(r["failures"].items()))
    else:
        status = "ok"
    return (f"{r['benchmark']:<18} {r['spec_size']:>5} {r['impl_size']:>5} {r['locs']:>5} "
            f"{r['patch_size']:>5} {r['seconds']:>8.2f}  {status}")


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--int-range", type=_int_range, default=(-4, 4), metavar="LO:HI",
                        help="integer range of the bounded domain (default -4:4)")
    common.add_argument("--sizes", type=_sizes, default=(1, 2, 3), metavar="N,N,..",
                        help="collection lengths to check (default 1,2,3)")
    common.add_argument("--budget", type=int, default=200_000,
                        help="states to enumerate before sampling (default 200000)")
    common.add_argument("--seed", type=int, default=0, help="seed for sampling")
    common.add_argument("--depth", type=int, default=3, help="patch expression depth limit")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--out", help="write the main output here instead of stdout")

    ap = argparse.ArgumentParser(prog="spyder", description="Spyder compiler and patch synthesizer")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", parents=[common], help="verify procedures against the invariants")
    p.add_argument("file")
    p.add_argument("--procedure", action="append", help="only this procedure (repeatable)")
    p = sub.add_parser("synth", parents=[common], help="patch procedures so they keep the invariants")
    p.add_argument("file")
    p.add_argument("--procedure", action="append", help="only this procedure (repeatable)")
    p.add_argument("--report", help="write the JSON patch report here")
    p = sub.add_parser("run", parents=[common], help="run a procedure on a JSON state")
    p.add_argument("file")
    p.add_argument("proc")
    p.add_argument("state", help='JSON file {"scalars": {...}, "arrays": {...}}')
    p.add_argument("--arg", action="append", metavar="NAME=INT", help="procedure argument")
    p.add_argument("--assert-invariants", action="store_true",
                   help="fail when the invariants do not hold on entry or exit")
    p = sub.add_parser("emit-smt", parents=[common], help="print SMT-LIB for each procedure's triple")
    p.add_argument("file")
    p.add_argument("--procedure", action="append", help="only this procedure (repeatable)")
    p = sub.add_parser("bench", parents=[common], help="synthesize over a corpus and tabulate")
    p.add_argument("corpus", nargs="?", help="directory of .spy files (default: bundled corpus)")
    return ap


COMMANDS = {"check": cmd_check, "synth": cmd_synth, "run": cmd_run,
            "emit-smt": cmd_emit_smt, "bench": cmd_bench}


def _glue_ranges(argv):
    # "--int-range -3:3" would read the range as a flag; glue it to its option
    out, it = [], iter(argv)
    for a in it:
        if a == "--int-range":
            a = f"{a}={next(it, '')}"
        out.append(a)
    return out


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(_glue_ranges(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.budget <= 0 or args.depth <= 0:
        print("spyder: --budget and --depth must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except WellFormednessError as exc:
        print(f"well-formedness: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
