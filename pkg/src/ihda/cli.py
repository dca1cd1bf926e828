"""Command-line entry point: ``ihda build|check|export|run|simulate|conform``.

Exit codes: 0 clean, 1 findings or non-conformance, 2 usage or parse
errors, 3 runtime or protocol errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .closedloop import run_client
from .controller import ControllerHalted, conforms, dump_trace, load_trace, preflight
from .cube import CubeError, parse_clause
from .hda import to_dot, to_json, truncate
from .ipn import Budget, BudgetExceeded, IPNError, parse_ipn, restrict
from .models import BUNDLED, model_text
from .plantsim import PlantConfig, ProtocolError, Scenario, serve
from .translate import build_ihda, check_invariants, find_inconsistent

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _model_text(spec: str) -> str:
    path = Path(spec)
    if path.exists():
        return path.read_text(encoding="utf-8")
    name = path.stem if path.suffix == ".ipn" else spec
    if name in BUNDLED:
        return model_text(name)
    raise UsageError(f"no such model: {spec} (bundled: {', '.join(BUNDLED)})")


def _load(args):
    net = parse_ipn(_model_text(args.model))
    relabel = {}
    for item in getattr(args, "restrict", None) or []:
        place, sep, cube = item.partition("=")
        if not sep:
            raise UsageError(f"--restrict expects <place>=<cube>, got {item!r}")
        relabel[place.strip()] = cube.strip()
    if relabel:
        net = restrict(net, relabel)
    invariants = [parse_clause(s, net.outputs) for s in getattr(args, "invariant", None) or []]
    budget = Budget(args.max_tokens, args.max_markings)
    return net, build_ihda(net, budget), invariants


def _print_counts(ihda) -> None:
    counts = ihda.hda.dim_counts()
    print(f"cells: {len(ihda.hda)} (dimension {ihda.hda.dim})")
    for d, n in counts.items():
        print(f"  dim {d}: {n}")


def _print_report(net, report) -> None:
    for f in report.findings:
        if not f.maximal:
            continue
        names = ",".join(net.step_names(f.cell.concset)) or "-"
        marking = ",".join(net.format_marking(f.cell.marking)) or "-"
        what = f"violates {f.clause}" if f.clause else "output is FALSE"
        print(f"{f.kind}: cell ({marking} | {names}) dim {f.cell.dim} {what} "
              f"[{' / '.join(f.literal_conflict)}]")
        path = [",".join(net.step_names(x.concset)) for x in f.witness.computation.step_cells]
        print(f"  witness: {' ; '.join(path) or '(initial)'}")
        if f.witness.conflict:
            print(f"  {f.witness.conflict}")
    sub = sum(1 for f in report.findings if not f.maximal)
    if sub:
        print(f"({sub} further findings on sub-cells of the above)")


def cmd_build(args) -> int:
    _, ihda, _ = _load(args)
    _print_counts(ihda)
    if args.out:
        Path(args.out).write_text(to_json(ihda.hda, ihda.labels), encoding="utf-8")
    return EXIT_OK


def cmd_check(args) -> int:
    net, ihda, invariants = _load(args)
    report = find_inconsistent(ihda)
    report.extend(check_invariants(ihda, invariants))
    if args.json:
        Path(args.json).write_text(report.to_json(net), encoding="utf-8")
    if not report:
        print("no inconsistencies found")
        return EXIT_OK
    _print_report(net, report)
    return EXIT_FINDINGS


def cmd_export(args) -> int:
    if args.k < 0:
        raise UsageError("--k must be >= 0")
    _, ihda, _ = _load(args)
    if args.dot:
        if args.k > 2:
            raise UsageError("DOT export supports --k up to 2")
        Path(args.dot).write_text(to_dot(truncate(ihda.hda, args.k), args.k, ihda.labels),
                                  encoding="utf-8")
    if args.json:
        Path(args.json).write_text(to_json(truncate(ihda.hda, args.k), ihda.labels),
                                   encoding="utf-8")
    if not (args.dot or args.json):
        sys.stdout.write(to_dot(truncate(ihda.hda, min(args.k, 2)), min(args.k, 2), ihda.labels))
    return EXIT_OK


def _hostport(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"--connect expects host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def cmd_run(args) -> int:
    net, ihda, invariants = _load(args)
    pf = preflight(ihda, invariants, override=args.force)
    if not pf.ok:
        print("refusing to start, model has findings (use --force to override):",
              file=sys.stderr)
        _print_report(net, pf.report)
        return EXIT_FINDINGS
    host, port = _hostport(args.connect)
    trace = []
    code = EXIT_OK
    try:
        res = run_client(ihda, host, port, invariants)
        trace = res.trace
        print(f"plant closed the session: {res.reason}")
        print(f"cycles: {len(trace)}, final marking: {net.format_marking(res.state.marking)}")
    except ControllerHalted as e:
        print(f"controller halted: {e.reason}", file=sys.stderr)
        code = EXIT_RUNTIME
    except (ProtocolError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_RUNTIME
    if args.trace:
        Path(args.trace).write_text(dump_trace(trace), encoding="utf-8")
    return code


def cmd_simulate(args) -> int:
    cfg = PlantConfig(args.d1, args.d2, args.stroke, args.load_dwell, args.transfer_dwell)
    script = {}
    for k in args.start_at:
        script.setdefault(k, {})["start"] = True
    res = serve(
        args.port,
        cfg,
        Scenario(script),
        period_ms=args.period_ms,
        max_cycles=args.max_cycles,
        accept_timeout=args.accept_timeout,
        host=args.host,
        stop_when_home=not args.keep_running,
        ready=lambda p: print(f"plant listening on {args.host}:{p}", flush=True),
    )
    print(json.dumps({"reason": res.reason, "cycles": res.cycles,
                      "final_state": res.final_state.__dict__}, default=list))
    return res.exit_code


def cmd_conform(args) -> int:
    _, ihda, _ = _load(args)
    word = load_trace(ihda, Path(args.trace).read_text(encoding="utf-8"))
    if conforms(ihda, word, strict=args.strict_iv_a):
        print(f"trace accepted ({len(word)} letters)")
        return EXIT_OK
    print(f"trace rejected ({len(word)} letters)")
    return EXIT_FINDINGS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ihda", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def model_cmd(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("model", help="path to an .ipn file or a bundled model name")
        sp.add_argument("--max-tokens", type=int, default=1, help="per-place token bound")
        sp.add_argument("--max-markings", type=int, default=100_000)
        sp.add_argument("--restrict", action="append", metavar="PLACE=CUBE",
                        help="replace the output label of a place")
        sp.set_defaults(fn=fn)
        return sp

    sp = model_cmd("build", cmd_build, "build the IHDA and print cell counts")
    sp.add_argument("--out", help="write cells and labels as JSON")

    sp = model_cmd("check", cmd_check, "report contradictory cells and invariant violations")
    sp.add_argument("--invariant", action="append", metavar="CLAUSE",
                    help='global output clause, e.g. "!R2 | !Pusher"')
    sp.add_argument("--json", help="write the analysis report as JSON")

    sp = model_cmd("export", cmd_export, "export the k-truncation as DOT and/or JSON")
    sp.add_argument("--dot")
    sp.add_argument("--json")
    sp.add_argument("--k", type=int, default=2)

    sp = model_cmd("run", cmd_run, "run the controller against a plant server")
    sp.add_argument("--connect", default="127.0.0.1:5020", metavar="HOST:PORT")
    sp.add_argument("--force", action="store_true", help="skip the preflight refusal")
    sp.add_argument("--trace", help="write the trace log (JSON lines)")
    sp.add_argument("--invariant", action="append", metavar="CLAUSE")

    sp = model_cmd("conform", cmd_conform, "check a recorded trace against the IHDA")
    sp.add_argument("trace")
    sp.add_argument("--strict-iv-a", action="store_true",
                    help="use the counter rules exactly as printed")

    sp = sub.add_parser("simulate", help="serve the simulated transfer cell")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=5020)
    sp.add_argument("--period-ms", type=int, default=1000)
    sp.add_argument("--start-at", type=int, action="append", default=None,
                    help="cycle at which start is pressed (repeatable, default 3)")
    sp.add_argument("--max-cycles", type=int, default=200)
    sp.add_argument("--accept-timeout", type=float, default=30.0)
    sp.add_argument("--keep-running", action="store_true",
                    help="do not stop when the cell is back home")
    for name, default in [("d1", 5), ("d2", 5), ("stroke", 2),
                          ("load-dwell", 2), ("transfer-dwell", 2)]:
        sp.add_argument(f"--{name}", type=int, default=default)
    sp.set_defaults(fn=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if getattr(args, "start_at", "unset") is None:
        args.start_at = [3]
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (UsageError, IPNError, CubeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as e:
        print(f"error: budget exceeded: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
