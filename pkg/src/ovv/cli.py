"""Command-line front end: ``ovv run`` and ``ovv check``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

from ovv.checker import Rejected, check_state
from ovv.machine import DEFAULT_FUEL, Machine
from ovv.report import ProgressiveReport
from ovv.state import Final, OutOfFuel, Stuck, StuckError, initial_state
from ovv.surface import ParseError, parse_program, print_expr, render_value
from ovv.syntax import Expr, Lam, Ret
from ovv.typesys import render

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_STUCK = 2
EXIT_OUT_OF_FUEL = 3
EXIT_IO = 4


@dataclass(frozen=True)
class RunConfig:
    program_path: Path
    data_root: Path
    fuel: int = DEFAULT_FUEL
    mode: str = "run"  # run | check | report
    trace: bool = False
    report_proj: bool = False

    def __post_init__(self) -> None:
        if self.fuel <= 0:
            raise ValueError("fuel must be positive")


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ovv", description="Run or check a program on the abstract machine.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a program")
    run.add_argument("file", type=Path)
    run.add_argument("--data-root", type=Path, default=None, help="directory for openDb paths (default: the program's directory)")
    run.add_argument("--fuel", type=_positive, default=DEFAULT_FUEL, help="step budget")
    run.add_argument("--trace", action="store_true", help="print one line per step to stderr")
    run.add_argument("--report", action="store_true", help="print the progressive-typing report to stdout")
    run.add_argument("--report-proj", action="store_true", help="include projections in the report")

    chk = sub.add_parser("check", help="check the initial state and print the transformed program")
    chk.add_argument("file", type=Path)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    path: Path = ns.file
    if ns.command == "check":
        return RunConfig(path, path.parent, mode="check")
    root = ns.data_root if ns.data_root is not None else path.parent
    return RunConfig(
        path,
        root,
        fuel=ns.fuel,
        mode="report" if ns.report else "run",
        trace=ns.trace,
        report_proj=ns.report_proj,
    )


def load(path: Path) -> Expr:
    return parse_program(path.read_text(encoding="utf-8"))


def execute(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    try:
        program = load(cfg.program_path)
    except OSError as exc:
        print(f"{cfg.program_path}: {exc.strerror or exc}", file=err)
        return EXIT_IO
    except (ParseError, UnicodeDecodeError) as exc:
        if isinstance(exc, ParseError):
            print(f"{cfg.program_path}:{exc.span.line}:{exc.span.col}: syntax error: {exc.message}", file=err)
        else:
            print(f"{cfg.program_path}: {exc}", file=err)
        return EXIT_IO

    s0 = initial_state(program)
    if cfg.mode == "check":
        try:
            checked = check_state(s0)
        except Rejected as exc:
            print(exc.diagnostic(str(cfg.program_path)), file=err)
            return EXIT_REJECTED
        print(print_expr(Expr(checked.state.focus, None, checked.state.focus_src)), file=out)
        print(f": {render(checked.type)}", file=out)
        return EXIT_OK

    report = ProgressiveReport(include_proj=cfg.report_proj) if cfg.mode == "report" else None
    trace = None
    if cfg.trace:
        def trace(index, nesting, rule, span, depth):
            print(f"step={index} level={nesting} rule={rule} span={span} depth={depth}", file=err)

    m = Machine(data_root=cfg.data_root, report=report, trace=trace)
    result = m.run(s0, cfg.fuel)
    result_out = err if report is not None else out
    if report is not None:
        for line in report.lines():
            print(line, file=out)
    match result:
        case Final(state, steps):
            try:
                text = render_final(state.focus, state.env, full=cfg.trace)
            except StuckError as exc:
                src = exc.src or state.focus_src
                print(f"{cfg.program_path}:{src.line}:{src.col}: stuck: {exc.reason} (after {steps} steps)", file=err)
                return EXIT_STUCK
            print(text, file=result_out)
            return EXIT_OK
        case Stuck(reason, src, steps):
            print(f"{cfg.program_path}:{src.line}:{src.col}: stuck: {reason} (after {steps} steps)", file=err)
            return EXIT_STUCK
        case OutOfFuel(_, steps):
            print(f"{cfg.program_path}: out of fuel after {steps} steps", file=err)
            return EXIT_OUT_OF_FUEL
    raise AssertionError(result)


def render_final(focus, env, *, full: bool = False) -> str:
    from ovv.machine import close

    if isinstance(focus, Ret):
        return render_value(close(env, focus.value), full=full)
    assert isinstance(focus, Lam)
    return f"<lam {focus.param}>"


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    ns = build_parser().parse_args(argv)
    return execute(config_from_args(ns), out or sys.stdout, err or sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
