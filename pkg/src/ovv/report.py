"""Progressive-typing report: the modes of database operations after each check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from ovv.state import FrApp, FrLet, MachineState, frames
from ovv.syntax import (
    App,
    Ascribe,
    DictV,
    Eq,
    Expr,
    Ext,
    FilterDb,
    Force,
    Get,
    JoinDb,
    Lam,
    Let,
    Mode,
    OpenDb,
    OThunk,
    PreExpr,
    Proj,
    Rcc,
    Ref,
    Ret,
    Set,
    Span,
    Thunk,
    Value,
)

_OP_NAMES = {Proj: "proj", OpenDb: "openDb", FilterDb: "filterDb", JoinDb: "joinDb"}


@dataclass(frozen=True, order=True)
class OpRecord:
    line: int
    col: int
    op: str
    mode: Mode


@dataclass(frozen=True)
class Stage:
    index: int
    trigger_line: int
    ops: tuple[OpRecord, ...]


@dataclass
class ProgressiveReport:
    include_proj: bool = False
    stages: list[Stage] = field(default_factory=list)

    def record(self, state: MachineState, trigger: Span) -> Stage:
        ops = collect_ops(state, include_proj=self.include_proj)
        stage = Stage(len(self.stages) + 1, trigger.line, tuple(ops))
        self.stages.append(stage)
        return stage

    def lines(self) -> list[str]:
        return [
            f"stage={st.index} line={op.line} op={op.op} mode={op.mode}"
            for st in self.stages
            for op in st.ops
        ]

    def is_monotone(self) -> bool:
        """No operation site ever goes from ``!`` back to ``?`` across stages."""
        best: dict[tuple[int, int, str], Mode] = {}
        for st in self.stages:
            for op in st.ops:
                site = (op.line, op.col, op.op)
                if site in best and op.mode < best[site]:
                    return False
                best[site] = max(op.mode, best.get(site, op.mode))
        return True


def collect_ops(state: MachineState, *, include_proj: bool = False) -> list[OpRecord]:
    found: set[OpRecord] = set()
    wanted = tuple(k for k in _OP_NAMES if include_proj or k is not Proj)

    def visit_pre(p: PreExpr, src: Span) -> None:
        if isinstance(p, wanted):
            found.add(OpRecord(src.line, src.col, _OP_NAMES[type(p)], p.mode))
        for child in _children(p):
            if isinstance(child, Expr):
                visit_pre(child.pre, child.src)
            else:
                visit_value(child)

    def visit_value(v: Value) -> None:
        match v.pre:
            case OThunk(body) | Thunk(_, body):
                visit_pre(body.pre, body.src)
        if isinstance(v.pre, Thunk):
            for _, x in v.pre.env:
                visit_value(x)
        if isinstance(v.pre, DictV):
            for k, x in v.pre.entries:
                visit_value(k)
                visit_value(x)

    visit_pre(state.focus, state.focus_src)
    for _, v in state.env:
        visit_value(v)
    for fr in frames(state.stack):
        if isinstance(fr, FrLet):
            for _, v in fr.env:
                visit_value(v)
            visit_pre(fr.body.pre, fr.body.src)
        elif isinstance(fr, FrApp):
            visit_value(fr.arg)
    for v in state.store.cells.values():
        visit_value(v)
    return sorted(found)


def _children(p: PreExpr) -> Iterator[Expr | Value]:
    match p:
        case App(fun, arg):
            yield fun
            yield arg
        case Lam(_, body) | Rcc(_, body) | Ascribe(body, _):
            yield body
        case Let(_, bound, body):
            yield bound
            yield body
        case Ret(v) | Force(v) | Ref(v) | Get(v) | OpenDb(_, v):
            yield v
        case Set(a, b) | Eq(a, b) | Proj(_, a, b) | FilterDb(_, a, b):
            yield a
            yield b
        case Ext(a, b, c):
            yield a
            yield b
            yield c
        case JoinDb(_, a, b, c, d):
            yield a
            yield b
            yield c
            yield d

