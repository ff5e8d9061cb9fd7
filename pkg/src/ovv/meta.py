"""Registry of named meta programs that rcc hands the reflected state to."""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Mapping

from ovv.checker import Rejected, chk_state
from ovv.state import MachineState
from ovv.syntax import NOSPAN, Span


class MetaError(Exception):
    pass


class UnknownMeta(MetaError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown meta program {name!r}")
        self.name = name


class MetaRejected(MetaError):
    def __init__(self, name: str, cause: Rejected) -> None:
        where = f"{cause.src.line}:{cause.src.col}"
        super().__init__(f"{name} rejected the state at {where}: [{cause.rule}] {cause.message}")
        self.cause = cause


class DuplicateName(Exception):
    def __init__(self, name: str) -> None:
        super().__init__(f"meta program {name!r} is already registered")
        self.name = name


@dataclass(frozen=True)
class MetaProgram:
    name: str
    apply: Callable[[MachineState], MachineState]
    # whether invocations are recorded in a progressive report
    reports: bool = False


@dataclass(frozen=True)
class MetaRegistry:
    programs: Mapping[str, MetaProgram] = MappingProxyType({})

    def register(self, p: MetaProgram) -> MetaRegistry:
        return register(self, p)

    def invoke(self, name: str, s: MachineState, *, report=None, trigger: Span = NOSPAN) -> MachineState:
        return invoke(self, name, s, report=report, trigger=trigger)

    def __contains__(self, name: str) -> bool:
        return name in self.programs


def register(reg: MetaRegistry, p: MetaProgram) -> MetaRegistry:
    if p.name in reg.programs:
        raise DuplicateName(p.name)
    progs = dict(reg.programs)
    progs[p.name] = p
    return MetaRegistry(MappingProxyType(progs))


def invoke(reg: MetaRegistry, name: str, s: MachineState, *, report=None, trigger: Span = NOSPAN) -> MachineState:
    """Apply meta program ``name`` to ``s``.

    Raises UnknownMeta for an unregistered name and MetaRejected when the
    program refuses the state.
    """
    p = reg.programs.get(name)
    if p is None:
        raise UnknownMeta(name)
    try:
        out = p.apply(s)
    except Rejected as exc:
        raise MetaRejected(name, exc) from exc
    if p.reports and report is not None:
        report.record(out, trigger)
    return out


ID = MetaProgram("id", lambda s: s)
CHK_STATE = MetaProgram("chk_state", chk_state, reports=True)


def default_registry() -> MetaRegistry:
    return register(register(MetaRegistry(), ID), CHK_STATE)
