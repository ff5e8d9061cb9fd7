"""Machine states: store, continuation stack, and step outcomes."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TYPE_CHECKING, Iterator, Mapping, Union

from ovv.syntax import EMPTY_ENV, NOSPAN, Env, Expr, PreExpr, Span, Value

if TYPE_CHECKING:
    from ovv.typesys import CompType


@dataclass(frozen=True)
class Store:
    cells: Mapping[int, Value] = field(default_factory=lambda: MappingProxyType({}))
    next: int = 0

    def alloc(self, v: Value) -> tuple[int, Store]:
        loc = self.next
        cells = dict(self.cells)
        cells[loc] = v
        return loc, Store(MappingProxyType(cells), loc + 1)

    def write(self, loc: int, v: Value) -> Store:
        cells = dict(self.cells)
        cells[loc] = v
        return Store(MappingProxyType(cells), self.next)

    def read(self, loc: int) -> Value | None:
        return self.cells.get(loc)

    def __contains__(self, loc: int) -> bool:
        return loc in self.cells

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Store):
            return NotImplemented
        return dict(self.cells) == dict(other.cells) and self.next == other.next

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.cells.items(), key=lambda kv: kv[0])), self.next))


EMPTY_STORE = Store()


@dataclass(frozen=True)
class Halt:
    depth = 0


HALT = Halt()


@dataclass(frozen=True)
class FrLet:
    env: Env
    name: str
    body: Expr
    rest: Stack
    depth: int = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "depth", self.rest.depth + 1)


@dataclass(frozen=True)
class FrApp:
    arg: Value
    rest: Stack
    depth: int = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "depth", self.rest.depth + 1)


Stack = Union[Halt, FrLet, FrApp]


def frames(k: Stack) -> Iterator[FrLet | FrApp]:
    """Frames from the top of the stack down to (excluding) Halt."""
    while not isinstance(k, Halt):
        yield k
        k = k.rest


@dataclass(frozen=True)
class MachineState:
    store: Store
    stack: Stack
    env: Env
    focus: PreExpr
    focus_src: Span = field(default=NOSPAN, compare=False)
    # type claim of a discharged ascription sitting at the focus; set only by the
    # checker and by rcc reflection, and dropped by every machine transition
    focus_annot: CompType | None = None


def initial_state(program: Expr) -> MachineState:
    return MachineState(EMPTY_STORE, HALT, EMPTY_ENV, program.pre, program.src)


class StuckKind(enum.Enum):
    UNCERTAIN_OP = "UncertainOp"
    UNDISCHARGED_ASCRIPTION = "UndischargedAscription"
    DYNAMIC_TYPE_ERROR = "DynamicTypeError"
    UNBOUND_VARIABLE = "UnboundVariable"
    MISSING_FIELD = "MissingField"
    DANGLING_LOCATION = "DanglingLocation"
    IO_ERROR = "IoError"
    META_FAILURE = "MetaFailure"
    INCOMPARABLE = "Incomparable"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class StuckReason:
    kind: StuckKind
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}" if self.detail else str(self.kind)


class StuckError(Exception):
    """Internal signal used while stepping; converted to a Stuck result."""

    def __init__(self, kind: StuckKind, detail: str = "", src: Span | None = None) -> None:
        super().__init__(f"{kind}: {detail}")
        self.reason = StuckReason(kind, detail)
        self.src = src


@dataclass(frozen=True)
class Stepped:
    state: MachineState
    rule: str


@dataclass(frozen=True)
class Final:
    state: MachineState
    steps: int = 0


@dataclass(frozen=True)
class Stuck:
    reason: StuckReason
    src: Span
    steps: int = 0
    state: MachineState | None = field(default=None, compare=False)


@dataclass(frozen=True)
class OutOfFuel:
    state: MachineState
    steps: int


StepResult = Union[Stepped, Final, Stuck]
RunResult = Union[Final, Stuck, OutOfFuel]
