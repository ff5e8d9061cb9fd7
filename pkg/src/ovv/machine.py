"""Small-step abstract machine."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

from ovv import libdb
from ovv.state import (
    FrApp,
    FrLet,
    Final,
    Halt,
    MachineState,
    OutOfFuel,
    RunResult,
    StepResult,
    Stepped,
    Stuck,
    StuckError,
    StuckKind,
)
from ovv.syntax import (
    App,
    Ascribe,
    Bool,
    DictV,
    Env,
    Eq,
    Ext,
    FilterDb,
    Force,
    Get,
    Incomparable,
    JoinDb,
    Lam,
    Let,
    Loc,
    Mode,
    OpenDb,
    OThunk,
    Proj,
    Rcc,
    Ref,
    Ret,
    Set,
    Span,
    Thunk,
    Unit,
    Value,
    Var,
    dict_lookup,
    is_first_order,
    key_of,
    render_key,
    value_equal,
)
from ovv.typesys import UNKNOWN

DEFAULT_FUEL = 1_000_000


class CertaintyViolation(AssertionError):
    """A certain operation misbehaved at run time (only raised when asserting)."""


class _FuelExhausted(Exception):
    def __init__(self, state: MachineState) -> None:
        super().__init__("out of fuel")
        self.state = state


def close(env: Env, v: Value) -> Value:
    match v.pre:
        case Var(name):
            got = env.lookup(name)
            if got is None:
                raise StuckError(StuckKind.UNBOUND_VARIABLE, name, v.src)
            return got
        case OThunk(body):
            return Value(Thunk(env, body), v.annot, v.src)
        case DictV(entries):
            closed = tuple((close(env, k), close(env, x)) for k, x in entries)
            return Value(DictV(closed), v.annot, v.src)
    return v


def is_final(s: MachineState) -> bool:
    return isinstance(s.stack, Halt) and isinstance(s.focus, (Ret, Lam))


_RULES = {
    Let: "let", App: "app", Ret: "ret", Lam: "lam", Force: "force", Ref: "ref", Set: "set",
    Get: "get", Ext: "ext", Proj: "proj", Eq: "eq", Ascribe: "ascribe", Rcc: "rcc",
    OpenDb: "openDb", FilterDb: "filterDb", JoinDb: "joinDb",
}


def rule_name(focus) -> str:
    return _RULES[type(focus)]


TraceSink = Callable[[int, int, str, Span, int], None]


class Machine:
    """Steps states; holds the run configuration shared by nested predicate runs.

    ``registry`` resolves rcc meta programs, ``report`` (if given) collects
    progressive-typing stages, and ``trace`` receives
    ``(index, nesting, rule, span, depth)`` for every step taken.
    """

    def __init__(
        self,
        *,
        data_root: Path | str | None = None,
        registry=None,
        report=None,
        trace: TraceSink | None = None,
        assert_certain: bool = False,
    ) -> None:
        from ovv.meta import default_registry

        self.data_root = Path(data_root) if data_root is not None else Path.cwd()
        self.registry = registry if registry is not None else default_registry()
        self.report = report
        self.trace = trace
        self.assert_certain = assert_certain
        self.steps = 0
        self.fuel = DEFAULT_FUEL
        self._nesting = 0

    close = staticmethod(close)

    # -- single steps -------------------------------------------------------

    def step(self, s: MachineState) -> StepResult:
        if is_final(s):
            return Final(s)
        try:
            nxt, rule = self._step(s)
        except StuckError as exc:
            return Stuck(exc.reason, exc.src or s.focus_src, state=s)
        return Stepped(nxt, rule)

    def _step(self, s: MachineState) -> tuple[MachineState, str]:
        env, k, store = s.env, s.stack, s.store
        match s.focus:
            case Let(x, bound, body):
                return MachineState(store, FrLet(env, x, body, k), env, bound.pre, bound.src), "let"
            case App(fun, arg):
                return MachineState(store, FrApp(close(env, arg), k), env, fun.pre, fun.src), "app"
            case Ret(v):
                if isinstance(k, FrLet):
                    env2 = k.env.extend(k.name, close(env, v))
                    return MachineState(store, k.rest, env2, k.body.pre, k.body.src), "ret"
                raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "value returned to an application frame")
            case Lam(x, body):
                if isinstance(k, FrApp):
                    return MachineState(store, k.rest, env.extend(x, k.arg), body.pre, body.src), "lam"
                raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "function returned to a let frame")
            case Force(v):
                t = close(env, v)
                if not isinstance(t.pre, Thunk):
                    raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "force of a non-thunk")
                body = t.pre.body
                return MachineState(store, k, t.pre.env, body.pre, body.src), "force"
            case Ref(v):
                loc, store2 = store.alloc(close(env, v))
                return self._ret(s, store2, Value(Loc(loc), UNKNOWN)), "ref"
            case Set(target, v):
                loc = self._loc(s, target)
                store2 = store.write(loc, close(env, v))
                return self._ret(s, store2, Value(Unit(), UNKNOWN)), "set"
            case Get(target):
                loc = self._loc(s, target)
                return self._ret(s, store, store.read(loc)), "get"
            case Ext(rec, key, v):
                d = close(env, rec)
                if not isinstance(d.pre, DictV):
                    raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "ext of a non-dict")
                kv = close(env, key)
                if not is_first_order(kv):
                    raise StuckError(StuckKind.INCOMPARABLE, "dictionary keys must be first-order")
                out = Value(DictV(d.pre.entries + ((kv, close(env, v)),)), UNKNOWN)
                return self._ret(s, store, out), "ext"
            case Proj(mode, rec, key):
                if mode is Mode.UNCERTAIN:
                    raise StuckError(StuckKind.UNCERTAIN_OP, "projection has not been verified")
                return self._ret(s, store, self._project(env, rec, key)), "proj"
            case Eq(a, b):
                try:
                    same = value_equal(close(env, a), close(env, b))
                except Incomparable as exc:
                    raise StuckError(StuckKind.INCOMPARABLE, str(exc)) from None
                return self._ret(s, store, Value(Bool(same), UNKNOWN)), "eq"
            case Ascribe():
                raise StuckError(StuckKind.UNDISCHARGED_ASCRIPTION, "ascription reached by execution")
            case Rcc(name, cont):
                from ovv.meta import MetaError

                reflected = MachineState(store, k, env, cont.pre, cont.src, cont.annot if cont.ascribed else None)
                try:
                    out = self.registry.invoke(name, reflected, report=self.report, trigger=s.focus_src)
                except MetaError as exc:
                    raise StuckError(StuckKind.META_FAILURE, str(exc)) from None
                return out, "rcc"
            case OpenDb(_, path):
                return libdb.step_open_db(self, s, path), "openDb"
            case FilterDb(mode, db, pred):
                return libdb.step_filter_db(self, s, db, pred, mode is Mode.CERTAIN), "filterDb"
            case JoinDb(_, db1, k1, db2, k2):
                return libdb.step_join_db(self, s, db1, k1, db2, k2), "joinDb"
        raise TypeError(f"not a pre-expression: {s.focus!r}")

    @staticmethod
    def _ret(s: MachineState, store, v: Value) -> MachineState:
        return MachineState(store, s.stack, s.env, Ret(v), s.focus_src)

    @staticmethod
    def _loc(s: MachineState, target: Value) -> int:
        t = close(s.env, target)
        if not isinstance(t.pre, Loc):
            raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "expected a location")
        if t.pre.loc not in s.store:
            raise StuckError(StuckKind.DANGLING_LOCATION, str(t.pre.loc))
        return t.pre.loc

    @staticmethod
    def _project(env: Env, rec: Value, key: Value) -> Value:
        d = close(env, rec)
        if not isinstance(d.pre, DictV):
            raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "projection from a non-dict")
        kv = close(env, key)
        try:
            got = dict_lookup(d.pre.entries, kv)
        except Incomparable as exc:
            raise StuckError(StuckKind.INCOMPARABLE, str(exc)) from None
        if got is None:
            raise StuckError(StuckKind.MISSING_FIELD, render_key(key_of(kv)))
        return got

    # -- driving ------------------------------------------------------------

    def run(self, s: MachineState, fuel: int = DEFAULT_FUEL) -> RunResult:
        if fuel < 0:
            raise ValueError("fuel must be non-negative")
        self.steps = 0
        self.fuel = fuel
        self._nesting = 0
        try:
            return self._drive(s)
        except _FuelExhausted as exc:
            return OutOfFuel(exc.state, self.steps)

    def _drive(self, s: MachineState) -> Final | Stuck:
        while True:
            if is_final(s):
                return Final(s, self.steps)
            if self.steps >= self.fuel:
                raise _FuelExhausted(s)
            index = self.steps
            self.steps += 1
            if self.trace is not None:
                self.trace(index, self._nesting, rule_name(s.focus), s.focus_src, s.stack.depth)
            try:
                r = self.step(s)
            except _FuelExhausted:
                raise _FuelExhausted(s) from None
            if isinstance(r, Stuck):
                # the failed attempt is not a step
                self.steps -= 1
                return Stuck(r.reason, r.src, self.steps, r.state)
            assert isinstance(r, Stepped)
            s = r.state

    def run_nested(self, s: MachineState) -> MachineState:
        """Run a sub-machine on the shared fuel budget; returns its final state."""
        self._nesting += 1
        try:
            r = self._drive(s)
        finally:
            self._nesting -= 1
        if isinstance(r, Stuck):
            raise StuckError(r.reason.kind, r.reason.detail, r.src)
        return r.state

    def certain_violation(self, message: str) -> None:
        if self.assert_certain:
            raise CertaintyViolation(message)


def run(s: MachineState, fuel: int = DEFAULT_FUEL, **config) -> RunResult:
    return Machine(**config).run(s, fuel)


def step(s: MachineState, **config) -> StepResult:
    return Machine(**config).step(s)
