"""Annotated abstract syntax for the language and its database extension.

Every value and expression is a pair of a *pre* node (the bare syntax) and an
annotation slot. An annotation of ``None`` means the slot is still empty.
Source spans are carried for reporting but never take part in equality.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator, Union

if TYPE_CHECKING:
    from ovv.typesys import CompType, ValueType


class Incomparable(Exception):
    """Raised when equality is requested on a value that has no first-order form."""


class Mode(enum.IntEnum):
    UNCERTAIN = 0
    CERTAIN = 1

    def __str__(self) -> str:
        return "?" if self is Mode.UNCERTAIN else "!"

    @classmethod
    def parse(cls, mark: str) -> Mode:
        if mark == "?":
            return cls.UNCERTAIN
        if mark == "!":
            return cls.CERTAIN
        raise ValueError(f"not a mode mark: {mark!r}")


@dataclass(frozen=True, order=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOSPAN = Span(0, 0)


# ---------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class Value:
    pre: PreValue
    annot: ValueType | None = None
    src: Span = field(default=NOSPAN, compare=False)

    def with_annot(self, annot: ValueType | None) -> Value:
        return Value(self.pre, annot, self.src)


@dataclass(frozen=True)
class OThunk:
    body: Expr


@dataclass(frozen=True)
class Thunk:
    env: Env
    body: Expr


@dataclass(frozen=True)
class DictV:
    entries: tuple[tuple[Value, Value], ...] = ()


@dataclass(frozen=True)
class Num:
    n: int


@dataclass(frozen=True)
class Str:
    s: str


@dataclass(frozen=True)
class Bool:
    b: bool


@dataclass(frozen=True)
class Loc:
    loc: int


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Db:
    rows: tuple[Value, ...] = ()


PreValue = Union[OThunk, Thunk, DictV, Num, Str, Bool, Loc, Unit, Var, Db]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class Env:
    """Ordered variable bindings. Each name appears at most once; the newest binding is last."""

    bindings: tuple[tuple[str, Value], ...] = ()

    def lookup(self, name: str) -> Value | None:
        for x, v in reversed(self.bindings):
            if x == name:
                return v
        return None

    def extend(self, name: str, value: Value) -> Env:
        kept = tuple((x, v) for x, v in self.bindings if x != name)
        return Env(kept + ((name, value),))

    def names(self) -> set[str]:
        return {x for x, _ in self.bindings}

    def __iter__(self) -> Iterator[tuple[str, Value]]:
        return iter(self.bindings)

    def __len__(self) -> int:
        return len(self.bindings)


EMPTY_ENV = Env()


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Expr:
    pre: PreExpr
    annot: CompType | None = None
    src: Span = field(default=NOSPAN, compare=False)
    # True when ``annot`` came from a discharged ascription and is a claim to re-verify,
    # rather than a stale hint left by a previous check.
    ascribed: bool = False


@dataclass(frozen=True)
class App:
    fun: Expr
    arg: Value


@dataclass(frozen=True)
class Lam:
    param: str
    body: Expr


@dataclass(frozen=True)
class Let:
    name: str
    bound: Expr
    body: Expr


@dataclass(frozen=True)
class Ret:
    value: Value


@dataclass(frozen=True)
class Force:
    value: Value


@dataclass(frozen=True)
class Ref:
    value: Value


@dataclass(frozen=True)
class Set:
    target: Value
    value: Value


@dataclass(frozen=True)
class Get:
    value: Value


@dataclass(frozen=True)
class Ext:
    record: Value
    key: Value
    value: Value


@dataclass(frozen=True)
class Proj:
    mode: Mode
    record: Value
    key: Value


@dataclass(frozen=True)
class Eq:
    left: Value
    right: Value


@dataclass(frozen=True)
class Ascribe:
    body: Expr
    annot: CompType


@dataclass(frozen=True)
class Rcc:
    meta: str
    cont: Expr


@dataclass(frozen=True)
class OpenDb:
    mode: Mode
    path: Value


@dataclass(frozen=True)
class FilterDb:
    mode: Mode
    db: Value
    pred: Value


@dataclass(frozen=True)
class JoinDb:
    mode: Mode
    db1: Value
    key1: Value
    db2: Value
    key2: Value


PreExpr = Union[
    App, Lam, Let, Ret, Force, Ref, Set, Get, Ext, Proj, Eq, Ascribe, Rcc, OpenDb, FilterDb, JoinDb
]

MODED = (Proj, OpenDb, FilterDb, JoinDb)


# ---------------------------------------------------------------------------
# First-order keys and equality

# A key is a hashable canonical form of a closed first-order value.
Key = tuple


def key_of(v: Value) -> Key:
    """Canonical, annotation-blind form of a closed first-order value."""
    match v.pre:
        case Num(n):
            return ("num", n)
        case Str(s):
            return ("str", s)
        case Bool(b):
            return ("bool", b)
        case Unit():
            return ("unit",)
        case Loc(loc):
            return ("loc", loc)
        case DictV(entries):
            return ("dict", tuple((key_of(k), key_of(x)) for k, x in entries))
        case Var(name):
            raise Incomparable(f"free variable {name}")
        case _:
            raise Incomparable(f"{type(v.pre).__name__.lower()} has no first-order form")


def value_of_key(k: Key) -> Value:
    tag = k[0]
    if tag == "num":
        return Value(Num(k[1]))
    if tag == "str":
        return Value(Str(k[1]))
    if tag == "bool":
        return Value(Bool(k[1]))
    if tag == "unit":
        return Value(Unit())
    if tag == "loc":
        return Value(Loc(k[1]))
    if tag == "dict":
        return Value(DictV(tuple((value_of_key(a), value_of_key(b)) for a, b in k[1])))
    raise ValueError(f"bad key {k!r}")


def render_key(k: Key) -> str:
    tag = k[0]
    if tag == "num":
        return str(k[1])
    if tag == "str":
        return json.dumps(k[1], ensure_ascii=False)
    if tag == "bool":
        return "true" if k[1] else "false"
    if tag == "unit":
        return "unit"
    if tag == "loc":
        return f"<loc {k[1]}>"
    inner = ", ".join(f"{render_key(a)} -> {render_key(b)}" for a, b in k[1])
    return "dict{" + inner + "}"


def is_first_order(v: Value) -> bool:
    try:
        key_of(v)
    except Incomparable:
        return False
    return True


def value_equal(a: Value, b: Value) -> bool:
    """Structural equality ignoring annotations and spans.

    Raises Incomparable when either side contains a thunk, a db or a free variable.
    """
    ka = key_of(a)
    kb = key_of(b)
    return ka == kb


def dict_lookup(entries: tuple[tuple[Value, Value], ...], key: Value) -> Value | None:
    """Rightmost entry whose key is structurally equal to ``key``."""
    want = key_of(key)
    for k, v in reversed(entries):
        if key_of(k) == want:
            return v
    return None


# ---------------------------------------------------------------------------
# Free variables


def free_vars(e: Expr) -> set[str]:
    return _fv_pre_expr(e.pre)


def free_vars_value(v: Value) -> set[str]:
    match v.pre:
        case Var(name):
            return {name}
        case OThunk(body):
            return free_vars(body)
        case Thunk(env, body):
            out = free_vars(body) - env.names()
            for _, x in env:
                out |= free_vars_value(x)
            return out
        case DictV(entries):
            out: set[str] = set()
            for k, x in entries:
                out |= free_vars_value(k) | free_vars_value(x)
            return out
        case Db(rows):
            out = set()
            for r in rows:
                out |= free_vars_value(r)
            return out
        case _:
            return set()


def _fv_values(*vs: Value) -> set[str]:
    out: set[str] = set()
    for v in vs:
        out |= free_vars_value(v)
    return out


def _fv_pre_expr(p: PreExpr) -> set[str]:
    match p:
        case App(fun, arg):
            return free_vars(fun) | free_vars_value(arg)
        case Lam(x, body):
            return free_vars(body) - {x}
        case Let(x, bound, body):
            return free_vars(bound) | (free_vars(body) - {x})
        case Ret(v) | Force(v) | Ref(v) | Get(v):
            return free_vars_value(v)
        case Set(a, b) | Eq(a, b):
            return _fv_values(a, b)
        case Ext(a, b, c):
            return _fv_values(a, b, c)
        case Proj(_, a, b):
            return _fv_values(a, b)
        case Ascribe(body, _):
            return free_vars(body)
        case Rcc(_, cont):
            return free_vars(cont)
        case OpenDb(_, v):
            return free_vars_value(v)
        case FilterDb(_, a, b):
            return _fv_values(a, b)
        case JoinDb(_, a, b, c, d):
            return _fv_values(a, b, c, d)
    raise TypeError(f"not a pre-expression: {p!r}")


# ---------------------------------------------------------------------------
# Erasure


def erase(e: Expr, *, drop_ascriptions: bool = False) -> Expr:
    """Blank every annotation slot and reset every mode to uncertain.

    With ``drop_ascriptions`` an Ascribe node is replaced by its erased body.
    """
    return Expr(_erase_pre(e.pre, drop_ascriptions), None, e.src)


def erase_value(v: Value, *, drop_ascriptions: bool = False) -> Value:
    d = drop_ascriptions
    match v.pre:
        case OThunk(body):
            pre: PreValue = OThunk(erase(body, drop_ascriptions=d))
        case Thunk(env, body):
            env2 = Env(tuple((x, erase_value(y, drop_ascriptions=d)) for x, y in env))
            pre = Thunk(env2, erase(body, drop_ascriptions=d))
        case DictV(entries):
            pre = DictV(
                tuple(
                    (erase_value(k, drop_ascriptions=d), erase_value(x, drop_ascriptions=d))
                    for k, x in entries
                )
            )
        case Db(rows):
            pre = Db(tuple(erase_value(r, drop_ascriptions=d) for r in rows))
        case other:
            pre = other
    return Value(pre, None, v.src)


def _erase_pre(p: PreExpr, d: bool) -> PreExpr:
    ev = lambda v: erase_value(v, drop_ascriptions=d)  # noqa: E731
    ee = lambda e: erase(e, drop_ascriptions=d)  # noqa: E731
    u = Mode.UNCERTAIN
    match p:
        case App(fun, arg):
            return App(ee(fun), ev(arg))
        case Lam(x, body):
            return Lam(x, ee(body))
        case Let(x, bound, body):
            return Let(x, ee(bound), ee(body))
        case Ret(v):
            return Ret(ev(v))
        case Force(v):
            return Force(ev(v))
        case Ref(v):
            return Ref(ev(v))
        case Get(v):
            return Get(ev(v))
        case Set(a, b):
            return Set(ev(a), ev(b))
        case Eq(a, b):
            return Eq(ev(a), ev(b))
        case Ext(a, b, c):
            return Ext(ev(a), ev(b), ev(c))
        case Proj(_, a, b):
            return Proj(u, ev(a), ev(b))
        case Ascribe(body, annot):
            if d:
                return ee(body).pre
            return Ascribe(ee(body), annot)
        case Rcc(m, cont):
            return Rcc(m, ee(cont))
        case OpenDb(_, v):
            return OpenDb(u, ev(v))
        case FilterDb(_, a, b):
            return FilterDb(u, ev(a), ev(b))
        case JoinDb(_, a, b, c, d2):
            return JoinDb(u, ev(a), ev(b), ev(c), ev(d2))
    raise TypeError(f"not a pre-expression: {p!r}")


def mk(pre: PreExpr, src: Span = NOSPAN) -> Expr:
    return Expr(pre, None, src)


def mkv(pre: PreValue, src: Span = NOSPAN) -> Value:
    return Value(pre, None, src)


__all__ = [
    "App", "Ascribe", "Bool", "Db", "DictV", "EMPTY_ENV", "Env", "Eq", "Expr", "Ext",
    "FilterDb", "Force", "Get", "Incomparable", "JoinDb", "Key", "Lam", "Let", "Loc",
    "Mode", "NOSPAN", "Num", "OThunk", "OpenDb", "PreExpr", "PreValue", "Proj", "Rcc",
    "Ref", "Ret", "Set", "Span", "Str", "Thunk", "Unit", "Value", "Var", "dict_lookup",
    "erase", "erase_value", "free_vars", "free_vars_value", "is_first_order", "key_of",
    "mk", "mkv", "render_key", "value_equal", "value_of_key",
]
