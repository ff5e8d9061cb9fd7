"""Gradual types, the consistency relation, groundness and store typing."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TYPE_CHECKING, Mapping, Union

from ovv.syntax import Key, Value, key_of, render_key

if TYPE_CHECKING:
    from ovv.machine import Store


@dataclass(frozen=True)
class Unknown:
    pass


@dataclass(frozen=True)
class NumT:
    pass


@dataclass(frozen=True)
class StrT:
    pass


@dataclass(frozen=True)
class BoolT:
    pass


@dataclass(frozen=True)
class UnitT:
    pass


@dataclass(frozen=True)
class DictT:
    entries: tuple[tuple[Key, ValueType], ...] = ()

    def lookup(self, key: Key) -> ValueType | None:
        for k, t in reversed(self.entries):
            if k == key:
                return t
        return None

    def extend(self, key: Key, t: ValueType) -> DictT:
        return DictT(self.entries + ((key, t),))


@dataclass(frozen=True)
class RefT:
    elem: ValueType

    def __post_init__(self) -> None:
        _want_value(self.elem)


@dataclass(frozen=True)
class UT:
    comp: CompType

    def __post_init__(self) -> None:
        _want_comp(self.comp)


@dataclass(frozen=True)
class DbT:
    row: ValueType

    def __post_init__(self) -> None:
        _want_value(self.row)


@dataclass(frozen=True)
class Arrow:
    arg: ValueType
    res: CompType

    def __post_init__(self) -> None:
        _want_value(self.arg)
        _want_comp(self.res)


@dataclass(frozen=True)
class FT:
    value: ValueType

    def __post_init__(self) -> None:
        _want_value(self.value)


ValueType = Union[Unknown, NumT, StrT, BoolT, UnitT, DictT, RefT, UT, DbT]
CompType = Union[Arrow, FT]

UNKNOWN = Unknown()
NUM = NumT()
STR = StrT()
BOOL = BoolT()
UNIT = UnitT()

_BASE = (NumT, StrT, BoolT, UnitT)
VALUE_TYPES = (Unknown, NumT, StrT, BoolT, UnitT, DictT, RefT, UT, DbT)
COMP_TYPES = (Arrow, FT)


def is_value_type(t: object) -> bool:
    return isinstance(t, VALUE_TYPES)


def is_comp_type(t: object) -> bool:
    return isinstance(t, COMP_TYPES)


def _want_value(t: object) -> None:
    if not isinstance(t, VALUE_TYPES):
        raise TypeError(f"expected a value type, got {t!r}")


def _want_comp(t: object) -> None:
    if not isinstance(t, COMP_TYPES):
        raise TypeError(f"expected a computation type, got {t!r}")


# ---------------------------------------------------------------------------
# Consistency


def consistent_v(a: ValueType, b: ValueType) -> bool:
    _want_value(a)
    _want_value(b)
    if isinstance(a, Unknown) or isinstance(b, Unknown):
        return True
    if isinstance(a, _BASE):
        return type(a) is type(b)
    match a, b:
        case DbT(x), DbT(y):
            return consistent_v(x, y)
        case RefT(x), RefT(y):
            return consistent_v(x, y)
        case UT(c), UT(d):
            return consistent_c(c, d)
        case DictT(), DictT():
            return _consistent_dict(a.entries, b.entries)
    return False


def _consistent_dict(left: tuple, right: tuple) -> bool:
    # Walks both schemas from the right. An exhausted left side matches any
    # remainder; an exhausted right side matches only an exhausted left side.
    i, j = len(left), len(right)
    while i:
        if not j:
            return False
        (ka, ta), (kb, tb) = left[i - 1], right[j - 1]
        if ka != kb or not consistent_v(ta, tb):
            return False
        i -= 1
        j -= 1
    return True


def consistent_c(c: CompType, d: CompType) -> bool:
    _want_comp(c)
    _want_comp(d)
    match c, d:
        case FT(a), FT(b):
            return consistent_v(a, b)
        case Arrow(a, c2), Arrow(b, d2):
            return consistent_v(b, a) and consistent_c(c2, d2)
    return False


def ground(t: ValueType | CompType) -> bool:
    match t:
        case Unknown():
            return False
        case DictT(entries):
            return all(ground(x) for _, x in entries)
        case RefT(x) | DbT(x) | FT(x):
            return ground(x)
        case UT(c):
            return ground(c)
        case Arrow(a, c):
            return ground(a) and ground(c)
    return True


# ---------------------------------------------------------------------------
# Contexts


@dataclass(frozen=True)
class TypingCtx:
    vars: tuple[tuple[str, ValueType], ...] = ()
    locs: Mapping[int, ValueType] = field(default_factory=lambda: MappingProxyType({}))

    def var(self, name: str) -> ValueType | None:
        for x, t in reversed(self.vars):
            if x == name:
                return t
        return None

    def loc(self, loc: int) -> ValueType | None:
        return self.locs.get(loc)

    def bind(self, name: str, t: ValueType) -> TypingCtx:
        return TypingCtx(self.vars + ((name, t),), self.locs)

    def with_vars(self, binds: tuple[tuple[str, ValueType], ...]) -> TypingCtx:
        return TypingCtx(tuple(binds), self.locs)

    def store_only(self) -> TypingCtx:
        return TypingCtx((), self.locs)


def store_typing(store: Store) -> TypingCtx:
    locs = {loc: (v.annot if v.annot is not None else UNKNOWN) for loc, v in store.cells.items()}
    return TypingCtx((), MappingProxyType(locs))


def dict_type_lookup(d: DictT, key: Value) -> ValueType | None:
    """Rightmost binding for ``key``; raises Incomparable for a higher-order key."""
    return d.lookup(key_of(key))


# ---------------------------------------------------------------------------
# Rendering


def render(t: ValueType | CompType) -> str:
    match t:
        case Unknown():
            return "?"
        case NumT():
            return "Num"
        case StrT():
            return "Str"
        case BoolT():
            return "Bool"
        case UnitT():
            return "1"
        case DictT(entries):
            return "Dict{" + ", ".join(f"{render_key(k)}: {render(x)}" for k, x in entries) + "}"
        case RefT(x):
            return f"Ref {_operand(x)}"
        case DbT(x):
            return f"Db {_operand(x)}"
        case FT(x):
            return f"F {_operand(x)}"
        case UT(c):
            return f"U {render(c)}"
        case Arrow(a, c):
            arg = render(a)
            if isinstance(a, UT) and isinstance(a.comp, Arrow):
                arg = f"({arg})"
            return f"{arg} -> {render(c)}"
    raise TypeError(f"not a type: {t!r}")


def _operand(t: ValueType) -> str:
    s = render(t)
    if isinstance(t, (RefT, DbT, UT)):
        return f"({s})"
    return s
