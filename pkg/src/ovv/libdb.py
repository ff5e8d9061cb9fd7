"""CSV loading, schema inference and the dynamics of openDb, filterDb and joinDb."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path, PurePosixPath
from typing import TYPE_CHECKING

from ovv.state import FrApp, HALT, MachineState, StuckError, StuckKind
from ovv.syntax import (
    INT64_MAX,
    INT64_MIN,
    Bool,
    Db,
    DictV,
    Incomparable,
    Num,
    Ret,
    Str,
    Thunk,
    Unit,
    Value,
    dict_lookup,
    key_of,
    value_equal,
)
from ovv.typesys import BOOL, NUM, STR, UNIT, UNKNOWN, DbT, DictT, ValueType

if TYPE_CHECKING:
    from ovv.machine import Machine


class CsvError(Exception):
    pass


class EmptyFile(CsvError):
    def __init__(self) -> None:
        super().__init__("empty file")


class RaggedRow(CsvError):
    def __init__(self, line: int, got: int, want: int) -> None:
        super().__init__(f"line {line}: {got} cells, expected {want}")
        self.line = line


class DuplicateHeader(CsvError):
    def __init__(self, name: str) -> None:
        super().__init__(f"duplicate header {name!r}")
        self.name = name


@dataclass(frozen=True)
class CsvTable:
    headers: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class SchemaReport:
    row_type: ValueType
    per_column: dict[str, ValueType]
    row_count: int


_ASCII_WS = " \t\n\r\x0b\x0c"
_INT = re.compile(r"[+-]?[0-9]+")


def parse_csv(data: bytes) -> CsvTable:
    text = data.decode("utf-8")
    lines = [ln.replace("\r", "") for ln in text.split("\n")]
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise EmptyFile()
    headers = tuple(c.strip(_ASCII_WS) for c in lines[0].split(","))
    seen: set[str] = set()
    for h in headers:
        if h in seen:
            raise DuplicateHeader(h)
        seen.add(h)
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = tuple(c.strip(_ASCII_WS) for c in ln.split(","))
        if len(cells) != len(headers):
            raise RaggedRow(lineno, len(cells), len(headers))
        rows.append(cells)
    return CsvTable(headers, tuple(rows))


def parse_cell(cell: str) -> Value:
    if _INT.fullmatch(cell):
        n = int(cell)
        if INT64_MIN <= n <= INT64_MAX:
            return Value(Num(n), NUM)
    return Value(Str(cell), STR)


def table_to_db(t: CsvTable) -> Value:
    rows = []
    for cells in t.rows:
        entries = tuple((Value(Str(h), STR), parse_cell(c)) for h, c in zip(t.headers, cells))
        row = DictV(entries)
        rows.append(Value(row, DictT(tuple((key_of(k), v.annot) for k, v in entries))))
    if rows:
        row_type = synth_row_type(rows)
    else:
        row_type = DictT(tuple((("str", h), UNKNOWN) for h in t.headers))
    return Value(Db(tuple(rows)), DbT(row_type))


def _cell_type(v: Value) -> ValueType:
    match v.pre:
        case Num():
            return NUM
        case Str():
            return STR
        case Bool():
            return BOOL
        case Unit():
            return UNIT
    return UNKNOWN


def synth_row_type(rows: list[Value] | tuple[Value, ...]) -> ValueType:
    if not rows:
        return UNKNOWN
    keys = None
    for r in rows:
        if not isinstance(r.pre, DictV):
            return UNKNOWN
        try:
            ks = tuple(key_of(k) for k, _ in r.pre.entries)
        except Incomparable:
            return UNKNOWN
        if keys is None:
            keys = ks
        elif ks != keys:
            return UNKNOWN
    assert keys is not None
    cols: list[ValueType] = []
    for i in range(len(keys)):
        kinds = {_cell_type(r.pre.entries[i][1]) for r in rows}
        cols.append(kinds.pop() if len(kinds) == 1 else UNKNOWN)
    return DictT(tuple(zip(keys, cols)))


def schema_report(db: Value) -> SchemaReport:
    assert isinstance(db.pre, Db)
    rt = synth_row_type(db.pre.rows)
    if not db.pre.rows and isinstance(db.annot, DbT):
        rt = db.annot.row
    cols = {}
    if isinstance(rt, DictT):
        for k, t in rt.entries:
            cols[str(k[1]) if k[0] == "str" else repr(k)] = t
    return SchemaReport(rt, cols, len(db.pre.rows))


def db_type(db: Value) -> DbT:
    """Type of a db value: inferred from its rows, or its annotation when it has none."""
    assert isinstance(db.pre, Db)
    if db.pre.rows:
        return DbT(synth_row_type(db.pre.rows))
    if isinstance(db.annot, DbT):
        return db.annot
    return DbT(UNKNOWN)


# ---------------------------------------------------------------------------
# Dynamics


def resolve_path(root: Path, rel: str) -> Path:
    p = PurePosixPath(rel)
    if rel == "" or p.is_absolute() or Path(rel).is_absolute():
        raise StuckError(StuckKind.IO_ERROR, f"{rel!r}: absolute or empty paths are not allowed")
    if ".." in p.parts:
        raise StuckError(StuckKind.IO_ERROR, f"{rel!r}: '..' segments are not allowed")
    return root / p


def open_path(root: Path, rel: str) -> Value:
    path = resolve_path(root, rel)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise StuckError(StuckKind.IO_ERROR, f"{rel}: {exc.strerror or exc}") from None
    try:
        return table_to_db(parse_csv(data))
    except (CsvError, UnicodeDecodeError) as exc:
        raise StuckError(StuckKind.IO_ERROR, f"{rel}: {exc}") from None


def step_open_db(m: Machine, s: MachineState, path: Value) -> MachineState:
    v = m.close(s.env, path)
    if not isinstance(v.pre, Str):
        raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "openDb expects a string path")
    db = open_path(m.data_root, v.pre.s)
    return MachineState(s.store, s.stack, s.env, Ret(db), s.focus_src)


def _expect_db(m: Machine, s: MachineState, v: Value, what: str) -> Value:
    db = m.close(s.env, v)
    if not isinstance(db.pre, Db):
        raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, f"{what} expects a db")
    return db


def step_filter_db(m: Machine, s: MachineState, db_v: Value, pred_v: Value, certain: bool) -> MachineState:
    db = _expect_db(m, s, db_v, "filterDb")
    pred = m.close(s.env, pred_v)
    if not isinstance(pred.pre, Thunk):
        raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "filterDb expects a thunk predicate")
    store = s.store
    kept = []
    for row in db.pre.rows:
        sub = MachineState(store, FrApp(row, HALT), pred.pre.env, pred.pre.body.pre, pred.pre.body.src)
        try:
            final = m.run_nested(sub)
        except StuckError:
            if certain:
                m.certain_violation("certain filterDb predicate got stuck")
            raise
        store = final.store
        verdict = None
        if isinstance(final.focus, Ret):
            verdict = m.close(final.env, final.focus.value)
        if verdict is None or not isinstance(verdict.pre, Bool):
            if certain:
                m.certain_violation("certain filterDb predicate did not return a bool")
            raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "filterDb predicate did not return a bool")
        if verdict.pre.b:
            kept.append(row)
    if kept:
        annot: ValueType = DbT(synth_row_type(kept))
    else:
        annot = db_type(db)
    out = Value(Db(tuple(kept)), annot)
    return MachineState(store, s.stack, s.env, Ret(out), s.focus_src)


def _field(row: Value, key: Value) -> Value:
    if not isinstance(row.pre, DictV):
        raise StuckError(StuckKind.DYNAMIC_TYPE_ERROR, "joinDb row is not a dict")
    try:
        got = dict_lookup(row.pre.entries, key)
    except Incomparable as exc:
        raise StuckError(StuckKind.INCOMPARABLE, str(exc)) from None
    if got is None:
        raise StuckError(StuckKind.MISSING_FIELD, f"join key {_show(key)} absent from row")
    return got


def _show(v: Value) -> str:
    from ovv.syntax import render_key

    try:
        return render_key(key_of(v))
    except Incomparable:
        return type(v.pre).__name__


def join_rows(rows1, k1: Value, rows2, k2: Value) -> list[Value]:
    out = []
    for r1 in rows1:
        a = _field(r1, k1)
        for r2 in rows2:
            b = _field(r2, k2)
            try:
                same = value_equal(a, b)
            except Incomparable as exc:
                raise StuckError(StuckKind.INCOMPARABLE, str(exc)) from None
            if same:
                merged = (r1.pre.entries + r2.pre.entries)
                out.append(Value(DictV(merged), synth_row_type([Value(DictV(merged))])))
    return out


def step_join_db(m: Machine, s: MachineState, v1: Value, v2: Value, v3: Value, v4: Value) -> MachineState:
    db1 = _expect_db(m, s, v1, "joinDb")
    k1 = m.close(s.env, v2)
    db2 = _expect_db(m, s, v3, "joinDb")
    k2 = m.close(s.env, v4)
    rows = join_rows(db1.pre.rows, k1, db2.pre.rows, k2)
    if rows:
        annot: ValueType = DbT(synth_row_type(rows))
    else:
        t1, t2 = db_type(db1), db_type(db2)
        if isinstance(t1.row, DictT) and isinstance(t2.row, DictT):
            annot = DbT(DictT(t1.row.entries + t2.row.entries))
        else:
            annot = DbT(UNKNOWN)
    out = Value(Db(tuple(rows)), annot)
    return MachineState(s.store, s.stack, s.env, Ret(out), s.focus_src)
