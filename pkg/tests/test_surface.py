from __future__ import annotations

import random

import pytest

from _gen import db_program_source, random_pure, typed_program
from _util import AUTHBOOKS, corpus_files
from ovv.surface import ParseError, parse_program, parse_type, print_expr, render_value
from ovv.syntax import INT64_MAX, Let, Mode, Num, OpenDb, Proj, Ret, Str, Value, Var, erase
from ovv.typesys import FT, NUM


def test_parse_ret():
    e = parse_program("ret 1")
    assert isinstance(e.pre, Ret) and e.pre.value.pre == Num(1)
    assert e.annot is None and e.pre.value.annot is None


def test_parse_open_db_let():
    e = parse_program('let a = openDb? "authors.csv" in ret a')
    assert isinstance(e.pre, Let) and e.pre.name == "a"
    bound = e.pre.bound.pre
    assert isinstance(bound, OpenDb) and bound.mode is Mode.UNCERTAIN and bound.path.pre == Str("authors.csv")


def test_parse_unbound_projection():
    e = parse_program('proj! d "name"')
    assert isinstance(e.pre, Proj) and e.pre.record.pre == Var("d") and e.pre.mode is Mode.CERTAIN


def test_spans():
    e = parse_program("let x = ret 1 in\n  ret x")
    assert (e.pre.body.src.line, e.pre.body.src.col) == (2, 3)


def test_comments_and_escapes():
    e = parse_program('# header\nret "a\\"b\\u00e9"')
    assert e.pre.value.pre == Str('a"bé')


def test_int_range():
    assert parse_program(f"ret {INT64_MAX}").pre.value.pre == Num(INT64_MAX)
    with pytest.raises(ParseError):
        parse_program(f"ret {INT64_MAX + 1}")


@pytest.mark.parametrize("src", ["ret", "let x = ret 1", "proj ~ d k", 'ret "open', "ret 1 ?:", "lam . ret 1", "ret 1 )"])
def test_syntax_errors(src):
    with pytest.raises(ParseError):
        parse_program(src)


def test_syntax_error_position():
    with pytest.raises(ParseError) as exc:
        parse_program("let x = ret 1 in\n   ret )")
    assert (exc.value.span.line, exc.value.span.col) == (2, 8)


def test_parse_types():
    assert parse_type("F Num") == FT(NUM)
    assert parse_type("Num -> Num -> F Num") == parse_type("Num -> (Num -> F Num)")
    with pytest.raises(ParseError):
        parse_type("F F Num")


def test_ascription_binds_postfix():
    e = parse_program("ret 1 ?: F Num")
    assert e.pre.annot == FT(NUM)


def _round_trip(e):
    text = print_expr(e)
    again = parse_program(text)
    assert again == e, text
    assert print_expr(again) == text


def test_round_trip_corpus():
    files = corpus_files() + sorted(AUTHBOOKS.glob("*.ovv"))
    assert len(files) >= 30
    for p in files:
        _round_trip(parse_program(p.read_text()))


@pytest.mark.parametrize("seed", range(150))
def test_round_trip_generated(seed):
    rng = random.Random(seed)
    _round_trip(typed_program(rng))
    _round_trip(random_pure(rng))
    _round_trip(parse_program(db_program_source(rng)))


def test_render_values():
    assert render_value(Value(Str("x"))) == '"x"'
    assert render_value(Value(Num(-3))) == "-3"
