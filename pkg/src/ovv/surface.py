"""Surface syntax: tokenizer, recursive-descent parser and pretty printer."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from ovv.syntax import (
    INT64_MAX,
    INT64_MIN,
    App,
    Ascribe,
    Bool,
    Db,
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
    Loc,
    Mode,
    Num,
    OpenDb,
    OThunk,
    PreExpr,
    Proj,
    Rcc,
    Ref,
    Ret,
    Set,
    Span,
    Str,
    Thunk,
    Unit,
    Value,
    Var,
    key_of,
)
from ovv.typesys import (
    BOOL,
    NUM,
    STR,
    UNIT,
    UNKNOWN,
    Arrow,
    CompType,
    DbT,
    DictT,
    FT,
    RefT,
    UT,
    ValueType,
    is_comp_type,
    is_value_type,
    render,
)


class ParseError(Exception):
    def __init__(self, message: str, span: Span) -> None:
        super().__init__(f"{span.line}:{span.col}: {message}")
        self.message = message
        self.span = span


@dataclass(frozen=True)
class Token:
    kind: str  # int, str, ident, punct, eof
    text: str
    span: Span


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>\?:|->|[?!@=.{}(),:])
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
    """,
    re.VERBOSE,
)

KEYWORDS = frozenset(
    "let in lam ret force ref set get ext proj eq openDb filterDb joinDb rcc dict othunk true false unit".split()
)


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        span = Span(line, pos - line_start + 1)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), span))
        pos = m.end()
    out.append(Token("eof", "", Span(line, pos - line_start + 1)))
    return out


class Parser:
    def __init__(self, text: str) -> None:
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "ident") and t.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def fail(self, message: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{message}, found {found}", t.span)

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.fail("expected an identifier")
        self.advance()
        return t.text

    def mode(self) -> Mode:
        if self.at("?") or self.at("!"):
            return Mode.parse(self.advance().text)
        self.fail("expected a mode mark '?' or '!'")

    # -- expressions --------------------------------------------------------

    def program(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            self.fail("unexpected input after the program")
        return e

    def expr(self) -> Expr:
        span = self.tok.span
        if self.at("let"):
            self.advance()
            x = self.ident()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            body = self.expr()
            return Expr(Let(x, bound, body), None, span)
        if self.at("lam"):
            self.advance()
            x = self.ident()
            self.expect(".")
            body = self.expr()
            return Expr(Lam(x, body), None, span)
        e = self.atom()
        while True:
            if self.at("@"):
                self.advance()
                e = Expr(App(e, self.value()), None, e.src)
            elif self.at("?:"):
                self.advance()
                e = Expr(Ascribe(e, self.ctype()), None, e.src)
            else:
                return e

    def atom(self) -> Expr:
        t = self.tok
        span = t.span
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind != "ident":
            self.fail("expected an expression")
        kw = t.text
        simple = {"ret": Ret, "force": Force, "ref": Ref, "get": Get}
        if kw in simple:
            self.advance()
            return Expr(simple[kw](self.value()), None, span)
        if kw == "set":
            self.advance()
            return Expr(Set(self.value(), self.value()), None, span)
        if kw == "eq":
            self.advance()
            return Expr(Eq(self.value(), self.value()), None, span)
        if kw == "ext":
            self.advance()
            return Expr(Ext(self.value(), self.value(), self.value()), None, span)
        if kw == "proj":
            self.advance()
            m = self.mode()
            return Expr(Proj(m, self.value(), self.value()), None, span)
        if kw == "openDb":
            self.advance()
            m = self.mode()
            return Expr(OpenDb(m, self.value()), None, span)
        if kw == "filterDb":
            self.advance()
            m = self.mode()
            return Expr(FilterDb(m, self.value(), self.value()), None, span)
        if kw == "joinDb":
            self.advance()
            m = self.mode()
            args = [self.value() for _ in range(4)]
            return Expr(JoinDb(m, *args), None, span)
        if kw == "rcc":
            self.advance()
            name = self.ident()
            self.expect("{")
            body = self.expr()
            self.expect("}")
            return Expr(Rcc(name, body), None, span)
        self.fail("expected an expression")

    # -- values -------------------------------------------------------------

    def value(self) -> Value:
        t = self.tok
        span = t.span
        if t.kind == "int":
            self.advance()
            n = int(t.text)
            if not INT64_MIN <= n <= INT64_MAX:
                raise ParseError("integer literal out of 64-bit range", span)
            return Value(Num(n), None, span)
        if t.kind == "str":
            self.advance()
            try:
                s = json.loads(t.text)
            except json.JSONDecodeError:
                raise ParseError("malformed string literal", span) from None
            return Value(Str(s), None, span)
        if t.kind != "ident":
            self.fail("expected a value")
        if t.text == "true" or t.text == "false":
            self.advance()
            return Value(Bool(t.text == "true"), None, span)
        if t.text == "unit":
            self.advance()
            return Value(Unit(), None, span)
        if t.text == "dict":
            self.advance()
            self.expect("{")
            entries = []
            while not self.at("}"):
                k = self.value()
                self.expect("->")
                entries.append((k, self.value()))
                if not self.at(","):
                    break
                self.advance()
            self.expect("}")
            return Value(DictV(tuple(entries)), None, span)
        if t.text == "othunk":
            self.advance()
            self.expect("{")
            body = self.expr()
            self.expect("}")
            return Value(OThunk(body), None, span)
        return Value(Var(self.ident()), None, span)

    # -- types --------------------------------------------------------------

    def ctype(self) -> CompType:
        span = self.tok.span
        t = self.type_()
        if not is_comp_type(t):
            raise ParseError(f"expected a computation type, found value type {render(t)}", span)
        return t

    def vtype(self) -> ValueType:
        span = self.tok.span
        t = self.type_atom()
        if not is_value_type(t):
            raise ParseError(f"expected a value type, found computation type {render(t)}", span)
        return t

    def type_(self):
        t = self.type_atom()
        if self.at("->") and is_value_type(t):
            self.advance()
            return Arrow(t, self.ctype())
        return t

    def type_atom(self):
        t = self.tok
        if self.at("("):
            self.advance()
            inner = self.type_()
            self.expect(")")
            return inner
        if self.at("?"):
            self.advance()
            return UNKNOWN
        if t.kind == "int" and t.text == "1":
            self.advance()
            return UNIT
        if t.kind == "ident":
            base = {"Num": NUM, "Str": STR, "Bool": BOOL}
            if t.text in base:
                self.advance()
                return base[t.text]
            if t.text == "F":
                self.advance()
                return FT(self.vtype())
            if t.text == "U":
                self.advance()
                return UT(self.ctype())
            if t.text == "Ref":
                self.advance()
                return RefT(self.vtype())
            if t.text == "Db":
                self.advance()
                return DbT(self.vtype())
            if t.text == "Dict":
                self.advance()
                self.expect("{")
                entries = []
                while not self.at("}"):
                    kspan = self.tok.span
                    k = self.value()
                    try:
                        key = key_of(k)
                    except Exception:
                        raise ParseError("dict type keys must be literal first-order values", kspan) from None
                    self.expect(":")
                    entries.append((key, self.vtype_full()))
                    if not self.at(","):
                        break
                    self.advance()
                self.expect("}")
                return DictT(tuple(entries))
        self.fail("expected a type")

    def vtype_full(self) -> ValueType:
        span = self.tok.span
        t = self.type_()
        if not is_value_type(t):
            raise ParseError(f"expected a value type, found computation type {render(t)}", span)
        return t


def parse_program(text: str) -> Expr:
    return Parser(text).program()


def parse_type(text: str):
    p = Parser(text)
    t = p.type_()
    if p.tok.kind != "eof":
        p.fail("unexpected input after the type")
    return t


# ---------------------------------------------------------------------------
# Printing


def print_expr(e: Expr, indent: int = 0) -> str:
    return _pe(e.pre, indent)


def _atomic(e: Expr, indent: int) -> str:
    s = print_expr(e, indent)
    if isinstance(e.pre, (Let, Lam)):
        return f"({s})"
    return s


def _pe(p: PreExpr, ind: int) -> str:
    pad = "  " * ind
    v = print_value
    match p:
        case Let(x, bound, body):
            b = print_expr(bound, ind + 1)
            if isinstance(bound.pre, Let):
                b = f"(\n{pad}  {b}\n{pad})"
            return f"let {x} = {b} in\n{pad}{print_expr(body, ind)}"
        case Lam(x, body):
            return f"lam {x}. {print_expr(body, ind)}"
        case App(fun, arg):
            return f"{_atomic(fun, ind)} @ {v(arg, ind)}"
        case Ret(x):
            return f"ret {v(x, ind)}"
        case Force(x):
            return f"force {v(x, ind)}"
        case Ref(x):
            return f"ref {v(x, ind)}"
        case Get(x):
            return f"get {v(x, ind)}"
        case Set(a, b):
            return f"set {v(a, ind)} {v(b, ind)}"
        case Eq(a, b):
            return f"eq {v(a, ind)} {v(b, ind)}"
        case Ext(a, b, c):
            return f"ext {v(a, ind)} {v(b, ind)} {v(c, ind)}"
        case Proj(m, a, b):
            return f"proj{m} {v(a, ind)} {v(b, ind)}"
        case Ascribe(body, c):
            return f"({_atomic(body, ind)} ?: {render(c)})"
        case Rcc(name, cont):
            return f"rcc {name} {{ {print_expr(cont, ind + 1)} }}"
        case OpenDb(m, a):
            return f"openDb{m} {v(a, ind)}"
        case FilterDb(m, a, b):
            return f"filterDb{m} {v(a, ind)} {v(b, ind)}"
        case JoinDb(m, a, b, c, d):
            return f"joinDb{m} {v(a, ind)} {v(b, ind)} {v(c, ind)} {v(d, ind)}"
    raise TypeError(f"not a pre-expression: {p!r}")


def print_value(val: Value, ind: int = 0) -> str:
    match val.pre:
        case Num(n):
            return str(n)
        case Str(s):
            return json.dumps(s, ensure_ascii=False)
        case Bool(b):
            return "true" if b else "false"
        case Unit():
            return "unit"
        case Var(x):
            return x
        case DictV(entries):
            inner = ", ".join(f"{print_value(k, ind)} -> {print_value(x, ind)}" for k, x in entries)
            return "dict{" + inner + "}"
        case OThunk(body):
            return f"othunk {{ {print_expr(body, ind + 1)} }}"
    return render_value(val)


def render_value(val: Value, *, full: bool = False) -> str:
    """Human-readable rendering of a (closed) run-time value."""
    match val.pre:
        case Thunk(env, _):
            return f"<thunk/{len(env)}-captured>"
        case Loc(loc):
            return f"<loc {loc}>"
        case Db(rows):
            from ovv.libdb import db_type

            head = f"<db {len(rows)} rows : {render(db_type(val))}>"
            if full and len(rows) <= 10:
                body = "".join(f"\n  {render_value(r, full=True)}" for r in rows)
                return head + body
            return head
        case DictV(entries):
            inner = ", ".join(
                f"{render_value(k, full=full)} -> {render_value(x, full=full)}" for k, x in entries
            )
            return "dict{" + inner + "}"
    return print_value(val)
