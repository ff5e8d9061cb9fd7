"""Seeded program generators for the property suites.

``random_pure`` builds closed, well-scoped but otherwise arbitrary programs
over the pure fragment. ``typed_program`` builds programs that are well typed
by construction with ground ascriptions, optionally using the store and rcc.
Both are plain functions of a ``random.Random`` so that corpora are
reproducible from a seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ovv.syntax import (
    App,
    Ascribe,
    Bool,
    DictV,
    Eq,
    Expr,
    Ext,
    Force,
    Get,
    Lam,
    Let,
    Mode,
    Num,
    OThunk,
    Proj,
    Rcc,
    Ref,
    Ret,
    Set,
    Str,
    Unit,
    Value,
    Var,
    value_of_key,
)
from ovv.typesys import (
    BOOL,
    NUM,
    STR,
    UNIT,
    Arrow,
    CompType,
    DictT,
    FT,
    RefT,
    UT,
    ValueType,
)

E = lambda pre: Expr(pre)  # noqa: E731
V = lambda pre: Value(pre)  # noqa: E731

_STRS = ["a", "b", "US", "UK", "name", ""]
_KEYS = [("str", "a"), ("str", "b"), ("str", "name"), ("num", 1), ("bool", True), ("unit",)]


# ---------------------------------------------------------------------------
# Untyped, well-scoped


class _Fresh:
    def __init__(self) -> None:
        self.n = 0

    def __call__(self, base: str = "x") -> str:
        self.n += 1
        return f"{base}{self.n}"


def _literal(rng: random.Random) -> Value:
    r = rng.random()
    if r < 0.4:
        return V(Num(rng.randint(-3, 5)))
    if r < 0.7:
        return V(Str(rng.choice(_STRS)))
    if r < 0.9:
        return V(Bool(rng.random() < 0.5))
    return V(Unit())


def random_value(rng: random.Random, scope: list[str], depth: int, fresh: _Fresh) -> Value:
    r = rng.random()
    if scope and r < 0.35:
        return V(Var(rng.choice(scope)))
    if depth > 0 and r < 0.5:
        return V(OThunk(random_expr(rng, scope, depth - 1, fresh)))
    if depth > 0 and r < 0.62:
        n = rng.randint(0, 3)
        entries = tuple(
            (random_key(rng, scope), random_value(rng, scope, depth - 1, fresh)) for _ in range(n)
        )
        return V(DictV(entries))
    return _literal(rng)


def random_key(rng: random.Random, scope: list[str]) -> Value:
    if scope and rng.random() < 0.15:
        return V(Var(rng.choice(scope)))
    return value_of_key(rng.choice(_KEYS))


def random_expr(rng: random.Random, scope: list[str], depth: int, fresh: _Fresh) -> Expr:
    rv = lambda: random_value(rng, scope, depth - 1, fresh)  # noqa: E731
    if depth <= 0:
        return E(Ret(random_value(rng, scope, 0, fresh)))
    r = rng.random()
    if r < 0.22:
        x = fresh()
        return E(Let(x, random_expr(rng, scope, depth - 1, fresh), random_expr(rng, scope + [x], depth - 1, fresh)))
    if r < 0.34:
        x = fresh()
        return E(Lam(x, random_expr(rng, scope + [x], depth - 1, fresh)))
    if r < 0.5:
        return E(App(random_expr(rng, scope, depth - 1, fresh), rv()))
    if r < 0.62:
        return E(Ret(rv()))
    if r < 0.72:
        return E(Force(rv()))
    if r < 0.82:
        mode = Mode.CERTAIN if rng.random() < 0.85 else Mode.UNCERTAIN
        return E(Proj(mode, rv(), random_key(rng, scope)))
    if r < 0.9:
        return E(Ext(rv(), random_key(rng, scope), rv()))
    if r < 0.98:
        return E(Eq(rv(), rv()))
    return E(Ascribe(random_expr(rng, scope, depth - 1, fresh), FT(NUM)))


def random_pure(rng: random.Random, depth: int = 6) -> Expr:
    return random_expr(rng, [], depth, _Fresh())


# ---------------------------------------------------------------------------
# Type-directed


@dataclass
class TypedGen:
    rng: random.Random
    store: bool = True
    rcc: bool = True
    fresh: _Fresh | None = None

    def __post_init__(self) -> None:
        if self.fresh is None:
            self.fresh = _Fresh()

    # types -----------------------------------------------------------------

    def vtype(self, depth: int = 2) -> ValueType:
        r = self.rng.random()
        if depth <= 0 or r < 0.55:
            return self.rng.choice([NUM, NUM, STR, BOOL, UNIT])
        if r < 0.8:
            n = self.rng.randint(0, 3)
            # keys may repeat: the rightmost binding shadows the others
            keys = [self.rng.choice(_KEYS) for _ in range(n)]
            return DictT(tuple((k, self.vtype(depth - 1)) for k in keys))
        return UT(self.ctype(depth - 1))

    def ctype(self, depth: int = 2) -> CompType:
        if depth > 0 and self.rng.random() < 0.3:
            return Arrow(self.vtype(depth - 1), self.ctype(depth - 1))
        return FT(self.vtype(depth - 1))

    # values ----------------------------------------------------------------

    def value(self, a: ValueType, ctx: list[tuple[str, ValueType]], depth: int) -> Value:
        same = [x for x, t in ctx if t == a]
        if same and self.rng.random() < 0.5:
            return V(Var(self.rng.choice(same)))
        if a == NUM:
            return V(Num(self.rng.randint(-5, 9)))
        if a == STR:
            return V(Str(self.rng.choice(_STRS)))
        if a == BOOL:
            return V(Bool(self.rng.random() < 0.5))
        if a == UNIT:
            return V(Unit())
        if isinstance(a, DictT):
            return V(DictV(tuple((value_of_key(k), self.value(t, ctx, depth - 1)) for k, t in a.entries)))
        if isinstance(a, UT):
            return V(OThunk(self.synth_comp(a.comp, ctx, depth - 1)))
        if isinstance(a, RefT):
            refs = [x for x, t in ctx if t == a]
            assert refs, "reference values come only from the context"
            return V(Var(self.rng.choice(refs)))
        raise AssertionError(a)

    # computations ----------------------------------------------------------

    def synth_comp(self, c: CompType, ctx, depth: int) -> Expr:
        """An expression that synthesizes exactly ``c`` (functions are ascribed)."""
        if isinstance(c, Arrow):
            r = self.rng.random()
            thunks = [x for x, t in ctx if t == UT(c)]
            if thunks and r < 0.4:
                return E(Force(V(Var(self.rng.choice(thunks)))))
            x = self.fresh("a")
            body = self.comp(c.res, ctx + [(x, c.arg)], depth - 1)
            return E(Ascribe(E(Lam(x, body)), c))
        return self.comp(c, ctx, depth)

    def comp(self, c: CompType, ctx, depth: int) -> Expr:
        if isinstance(c, Arrow):
            x = self.fresh("a")
            return E(Lam(x, self.comp(c.res, ctx + [(x, c.arg)], depth - 1)))
        a = c.value
        rng = self.rng
        if depth <= 0:
            return E(Ret(self.value(a, ctx, 0)))
        options = ["ret", "let", "app", "force", "proj", "ascribe"]
        if self.rcc:
            options.append("rcc")
        if self.store:
            options.append("ref")
        if a == BOOL:
            options.append("eq")
        if a == UNIT and any(isinstance(t, RefT) for _, t in ctx):
            options.append("set")
        if any(t == RefT(a) for _, t in ctx):
            options.append("get")
        if isinstance(a, DictT) and a.entries:
            options.append("ext")
        pick = rng.choice(options)
        d = depth - 1
        if pick == "ret":
            return E(Ret(self.value(a, ctx, d)))
        if pick == "let":
            b = self.vtype(1)
            x = self.fresh()
            return E(Let(x, self.comp(FT(b), ctx, d), self.comp(c, ctx + [(x, b)], d)))
        if pick == "app":
            b = self.vtype(1)
            fun = self.synth_comp(Arrow(b, c), ctx, d)
            return E(App(fun, self.value(b, ctx, d)))
        if pick == "force":
            return E(Force(self.value(UT(c), ctx, d)))
        if pick == "proj":
            k = rng.choice(_KEYS)
            others = [(rng.choice(_KEYS), self.vtype(0)) for _ in range(rng.randint(0, 3))]
            dt = DictT(tuple(others) + ((k, a),))
            mode = Mode.UNCERTAIN if rng.random() < 0.7 else Mode.CERTAIN
            return E(Proj(mode, self.value(dt, ctx, d), value_of_key(k)))
        if pick == "ascribe":
            return E(Ascribe(self.comp(c, ctx, d), c))
        if pick == "rcc":
            return E(Rcc(rng.choice(["id", "chk_state"]), self.comp(c, ctx, d)))
        if pick == "ref":
            b = self.vtype(1)
            r = self.fresh("r")
            bound = E(Ref(self.value(b, ctx, d)))
            return E(Let(r, bound, self.comp(c, ctx + [(r, RefT(b))], d)))
        if pick == "eq":
            b = rng.choice([NUM, STR, BOOL, UNIT, DictT(((("str", "a"), NUM),))])
            return E(Eq(self.value(b, ctx, d), self.value(b, ctx, d)))
        if pick == "set":
            refs = [(x, t) for x, t in ctx if isinstance(t, RefT)]
            x, t = rng.choice(refs)
            return E(Set(V(Var(x)), self.value(t.elem, ctx, d)))
        if pick == "get":
            refs = [x for x, t in ctx if t == RefT(a)]
            return E(Get(V(Var(rng.choice(refs)))))
        if pick == "ext":
            *init, (k, t) = a.entries
            return E(Ext(self.value(DictT(tuple(init)), ctx, d), value_of_key(k), self.value(t, ctx, d)))
        raise AssertionError(pick)


def typed_program(rng: random.Random, depth: int = 6, *, store: bool = True, rcc: bool = True) -> Expr:
    g = TypedGen(rng, store=store, rcc=rcc)
    c = FT(g.vtype(1))
    return g.comp(c, [], depth)


def typed_pure(rng: random.Random, depth: int = 6) -> Expr:
    """Well-typed programs without store or rcc, with every projection certain.

    The pure fragment has no rcc, so a ``?`` projection could never be upgraded
    at run time; the oracle comparison wants terminating, meaningful results.
    """
    from ovv.checker import chk_state
    from ovv.state import initial_state

    e = typed_program(rng, depth, store=False, rcc=False)
    s = chk_state(initial_state(e))
    return Expr(s.focus)


# ---------------------------------------------------------------------------
# Database pipelines over the fixtures in corpus/programs

_TABLES = {
    "scores.csv": {"student": STR, "course": STR, "score": NUM},
    "courses.csv": {"course": STR, "room": NUM},
}
_SAMPLES = {STR: ["ana", "ben", "math", "art", "zed"], NUM: [64, 78, 85, 91, 101, 204, 0]}


def db_program_source(rng: random.Random) -> str:
    """Surface text of a gradual pipeline in which every db is re-checked after opening."""
    lines = []
    names = []
    for i in range(rng.randint(1, 3)):
        table = rng.choice(sorted(_TABLES))
        name = f"t{i}"
        lines.append(f'let {name} = (let t = openDb? "{table}" in rcc chk_state {{ ret t }}) in')
        names.append((name, table))
        if rng.random() < 0.7:
            col, ty = rng.choice(sorted(_TABLES[table].items()))
            lit = rng.choice(_SAMPLES[ty])
            lit_src = f'"{lit}"' if ty == STR else str(lit)
            keep = f"f{i}"
            lines.append(
                f'let {keep} = filterDb? {name} othunk {{ lam r. let c = proj? r "{col}" in eq c {lit_src} }} in'
            )
            names.append((keep, table))
    (a, ta), (b, tb) = rng.choice(names), rng.choice(names)
    shared = sorted(set(_TABLES[ta]) & set(_TABLES[tb]))
    shared = [c for c in shared if _TABLES[ta][c] == _TABLES[tb][c]]
    if shared and rng.random() < 0.8:
        col = rng.choice(shared)
        lines.append(f'joinDb? {a} "{col}" {b} "{col}"')
    else:
        lines.append(f"ret {a}")
    return "\n".join(lines) + "\n"
