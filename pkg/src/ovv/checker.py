"""Bidirectional gradual checker that also rewrites the terms it checks.

Every judgment either returns the transformed term (annotations filled,
uncertain operations upgraded where the types allow, ascriptions discharged)
or raises :class:`Rejected`.

Two details matter for re-checking a running program. A node annotated by an
earlier check keeps that annotation only as a hint: it is recomputed on every
pass, so operations can move from ``?`` to ``!`` as types sharpen. A node whose
annotation came from a discharged ascription (``Expr.ascribed``) instead keeps
its claim, which is re-verified each time.
"""

from __future__ import annotations

from dataclasses import dataclass

from ovv.libdb import db_type
from ovv.state import FrApp, FrLet, Halt, MachineState, Stack, Store
from ovv.syntax import (
    NOSPAN,
    App,
    Ascribe,
    Bool,
    Db,
    DictV,
    Env,
    Eq,
    Expr,
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
    TypingCtx,
    Unknown,
    UT,
    ValueType,
    consistent_c,
    consistent_v,
    ground,
    render,
    store_typing,
)


class Rejected(Exception):
    def __init__(self, rule: str, message: str, src: Span = NOSPAN) -> None:
        super().__init__(f"[{rule}] {message}")
        self.rule = rule
        self.message = message
        self.src = src

    def diagnostic(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.src.line}:{self.src.col}: [{self.rule}] {self.message}"


@dataclass(frozen=True)
class CheckedState:
    state: MachineState
    type: CompType


# ---------------------------------------------------------------------------
# Values


def _closed_key(v: Value, rule: str):
    try:
        return key_of(v)
    except Incomparable:
        raise Rejected(rule, "dictionary key must be a closed first-order value", v.src) from None


def syn_value(ctx: TypingCtx, v: Value) -> tuple[ValueType, Value]:
    match v.pre:
        case Var(name):
            t = ctx.var(name)
            if t is None:
                raise Rejected("typv_var", f"unbound variable {name}", v.src)
            return t, v.with_annot(t)
        case Loc(loc):
            elem = ctx.loc(loc)
            if elem is None:
                raise Rejected("typv_loc", f"dangling location {loc}", v.src)
            t = RefT(elem)
            return t, v.with_annot(t)
        case Num():
            return NUM, v.with_annot(NUM)
        case Str():
            return STR, v.with_annot(STR)
        case Bool():
            return BOOL, v.with_annot(BOOL)
        case Unit():
            return UNIT, v.with_annot(UNIT)
        case DictV(entries):
            dt = DictT()
            out = []
            for k, x in entries:
                key = _closed_key(k, "typv_dictCons")
                _, k2 = syn_value(ctx, k)
                tx, x2 = syn_value(ctx, x)
                dt = dt.extend(key, tx)
                out.append((k2, x2))
            return dt, Value(DictV(tuple(out)), dt, v.src)
        case OThunk(body):
            c, body2 = syn_exp(ctx, body)
            t = UT(c)
            return t, Value(OThunk(body2), t, v.src)
        case Thunk(env, body):
            binds, env2 = syn_env(ctx, env)
            c, body2 = syn_exp(ctx.with_vars(binds), body)
            t = UT(c)
            return t, Value(Thunk(env2, body2), t, v.src)
        case Db():
            t = db_type(v)
            return t, v.with_annot(t)
    raise TypeError(f"not a pre-value: {v.pre!r}")


def chk_value(ctx: TypingCtx, v: Value, a: ValueType) -> Value:
    # Thunks are checked structurally so that their bodies may be checking-only
    # terms such as unannotated functions.
    if isinstance(a, UT):
        match v.pre:
            case OThunk(body):
                return Value(OThunk(chk_exp(ctx, body, a.comp)), a, v.src)
            case Thunk(env, body):
                binds, env2 = syn_env(ctx, env)
                body2 = chk_exp(ctx.with_vars(binds), body, a.comp)
                return Value(Thunk(env2, body2), a, v.src)
    t, v2 = syn_value(ctx, v)
    if not consistent_v(t, a):
        raise Rejected("sub", f"value of type {render(t)} where {render(a)} is expected", v.src)
    return v2


def syn_env(ctx: TypingCtx, env: Env) -> tuple[tuple[tuple[str, ValueType], ...], Env]:
    """Types each binding under the store part of ``ctx`` (bound values are closed)."""
    outer = ctx.store_only()
    binds = []
    out = []
    for x, v in env:
        t, v2 = syn_value(outer, v)
        binds.append((x, t))
        out.append((x, v2))
    return tuple(binds), Env(tuple(out))


# ---------------------------------------------------------------------------
# Expressions


def syn_exp(ctx: TypingCtx, e: Expr) -> tuple[CompType, Expr]:
    if isinstance(e.pre, Ascribe):
        return _discharge(ctx, e)
    if e.ascribed and e.annot is not None:
        pre = _check_pre(ctx, e.pre, e.annot, e.src)
        return e.annot, Expr(pre, e.annot, e.src, ascribed=True)
    c, pre = _syn_pre(ctx, e.pre, e.src, e.annot)
    return c, Expr(pre, c, e.src)


def chk_exp(ctx: TypingCtx, e: Expr, c: CompType) -> Expr:
    if isinstance(e.pre, Lam) and not e.ascribed and isinstance(c, Arrow):
        body = chk_exp(ctx.bind(e.pre.param, c.arg), e.pre.body, c.res)
        return Expr(Lam(e.pre.param, body), c, e.src)
    d, e2 = syn_exp(ctx, e)
    if not consistent_c(d, c):
        raise Rejected("sub", f"expression of type {render(d)} where {render(c)} is expected", e.src)
    return e2


def _discharge(ctx: TypingCtx, e: Expr) -> tuple[CompType, Expr]:
    assert isinstance(e.pre, Ascribe)
    claim = e.pre.annot
    inner = e.pre.body
    checked = chk_exp(ctx, inner, claim)
    if checked.ascribed:
        # an inner ascription already fixed the type; the outer claim was verified against it
        return checked.annot, checked
    return claim, Expr(checked.pre, claim, checked.src, ascribed=True)


def _check_pre(ctx: TypingCtx, pre: PreExpr, c: CompType, src: Span) -> PreExpr:
    if isinstance(pre, Lam) and isinstance(c, Arrow):
        return Lam(pre.param, chk_exp(ctx.bind(pre.param, c.arg), pre.body, c.res))
    d, pre2 = _syn_pre(ctx, pre, src, None)
    if not consistent_c(d, c):
        raise Rejected("annot", f"expression of type {render(d)} ascribed {render(c)}", src)
    return pre2


def _expect_f(c: CompType, rule: str, src: Span, what: str) -> ValueType:
    if not isinstance(c, FT):
        raise Rejected(rule, f"{what} has type {render(c)}, expected a returner F A", src)
    return c.value


def _uncertain_db(t: ValueType, rule: str, src: Span) -> None:
    if not consistent_v(t, DbT(UNKNOWN)):
        raise Rejected(rule, f"expected a db, found {render(t)}", src)


def _comparable(t: ValueType) -> bool:
    match t:
        case UT() | DbT():
            return False
        case DictT(entries):
            return all(_comparable(x) for _, x in entries)
    return True


def _syn_pre(ctx: TypingCtx, pre: PreExpr, src: Span, annot: CompType | None) -> tuple[CompType, PreExpr]:
    match pre:
        case App(fun, arg):
            cf, fun2 = syn_exp(ctx, fun)
            if not isinstance(cf, Arrow):
                raise Rejected("app", f"applied expression has type {render(cf)}, expected a function", src)
            arg2 = chk_value(ctx, arg, cf.arg)
            return cf.res, App(fun2, arg2)

        case Lam(x, body):
            if isinstance(annot, Arrow):
                body2 = chk_exp(ctx.bind(x, annot.arg), body, annot.res)
                return annot, Lam(x, body2)
            raise Rejected("lam", "checking-only term in synthesizing position; add an ascription", src)

        case Let(x, bound, body):
            c1, bound2 = syn_exp(ctx, bound)
            a = _expect_f(c1, "let", bound.src, "bound expression")
            c2, body2 = syn_exp(ctx.bind(x, a), body)
            return c2, Let(x, bound2, body2)

        case Ret(v):
            a, v2 = syn_value(ctx, v)
            return FT(a), Ret(v2)

        case Force(v):
            t, v2 = syn_value(ctx, v)
            if isinstance(t, UT):
                return t.comp, Force(v2)
            if isinstance(t, Unknown):
                return FT(UNKNOWN), Force(v2)
            raise Rejected("force", f"forcing a value of type {render(t)}", src)

        case Ref(v):
            a, v2 = syn_value(ctx, v)
            return FT(RefT(a)), Ref(v2)

        case Get(v):
            t, v2 = syn_value(ctx, v)
            if not isinstance(t, RefT):
                raise Rejected("get", f"reading a value of type {render(t)}", src)
            return FT(t.elem), Get(v2)

        case Set(target, v):
            t, target2 = syn_value(ctx, target)
            if not isinstance(t, RefT):
                raise Rejected("set", f"writing through a value of type {render(t)}", src)
            v2 = chk_value(ctx, v, t.elem)
            return FT(UNIT), Set(target2, v2)

        case Ext(rec, key, v):
            t, rec2 = syn_value(ctx, rec)
            if not isinstance(t, DictT):
                raise Rejected("ext", f"extending a value of type {render(t)}", src)
            k = _closed_key(key, "ext")
            _, key2 = syn_value(ctx, key)
            b, v2 = syn_value(ctx, v)
            return FT(t.extend(k, b)), Ext(rec2, key2, v2)

        case Proj(mode, rec, key):
            t, rec2 = syn_value(ctx, rec)
            _, key2 = syn_value(ctx, key)
            if isinstance(t, DictT):
                try:
                    k = key_of(key)
                except Incomparable:
                    k = None
                if k is not None:
                    a = t.lookup(k)
                    if a is not None:
                        return FT(a), Proj(Mode.CERTAIN, rec2, key2)
                    raise Rejected("p!", f"field {_show_key(key)} is absent from {render(t)}", src)
                if mode is Mode.CERTAIN:
                    raise Rejected("p!", "certain projection needs a closed first-order key", src)
                raise Rejected("p?", "projection key is not a closed first-order value", src)
            if isinstance(t, Unknown) and mode is Mode.UNCERTAIN:
                return FT(UNKNOWN), Proj(Mode.UNCERTAIN, rec2, key2)
            if mode is Mode.CERTAIN:
                raise Rejected("p!", f"certain projection from a value of type {render(t)}", src)
            raise Rejected("p?", f"projection from a value of type {render(t)}", src)

        case Eq(a, b):
            ta, a2 = syn_value(ctx, a)
            tb, b2 = syn_value(ctx, b)
            if not (_comparable(ta) and _comparable(tb)):
                raise Rejected("eq", f"cannot compare {render(ta)} with {render(tb)}", src)
            if not (consistent_v(ta, tb) or consistent_v(tb, ta)):
                raise Rejected("eq", f"comparing {render(ta)} with {render(tb)}", src)
            return FT(BOOL), Eq(a2, b2)

        case Rcc(name, cont):
            c, cont2 = syn_exp(ctx, cont)
            return c, Rcc(name, cont2)

        case OpenDb(mode, path):
            if mode is Mode.CERTAIN:
                raise Rejected("openDb!", "opening a db has no certain rule", src)
            path2 = chk_value(ctx, path, STR)
            return FT(DbT(UNKNOWN)), OpenDb(Mode.UNCERTAIN, path2)

        case FilterDb(mode, db, pred):
            t, db2 = syn_value(ctx, db)
            why = "db row type is not fully known"
            if isinstance(t, DbT) and ground(t.row):
                try:
                    pred2 = chk_value(ctx, pred, UT(Arrow(t.row, FT(BOOL))))
                except Rejected as exc:
                    why = exc.message
                else:
                    return FT(t), FilterDb(Mode.CERTAIN, db2, pred2)
            if mode is Mode.CERTAIN:
                raise Rejected("filterDb!", why, src)
            _uncertain_db(t, "filterDb?", src)
            pred2 = chk_value(ctx, pred, UT(Arrow(UNKNOWN, FT(BOOL))))
            return FT(DbT(UNKNOWN)), FilterDb(Mode.UNCERTAIN, db2, pred2)

        case JoinDb(mode, db1, key1, db2, key2):
            t1, db1b = syn_value(ctx, db1)
            _, key1b = syn_value(ctx, key1)
            t3, db2b = syn_value(ctx, db2)
            _, key2b = syn_value(ctx, key2)
            result = _join_schema(t1, key1, t3, key2)
            if isinstance(result, DictT):
                return FT(DbT(result)), JoinDb(Mode.CERTAIN, db1b, key1b, db2b, key2b)
            if mode is Mode.CERTAIN:
                raise Rejected("joinDb!", result, src)
            _uncertain_db(t1, "joinDb?", src)
            _uncertain_db(t3, "joinDb?", src)
            return FT(DbT(UNKNOWN)), JoinDb(Mode.UNCERTAIN, db1b, key1b, db2b, key2b)

        case Ascribe():
            # reached only through _check_pre on a nested node
            c, e2 = _discharge(ctx, Expr(pre, None, src))
            return c, e2.pre
    raise TypeError(f"not a pre-expression: {pre!r}")


def _join_schema(t1: ValueType, key1: Value, t3: ValueType, key2: Value) -> DictT | str:
    """Result row type for a certain join, or the reason one is not available."""
    if not (isinstance(t1, DbT) and isinstance(t1.row, DictT)):
        return "left db row type is not a known dict"
    if not (isinstance(t3, DbT) and isinstance(t3.row, DictT)):
        return "right db row type is not a known dict"
    try:
        a = t1.row.lookup(key_of(key1))
        b = t3.row.lookup(key_of(key2))
    except Incomparable:
        return "join keys must be closed first-order values"
    if a is None or b is None:
        return "join key field is absent from a db row type"
    if a != b:
        return f"join key fields have different types {render(a)} and {render(b)}"
    return DictT(t1.row.entries + t3.row.entries)


def _show_key(v: Value) -> str:
    from ovv.syntax import render_key

    return render_key(key_of(v))


# ---------------------------------------------------------------------------
# Stacks and states


def chk_stack(ctx: TypingCtx, k: Stack, c: CompType) -> Stack:
    # iterative so that deep continuations do not exhaust the host stack
    checked: list[tuple[type, tuple]] = []
    cur = k
    while not isinstance(cur, Halt):
        if isinstance(cur, FrLet):
            if not isinstance(c, FT):
                raise Rejected("k-let", f"let frame receives a computation of type {render(c)}", cur.body.src)
            binds, env2 = syn_env(ctx, cur.env)
            c, body2 = syn_exp(ctx.with_vars(binds).bind(cur.name, c.value), cur.body)
            checked.append((FrLet, (env2, cur.name, body2)))
        elif isinstance(cur, FrApp):
            if not isinstance(c, Arrow):
                raise Rejected("k-app", f"application frame receives a computation of type {render(c)}", cur.arg.src)
            arg2 = chk_value(ctx.store_only(), cur.arg, c.arg)
            c = c.res
            checked.append((FrApp, (arg2,)))
        cur = cur.rest
    out: Stack = cur
    for kind, fields in reversed(checked):
        out = kind(*fields, out)
    return out


def fill_store(store: Store) -> Store:
    """Annotate stored values that lack a type, where one can be synthesized.

    Iterates to a fixpoint because a cell may point at another cell.
    """
    cells = dict(store.cells)
    changed = True
    while changed:
        changed = False
        ctx = store_typing(Store(cells, store.next))
        for loc, v in cells.items():
            if v.annot is not None:
                continue
            try:
                t, _ = syn_value(ctx, v)
            except Rejected:
                continue
            if isinstance(t, Unknown):
                continue
            cells[loc] = v.with_annot(t)
            changed = True
    from types import MappingProxyType

    return Store(MappingProxyType(cells), store.next)


def check_state(s: MachineState) -> CheckedState:
    store = fill_store(s.store)
    ctx0 = store_typing(store)
    binds, env2 = syn_env(ctx0, s.env)
    ctx = ctx0.with_vars(binds)
    focus_annot = None
    if isinstance(s.focus, Lam) and s.focus_annot is None and isinstance(s.stack, FrApp):
        # a function in focus about to receive its argument: type it from that argument
        a, _ = syn_value(ctx0, s.stack.arg)
        c2, body2 = syn_exp(ctx.bind(s.focus.param, a), s.focus.body)
        c: CompType = Arrow(a, c2)
        focus: PreExpr = Lam(s.focus.param, body2)
    else:
        e = Expr(s.focus, s.focus_annot, s.focus_src, ascribed=s.focus_annot is not None)
        c, e2 = syn_exp(ctx, e)
        focus = e2.pre
        if e2.ascribed:
            focus_annot = e2.annot
    stack = chk_stack(ctx0, s.stack, c)
    return CheckedState(MachineState(store, stack, env2, focus, s.focus_src, focus_annot), c)


def chk_state(s: MachineState) -> MachineState:
    return check_state(s).state
