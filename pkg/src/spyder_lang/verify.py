"""Bounded verification of Hoare triples.

Validity is decided by enumerating program states over a small domain:
integers in ``[int_lo, int_hi]`` and collections of each length in
``sizes``.  Enumeration is lazy.  A state starts empty and a cell (a scalar
or one array element) gets a value only when evaluation reads it, so cells
that a check never looks at are never enumerated.

Preconditions guide the search.  Conjuncts are processed one at a time,
index-guarded quantifiers are instantiated per index, and an equation whose
one side is a still-unknown cell fixes that cell instead of enumerating it.
So a cell that the precondition defines from others (``w = 7 * d``) takes its
defined value even when that lies outside the integer range.  When the
state space exceeds ``sample_budget`` leaves, the search falls back to seeded
random sampling and can then only answer Invalid or Unknown.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import imp, solver
from . import syntax as spy
from .analysis import (
    TranslationContext, WellFormednessError, assigned_vars, check_wellformed,
    free_vars, modified_vars,
)
from .imp import (
    Assume, BinOp, BoolLit, Exists, Fault, Forall, ImpState, IntLit, Ite,
    Machine, NeedCell, Select, Size, StepBudgetExceeded, UnOp, Vacuous, Var,
)


@dataclass(frozen=True)
class BoundedDomain:
    int_lo: int = -4
    int_hi: int = 4
    sizes: tuple = (1, 2, 3)
    sample_budget: int = 200_000
    rng_seed: int = 0
    random_samples: int = 2_000
    step_budget: int = 100_000

    def __post_init__(self):
        if self.int_lo > self.int_hi:
            raise ValueError("int_lo must not exceed int_hi")
        object.__setattr__(self, "sizes", tuple(self.sizes))
        if not self.sizes or any(n <= 0 for n in self.sizes):
            raise ValueError("sizes must be a non-empty list of positive lengths")
        if self.sample_budget <= 0:
            raise ValueError("sample_budget must be positive")


@dataclass(frozen=True)
class Verdict:
    status: str  # valid | invalid | unknown
    counterexample: ImpState | None = None
    condition: str = ""
    explored: int = 0

    @property
    def is_valid(self) -> bool:
        return self.status == "valid"

    @property
    def is_invalid(self) -> bool:
        return self.status == "invalid"

    @property
    def is_unknown(self) -> bool:
        return self.status == "unknown"

    def __str__(self):
        if self.is_invalid:
            return f"invalid ({self.condition}) at {self.counterexample}"
        if self.is_unknown:
            return f"unknown ({self.condition})"
        return "valid"


VALID = Verdict("valid")


@dataclass
class Vocabulary:
    """Names a check ranges over.

    ``arrays`` maps each array to its declared length (None means "every
    length in the domain"); ``index_vars`` maps loop indices to the array they
    index, so their values are drawn from the valid indices only.
    """

    scalars: set = field(default_factory=set)
    arrays: dict = field(default_factory=dict)
    index_vars: dict = field(default_factory=dict)

    def merge(self, other: "Vocabulary") -> "Vocabulary":
        arrays = dict(other.arrays)
        arrays.update({k: v for k, v in self.arrays.items() if v is not None or k not in arrays})
        return Vocabulary(self.scalars | other.scalars, arrays, {**other.index_vars, **self.index_vars})

    @classmethod
    def of(cls, *terms, sizes=None, index_vars=None) -> "Vocabulary":
        scalars, arrays = set(), set()
        for t in terms:
            _collect(t, set(), scalars, arrays)
        sizes = sizes or {}
        return cls(scalars - arrays, {a: sizes.get(a) for a in arrays}, dict(index_vars or {}))

    @classmethod
    def for_program(cls, prog: spy.Program, params=(), index_vars=None) -> "Vocabulary":
        sizes = prog.size_map
        scalars = set(prog.scalars) | set(params)
        return cls(scalars, {a: sizes.get(a) for a in prog.collections}, dict(index_vars or {}))


def _collect(t, bound, scalars, arrays):
    if t is None:
        return
    k = type(t)
    if k is Var:
        if t.name not in bound:
            scalars.add(t.name)
    elif k is Select:
        arrays.add(t.arr)
        _collect(t.idx, bound, scalars, arrays)
    elif k is Size:
        arrays.add(t.arr)
    elif k is BinOp:
        _collect(t.lhs, bound, scalars, arrays)
        _collect(t.rhs, bound, scalars, arrays)
    elif k is UnOp:
        _collect(t.arg, bound, scalars, arrays)
    elif k is Ite:
        for sub in (t.cond, t.then, t.orelse):
            _collect(sub, bound, scalars, arrays)
    elif k in (Forall, Exists):
        _collect(t.body, bound | {t.var}, scalars, arrays)
    elif k is imp.Assign:
        scalars.add(t.var)
        _collect(t.rhs, bound, scalars, arrays)
    elif k is imp.Store:
        arrays.add(t.arr)
        _collect(t.idx, bound, scalars, arrays)
        _collect(t.rhs, bound, scalars, arrays)
    elif k is imp.If:
        for sub in (t.cond, t.then, t.orelse):
            _collect(sub, bound, scalars, arrays)
    elif k is imp.While:
        _collect(t.cond, bound, scalars, arrays)
        _collect(t.body, bound, scalars, arrays)
    elif k is imp.Seq:
        _collect(t.first, bound, scalars, arrays)
        _collect(t.second, bound, scalars, arrays)
    elif k is Assume:
        _collect(t.cond, bound, scalars, arrays)


# -- the enumerator ---------------------------------------------------------


class _BudgetExhausted(Exception):
    pass


class _Search:
    """One pass of guided enumeration at fixed array lengths."""

    def __init__(self, vocab: Vocabulary, dom: BoundedDomain, sizes: dict, rng=None, leaves: int = 0):
        self.vocab = vocab
        self.dom = dom
        self.sizes = sizes
        self.rng = rng
        self.leaves = leaves
        self.range = list(range(dom.int_lo, dom.int_hi + 1))
        self.hit_step_budget = False

    # helpers
    def machine(self, assign, env=None, steps=None):
        values = {**assign, **env} if env else dict(assign)
        return Machine(values, self.sizes, (self.dom.int_lo, self.dom.int_hi),
                       self.dom.step_budget if steps is None else steps)

    def eval(self, e, env, assign):
        return self.machine(assign, env).eval(e)

    def candidates(self, cell) -> list:
        if isinstance(cell, str) and cell in self.vocab.index_vars:
            coll = self.vocab.index_vars[cell]
            return list(range(self.sizes.get(coll, 0)))
        return list(self.range)

    def choose(self, cands):
        if self.rng is None:
            return cands
        return [self.rng.choice(cands)] if cands else []

    def leaf(self):
        self.leaves += 1
        if self.rng is None and self.leaves > self.dom.sample_budget:
            raise _BudgetExhausted()

    # phase 1: states satisfying the guide
    def satisfy(self, stack, assign):
        while stack is not None:
            (e, env), rest = stack
            t = type(e)
            if t is BinOp and e.op == "&&":
                stack = ((e.lhs, env), ((e.rhs, env), rest))
                continue
            if t is BoolLit and e.value:
                stack = rest
                continue
            if t is Forall:
                try:
                    values = list(self.machine(assign, env).quant_range(e.var, e.body))
                except Fault:
                    self.leaf()
                    return
                new = rest
                for k in reversed(values):
                    new = ((e.body, {**env, e.var: k}), new)
                stack = new
                continue
            if t is Exists and not env:
                # a top-level witness is just another unknown cell
                stack = ((e.body, env), rest)
                continue
            if t is BinOp and e.op == "==>":
                try:
                    cond = self.eval(e.lhs, env, assign)
                except NeedCell as need:
                    for c in self.choose(self.candidates(need.cell)):
                        yield from self.satisfy(stack, {**assign, need.cell: c})
                    return
                except Fault:
                    self.leaf()
                    return
                if cond is True:
                    stack = ((e.rhs, env), rest)
                elif cond is False:
                    stack = rest
                else:
                    self.leaf()
                    return
                continue
            if t is BinOp and e.op == "<=>":
                # once one side is known the other becomes the goal (or its negation)
                need = None
                for known, other in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
                    try:
                        cond = self.eval(known, env, assign)
                    except NeedCell as exc:
                        need = need or exc.cell
                        continue
                    except Fault:
                        self.leaf()
                        return
                    if type(cond) is not bool:
                        self.leaf()
                        return
                    stack = ((other if cond else UnOp("!", other), env), rest)
                    break
                else:
                    for c in self.choose(self.candidates(need)):
                        yield from self.satisfy(stack, {**assign, need: c})
                    return
                continue
            try:
                v = self.eval(e, env, assign)
            except NeedCell as need:
                yield from self._branch(e, env, assign, need.cell, stack)
                return
            except Fault:
                self.leaf()
                return
            if v is not True:
                self.leaf()
                return
            stack = rest
        yield assign

    def _branch(self, e, env, assign, cell, stack):
        forced = self._definitional(e, env, assign)
        if forced is not None:
            fcell, val = forced
            yield from self.satisfy(stack, {**assign, fcell: val})
            return
        cands = self.candidates(cell)
        if type(e) is BinOp and e.op == "=":
            sol = self._affine(e, env, assign, cell)
            if sol is not None and sol not in cands:
                cands = cands + [sol]
        kept = []
        for c in cands:
            try:
                ok = self.eval(e, env, {**assign, cell: c})
            except NeedCell:
                ok = True
            except Fault:
                ok = False
            if ok is True:
                kept.append(c)
        if not kept:
            self.leaf()
            return
        for c in self.choose(kept):
            yield from self.satisfy(stack, {**assign, cell: c})

    def _bare_cell(self, side, env, assign):
        if type(side) is Var:
            if side.name not in env and side.name not in assign:
                return side.name
        elif type(side) is Select:
            try:
                i = self.eval(side.idx, env, assign)
            except (NeedCell, Fault):
                return None
            if type(i) is int and 0 <= i < self.sizes.get(side.arr, 0) and (side.arr, i) not in assign:
                return (side.arr, i)
        return None

    def _definitional(self, e, env, assign):
        if type(e) is not BinOp or e.op not in ("=", "<=>"):
            return None
        for side, other in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
            cell = self._bare_cell(side, env, assign)
            if cell is None:
                continue
            try:
                val = self.eval(other, env, assign)
            except (NeedCell, Fault):
                continue
            return cell, val
        return None

    def _affine(self, e, env, assign, cell):
        fs = []
        for c in (0, 1, 2):
            try:
                a = self.eval(e.lhs, env, {**assign, cell: c})
                b = self.eval(e.rhs, env, {**assign, cell: c})
            except (NeedCell, Fault):
                return None
            if type(a) is not int or type(b) is not int:
                return None
            fs.append(a - b)
        d1, d2 = fs[1] - fs[0], fs[2] - fs[1]
        if d1 != d2 or d1 == 0 or fs[0] % d1:
            return None
        return -fs[0] // d1

    # phase 2: run the check, filling cells as they are read
    def check(self, assign, check):
        try:
            ok = check(self, dict(assign))
        except NeedCell as need:
            for c in self.choose(self.candidates(need.cell)):
                bad = self.check({**assign, need.cell: c}, check)
                if bad is not None:
                    return bad
            return None
        except Vacuous:
            self.leaf()
            return None
        except StepBudgetExceeded:
            self.leaf()
            self.hit_step_budget = True
            return None
        except Fault as exc:
            self.leaf()
            return assign, f"fault: {exc}"
        self.leaf()
        if ok is True:
            return None
        return assign, "postcondition does not hold"


def _size_options(vocab: Vocabulary, dom: BoundedDomain):
    free = sorted(a for a, n in vocab.arrays.items() if n is None)
    fixed = {a: n for a, n in vocab.arrays.items() if n is not None}
    if not free:
        return [fixed]
    return [{**fixed, **{a: n for a in free}} for n in dom.sizes]


def _counterexample(assign, vocab: Vocabulary, sizes: dict) -> ImpState:
    scalars = {s: 0 for s in vocab.scalars}
    scalars.update({k: v for k, v in assign.items() if isinstance(k, str) and k in vocab.scalars})
    cells = {k: v for k, v in assign.items() if isinstance(k, tuple)}
    return ImpState.from_cells({**scalars, **cells}, sizes, fill=0)


def search(guide, check, vocab: Vocabulary, dom: BoundedDomain) -> Verdict:
    """Look for a state satisfying ``guide`` on which ``check`` fails.

    ``check(search, values)`` returns True when the state is fine; it may
    raise NeedCell to ask for more of the state.
    """
    guide = guide if guide is not None else BoolLit(True)
    options = _size_options(vocab, dom)
    leaves = 0
    step_unknown = False
    try:
        for sizes in options:
            s = _Search(vocab, dom, sizes, leaves=leaves)
            for assign in s.satisfy(((guide, {}), None), {}):
                bad = s.check(assign, check)
                if bad is not None:
                    state, why = bad
                    return Verdict("invalid", _counterexample(state, vocab, sizes), why, s.leaves)
            leaves = s.leaves
            step_unknown |= s.hit_step_budget
    except _BudgetExhausted:
        return _sample(guide, check, vocab, dom, options)
    if step_unknown:
        return Verdict("unknown", None, "step budget exceeded", leaves)
    return Verdict("valid", None, "", leaves)


def _sample(guide, check, vocab, dom, options) -> Verdict:
    rng = random.Random(dom.rng_seed)
    for _ in range(dom.random_samples):
        sizes = options[rng.randrange(len(options))]
        s = _Search(vocab, dom, sizes, rng=rng)
        assign = next(s.satisfy(((guide, {}), None), {}), None)
        if assign is None:
            continue
        bad = s.check(assign, check)
        if bad is not None:
            state, why = bad
            return Verdict("invalid", _counterexample(state, vocab, sizes), why, dom.sample_budget)
    return Verdict("unknown", None, "state space exceeds the sample budget", dom.sample_budget)


def _post_check(stmt, post):
    def check(search: _Search, values):
        m = search.machine(values)
        if stmt is not None:
            m.exec(stmt)
        return m.eval(post)

    return check


def check_validity(f, params=(), dom: BoundedDomain | None = None, vocab: Vocabulary | None = None) -> Verdict:
    """Is the boolean Imp formula ``f`` true in every bounded state?

    For an implication ``A ==> B`` the antecedent guides the enumeration,
    and existential witnesses at the top of ``A`` are enumerated as cells.
    """
    dom = dom or BoundedDomain()
    if type(f) is BinOp and f.op == "==>":
        guide, goal = f.lhs, f.rhs
    else:
        guide, goal = None, f
    v = Vocabulary.of(guide, goal)
    v.scalars |= set(params)
    vocab = vocab.merge(v) if vocab else v
    vocab.scalars -= _witnesses(guide)
    return search(guide, _post_check(None, goal), vocab, dom)


def _witnesses(e) -> set:
    out = set()
    while e is not None:
        if type(e) is Exists:
            out.add(e.var)
            e = e.body
        elif type(e) is BinOp and e.op == "&&":
            out |= _witnesses(e.lhs)
            e = e.rhs
        else:
            break
    return out


def check_triple_imp(pre, stmt, post, dom: BoundedDomain | None = None, vocab: Vocabulary | None = None) -> Verdict:
    """Does every bounded state satisfying ``pre`` reach ``post``?"""
    dom = dom or BoundedDomain()
    v = Vocabulary.of(pre, stmt, post)
    vocab = vocab.merge(v) if vocab else v
    vocab.scalars -= _witnesses(pre)
    return search(pre, _post_check(stmt, post), vocab, dom)


# -- Spyder triples ---------------------------------------------------------


@dataclass(frozen=True)
class HoareGoal:
    pre: object
    block: tuple
    post: object
    ctx: TranslationContext = TranslationContext()


def index_guards(ctx: TranslationContext):
    """``0 <= x && x < size(coll)`` for each bound iterator, in Imp."""
    parts = []
    for x, y in ctx.bindings:
        parts.append(BinOp("<=", IntLit(0), Var(x)))
        parts.append(BinOp("<", Var(x), Size(y)))
    return parts


def _vocab_for(ctx: TranslationContext, prog: spy.Program | None, *terms) -> Vocabulary:
    sizes = prog.size_map if prog is not None else {}
    v = Vocabulary.of(*terms, sizes=sizes, index_vars=dict(ctx.bindings))
    if prog is not None:
        for a in prog.collections:
            v.arrays.setdefault(a, sizes.get(a))
    return v


def _require_wf(goal: HoareGoal):
    if not goal.ctx.globals:
        return
    for t in (goal.pre, goal.post, goal.block):
        bad = check_wellformed(t, goal.ctx)
        if bad is not None:
            raise WellFormednessError(bad)


def check_triple_spy(goal: HoareGoal, dom: BoundedDomain | None = None, prog: spy.Program | None = None) -> Verdict:
    """Decide a Spyder triple by translating it and checking the result."""
    _require_wf(goal)
    g = goal.ctx
    pre = imp.conj(index_guards(g) + [imp.translate_inv(goal.pre, g, check=False)])
    body = imp.translate_stmt(goal.block, g, check=False)
    post = imp.translate_inv(goal.post, g, check=False)
    return check_triple_imp(pre, body, post, dom, _vocab_for(g, prog, pre, body, post))


def spy_implies(p, q, ctx: TranslationContext, dom=None, prog=None) -> Verdict:
    """Bounded validity of ``p ⇒ q`` for Spyder invariants under ``ctx``."""
    lhs = imp.conj(index_guards(ctx) + [imp.translate_inv(p, ctx, check=False)])
    rhs = imp.translate_inv(q, ctx, check=False)
    f = BinOp("==>", lhs, rhs)
    return check_validity(f, (), dom, _vocab_for(ctx, prog, f))


# -- weakening and the structural rules ------------------------------------


def _has_prev(e) -> bool:
    return any(isinstance(n, spy.Prev) for n in spy.walk_expr(e))


def weaken_prev(inv):
    """Replace every atom that mentions ``prev`` by ``true``."""
    if isinstance(inv, spy.Atom):
        return spy.TRUE if _has_prev(inv.expr) else inv
    if isinstance(inv, spy.And):
        return spy.And(weaken_prev(inv.lhs), weaken_prev(inv.rhs))
    if isinstance(inv, spy.Foreach):
        return spy.Foreach(inv.bindings, weaken_prev(inv.body))
    if isinstance(inv, spy.Exists):
        return spy.Exists(inv.var, weaken_prev(inv.body))
    raise TypeError(f"not an invariant: {inv!r}")


def sp_assign(pre, s: spy.Assign, taken: set):
    """``exists v' . pre[v := v'] && v = rhs[v := v']``."""
    old = spy.fresh_name(s.target + "_old", taken)
    taken.add(old)
    tgt, repl = spy.Var(s.target), spy.Var(old)
    body = spy.And(spy.subst_inv(pre, tgt, repl),
                   spy.Atom(spy.BinOp("=", tgt, spy.subst_expr(s.rhs, tgt, repl))))
    return spy.Exists(old, body)


def sp_put(pre, s: spy.Put, taken: set):
    """Like assignment, but only ``x.val`` is renamed (``prev`` is untouched)."""
    old = spy.fresh_name(s.target + "_old", taken)
    taken.add(old)
    tgt, repl = spy.Val(s.target), spy.Var(old)
    body = spy.And(spy.subst_inv(pre, tgt, repl),
                   spy.Atom(spy.BinOp("=", tgt, spy.subst_expr(s.rhs, tgt, repl))))
    return spy.Exists(old, body)


def split_loop_invariant(inv, loop: spy.For):
    """Split ``inv`` into the foreach bodies over the loop's collections and the rest.

    The bodies are renamed to the loop's iterators.  Returns None when no
    conjunct quantifies over (a subset of) the loop's collections.
    """
    by_coll = {c: it for it, c in loop.bindings}
    bodies, rest = [], []
    for c in spy.conjuncts(inv):
        if isinstance(c, spy.Foreach) and set(c.collections) <= set(by_coll):
            mapping = {it: by_coll[coll] for it, coll in c.bindings}
            bodies.append(spy.rename_inv(c.body, mapping))
        else:
            rest.append(c)
    if not bodies:
        return None
    return spy.conjoin(bodies), rest


def loop_guards(bindings) -> list:
    """Index facts available inside a loop body, as Spyder atoms."""
    parts = []
    first = bindings[0][0]
    for k, (x, y) in enumerate(bindings):
        parts.append(spy.Atom(spy.BinOp("<=", spy.IntLit(0), spy.Idx(x))))
        parts.append(spy.Atom(spy.BinOp("<", spy.Idx(x), spy.Size(y))))
        if k:
            parts.append(spy.Atom(spy.BinOp("=", spy.Idx(x), spy.Idx(first))))
    return parts


class _Structural:
    def __init__(self, dom, prog):
        self.dom = dom
        self.prog = prog
        self.reason = ""

    def fail(self, why):
        if not self.reason:
            self.reason = why
        return False

    def implies(self, p, q, ctx) -> bool:
        # intermediate states may hold values outside the enumerated range,
        # so side conditions must hold for every integer, not just the domain
        lhs = imp.conj(index_guards(ctx) + [imp.translate_inv(p, ctx, check=False)])
        rhs = imp.translate_inv(q, ctx, check=False)
        f = BinOp("==>", lhs, rhs)
        options = _size_options(_vocab_for(ctx, self.prog, f), self.dom)
        status = solver.valid_over_integers(f, options)
        if status == "valid":
            return True
        if not solver.available():
            return self.fail("side conditions need z3 (install the smt extra)")
        return self.fail(f"consequence not established ({status})")

    def block(self, pre, block, post, ctx, taken) -> bool:
        cur = pre
        for s in block:
            if isinstance(s, spy.Assign):
                cur = sp_assign(cur, s, taken)
            elif isinstance(s, spy.Put):
                cur = sp_put(cur, s, taken)
            elif isinstance(s, spy.If):
                c = spy.Atom(s.cond)
                nc = spy.Atom(spy.UnOp("!", s.cond))
                if not (self.block(spy.And(cur, c), s.then, post, ctx, taken)
                        and self.block(spy.And(cur, nc), s.orelse, post, ctx, taken)):
                    return False
                cur = post
            elif isinstance(s, spy.For):
                if not self.implies(cur, post, ctx) or not self.loop(post, s, ctx, taken):
                    return False
                cur = post
        return self.implies(cur, post, ctx)

    def loop(self, inv, s: spy.For, ctx, taken) -> bool:
        split = split_loop_invariant(inv, s)
        if split is None:
            return self.fail("no foreach conjunct matches the loop")
        body_inv, rest = split
        rest_inv = spy.conjoin(rest)
        cols = set(s.collections)
        if free_vars(rest_inv) & cols:
            return self.fail("another conjunct mentions the iterated collections")
        inner = ctx.extend(s.bindings)
        touched = modified_vars(s.body, inner) - set(s.iterators) - cols
        if (touched | assigned_vars(s.body)) & free_vars(body_inv):
            return self.fail("loop body modifies a variable free in the loop invariant")
        pre = spy.conjoin([weaken_prev(spy.And(body_inv, rest_inv))] + loop_guards(s.bindings))
        post = spy.And(body_inv, rest_inv) if rest else body_inv
        return self.block(pre, s.body, post, inner, taken)


def check_triple_structural(goal: HoareGoal, dom: BoundedDomain | None = None,
                            prog: spy.Program | None = None) -> Verdict:
    """Derive the triple with the syntax-directed rules.

    Assignment and put use strongest postconditions; loops use the foreach
    conjuncts of the postcondition as the loop invariant; side conditions
    and consequences must hold over all integers at each collection length
    of the domain.  Returns Valid or Unknown, never Invalid: a failed
    derivation proves nothing.
    """
    _require_wf(goal)
    taken = spy.names_in(goal.pre) | spy.names_in(goal.post) | spy.names_in(goal.block)
    if prog is not None:
        taken |= {n for n, _ in prog.datadecls}
    st = _Structural(dom or BoundedDomain(), prog)
    if st.block(goal.pre, goal.block, goal.post, goal.ctx, taken):
        return VALID
    return Verdict("unknown", None, st.reason or "derivation failed")


# -- SMT-LIB ----------------------------------------------------------------


class _Sym:
    """Symbolic executor producing SMT-LIB terms; loops are unrolled."""

    def __init__(self, sizes: dict):
        self.sizes = sizes

    def lit(self, v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, int):
            return str(v) if v >= 0 else f"(- {-v})"
        return v

    def expr(self, e, st: dict, env: dict):
        t = type(e)
        if t is Var:
            if e.name in env:
                return env[e.name]
            return st[e.name]
        if t is IntLit:
            return e.value
        if t is BoolLit:
            return e.value
        if t is Size:
            return self.sizes[e.arr]
        if t is Select:
            return f"(select {st[e.arr]} {self.lit(self.expr(e.idx, st, env))})"
        if t is UnOp:
            a = self.expr(e.arg, st, env)
            if e.op == "!":
                return (not a) if isinstance(a, bool) else f"(not {a})"
            return -a if isinstance(a, int) and not isinstance(a, bool) else f"(- {a})"
        if t is Ite:
            c = self.expr(e.cond, st, env)
            if isinstance(c, bool):
                return self.expr(e.then if c else e.orelse, st, env)
            return f"(ite {c} {self.lit(self.expr(e.then, st, env))} {self.lit(self.expr(e.orelse, st, env))})"
        if t in (Forall, Exists):
            q = "forall" if t is Forall else "exists"
            name = f"q_{e.var}_{len(env)}"
            body = self.lit(self.expr(e.body, st, {**env, e.var: name}))
            return f"({q} (({name} Int)) {body})"
        if t is BinOp:
            a = self.expr(e.lhs, st, env)
            b = self.expr(e.rhs, st, env)
            return self.binop(e.op, a, b)
        raise TypeError(f"cannot encode {e!r}")

    def binop(self, op, a, b):
        concrete = not isinstance(a, str) and not isinstance(b, str)
        if concrete:
            fake = Machine({"a": a, "b": b}, {})
            try:
                return fake.binop(BinOp(op, Var("a"), Var("b")))
            except Fault:
                pass
        a, b = self.lit(a), self.lit(b)
        name = {"=": "=", "!=": "distinct", "<": "<", "<=": "<=", ">": ">", ">=": ">=",
                "+": "+", "-": "-", "*": "*", "%": "mod", "&&": "and", "||": "or",
                "==>": "=>", "<=>": "="}[op]
        return f"({name} {a} {b})"

    def stmt(self, s, st: dict) -> dict:
        t = type(s)
        if t is imp.Seq:
            return self.stmt(s.second, self.stmt(s.first, st))
        if t is imp.Skip:
            return st
        if t is imp.Assign:
            return {**st, s.var: self.expr(s.rhs, st, {})}
        if t is imp.Store:
            i = self.lit(self.expr(s.idx, st, {}))
            v = self.lit(self.expr(s.rhs, st, {}))
            return {**st, s.arr: f"(store {st[s.arr]} {i} {v})"}
        if t is imp.If:
            c = self.expr(s.cond, st, {})
            if isinstance(c, bool):
                return self.stmt(s.then if c else s.orelse, st)
            a, b = self.stmt(s.then, st), self.stmt(s.orelse, st)
            out = {}
            for k in st:
                out[k] = a[k] if a[k] == b[k] else f"(ite {c} {self.lit(a[k])} {self.lit(b[k])})"
            for k in set(a) | set(b):
                out.setdefault(k, a.get(k, b.get(k)))
            return out
        if t is imp.While:
            for _ in range(10_000):
                c = self.expr(s.cond, st, {})
                if not isinstance(c, bool):
                    raise ValueError("loop condition is not fixed by the array sizes")
                if not c:
                    return st
                st = self.stmt(s.body, st)
            raise ValueError("loop does not terminate within the unrolling bound")
        raise TypeError(f"cannot encode {s!r}")


def emit_smtlib(goal: HoareGoal, prog: spy.Program | None = None, default_size: int = 3) -> str:
    """SMT-LIB 2 script whose ``unsat`` answer means the triple holds.

    Collections have their declared length (or ``default_size``); loops are
    unrolled completely at those lengths, so no loop invariant is needed.
    """
    g = goal.ctx
    pre = imp.conj(index_guards(g) + [imp.translate_inv(goal.pre, g, check=False)])
    body = imp.translate_stmt(goal.block, g, check=False)
    post = imp.translate_inv(goal.post, g, check=False)
    vocab = _vocab_for(g, prog, pre, body, post)
    sizes = {a: (n if n is not None else default_size) for a, n in vocab.arrays.items()}
    lines = ["(set-logic ALL)"]
    st = {}
    for name in sorted(vocab.scalars):
        lines.append(f"(declare-const {name} Int)")
        st[name] = name
    for a in sorted(sizes):
        lines.append(f"(declare-const {a} (Array Int Int))")
        st[a] = a
    sym = _Sym(sizes)
    pre_t = sym.lit(sym.expr(pre, st, {}))
    final = sym.stmt(body, dict(st))
    post_t = sym.lit(sym.expr(post, final, {}))
    lines.append(f"; sizes: {', '.join(f'{a}={n}' for a, n in sorted(sizes.items())) or 'none'}")
    lines.append(f"(assert {pre_t})")
    lines.append(f"(assert (not {post_t}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
