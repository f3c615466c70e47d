"""Static analyses over Spyder terms.

* ``TranslationContext``: which iterator is currently bound to which collection.
* ``check_wellformed``: the well-formedness judgement that makes translation
  to the imperative core safe (no aliasing between iterators and collections).
* ``free_vars`` / ``modified_vars`` / ``assigned_vars``: syntactic name sets.
* ``depends``: the data-dependency relation between variables of an invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import (
    And, Assign, Atom, BinOp, BoolLit, Exists, For, Foreach, Idx, If, IntLit,
    Prev, Program, Put, Size, UnOp, Val, Var,
)

RULES = (
    "Var-Global", "Var-Bound", "Prim-Int", "Prim-BT", "Prim-BF", "Bop", "Uop",
    "Elem", "Prev", "Idx", "Size", "Foreach", "Exists", "Conjunct",
    "Blk-Skip", "Blk-Seq", "Stmt-Assign", "Stmt-Put", "Stmt-Cond", "Stmt-For",
)


@dataclass(frozen=True)
class TranslationContext:
    """Iterator-to-collection bindings plus the set of global names.

    ``collections`` is the subset of ``globals`` declared as ``int[]``.  When
    it is empty nothing is known about kinds and kind checks are skipped.
    """

    bindings: tuple = ()  # ((iterator, collection), ...)
    globals: frozenset = frozenset()
    collections: frozenset = frozenset()

    def __post_init__(self):
        its = [i for i, _ in self.bindings]
        cols = [c for _, c in self.bindings]
        if len(set(its)) != len(its) or len(set(cols)) != len(cols):
            raise ValueError("translation context must be injective")
        if set(its) & set(cols):
            raise ValueError("iterators and collections must be disjoint")

    @classmethod
    def for_program(cls, prog: Program, params=()) -> "TranslationContext":
        names = {n for n, _ in prog.datadecls} | set(params)
        return cls((), frozenset(names), frozenset(prog.collections))

    @property
    def mapping(self) -> dict:
        return dict(self.bindings)

    @property
    def range(self) -> set:
        return {c for _, c in self.bindings}

    def __contains__(self, name) -> bool:
        return any(i == name for i, _ in self.bindings)

    def get(self, name, default=None):
        return self.mapping.get(name, default)

    def extend(self, pairs) -> "TranslationContext":
        return TranslationContext(self.bindings + tuple(pairs), self.globals, self.collections)

    def with_globals(self, names) -> "TranslationContext":
        return TranslationContext(self.bindings, self.globals | frozenset(names), self.collections)

    def is_collection(self, name) -> bool:
        return name in self.collections if self.collections else name in self.globals


@dataclass(frozen=True)
class WfViolation:
    rule: str
    term: object
    explanation: str

    def __str__(self):
        return f"{self.rule}: {self.explanation}"


class WellFormednessError(Exception):
    def __init__(self, violation: WfViolation):
        super().__init__(str(violation))
        self.violation = violation


# -- well-formedness --------------------------------------------------------


def _wf_expr(e, g: TranslationContext):
    if isinstance(e, Var):
        if e.name in g:
            if e.name in g.globals:
                return WfViolation("Var-Bound", e, f"{e.name} is both global and bound")
            return None
        if e.name not in g.globals:
            return WfViolation("Var-Global", e, f"{e.name} is not a global")
        if g.collections and e.name in g.collections:
            return WfViolation("Var-Global", e, f"collection {e.name} used as a scalar")
        return None
    if isinstance(e, (IntLit, BoolLit)):
        return None
    if isinstance(e, BinOp):
        return _wf_expr(e.lhs, g) or _wf_expr(e.rhs, g)
    if isinstance(e, UnOp):
        return _wf_expr(e.arg, g)
    if isinstance(e, Val):
        return None if e.iter in g else WfViolation("Elem", e, f"{e.iter} is not a bound iterator")
    if isinstance(e, Prev):
        return _wf_expr(e.default, g) or (
            None if e.iter in g else WfViolation("Prev", e, f"{e.iter} is not a bound iterator")
        )
    if isinstance(e, Idx):
        return None if e.iter in g else WfViolation("Idx", e, f"{e.iter} is not a bound iterator")
    if isinstance(e, Size):
        # any collection has a size, not only the ones being iterated
        if e.name in g or e.name in g.range or (e.name in g.globals and g.is_collection(e.name)):
            return None
        return WfViolation("Size", e, f"{e.name} is not a collection")
    raise TypeError(f"not an expression: {e!r}")


def _wf_bindings(rule, term, bindings, g: TranslationContext):
    cols = [c for _, c in bindings]
    if len(set(cols)) != len(cols):
        return WfViolation(rule, term, "a collection is bound twice")
    for it, coll in bindings:
        if coll not in g.globals or not g.is_collection(coll):
            return WfViolation(rule, term, f"{coll} is not a global collection")
        if coll in g.range:
            return WfViolation(rule, term, f"{coll} is already being iterated")
        if coll in g:
            return WfViolation(rule, term, f"{coll} is bound as an iterator")
        if it in g or it in g.globals or it in g.range:
            return WfViolation(rule, term, f"iterator {it} is already in use")
    return None


def _wf_inv(inv, g: TranslationContext):
    if isinstance(inv, Atom):
        return _wf_expr(inv.expr, g)
    if isinstance(inv, And):
        return _wf_inv(inv.lhs, g) or _wf_inv(inv.rhs, g)
    if isinstance(inv, Foreach):
        bad = _wf_bindings("Foreach", inv, inv.bindings, g)
        if bad:
            return bad
        return _wf_inv(inv.body, g.extend(inv.bindings))
    if isinstance(inv, Exists):
        if inv.var in g.globals or inv.var in g or inv.var in g.range:
            return WfViolation("Exists", inv, f"{inv.var} is not fresh")
        return _wf_inv(inv.body, g.with_globals([inv.var]))
    raise TypeError(f"not an invariant: {inv!r}")


def _wf_stmt(s, g: TranslationContext):
    if isinstance(s, Assign):
        bad = _wf_expr(s.rhs, g)
        if bad:
            return bad
        if s.target in g:
            return WfViolation("Stmt-Assign", s, f"{s.target} is a bound iterator (v ∉ Γ fails)")
        if g.collections and s.target in g.collections:
            return WfViolation("Stmt-Assign", s, f"{s.target} is a collection")
        return None
    if isinstance(s, Put):
        bad = _wf_expr(s.rhs, g)
        if bad:
            return bad
        if s.target not in g:
            return WfViolation("Stmt-Put", s, f"{s.target} is not a bound iterator (v ∈ Γ fails)")
        return None
    if isinstance(s, If):
        return _wf_expr(s.cond, g) or _wf_block(s.then, g) or _wf_block(s.orelse, g)
    if isinstance(s, For):
        bad = _wf_bindings("Stmt-For", s, s.bindings, g)
        if bad:
            return bad
        bad = _wf_block(s.body, g.extend(s.bindings))
        if bad:
            return bad
        hit = set(s.iterators) & assigned_vars(s.body)
        if hit:
            return WfViolation("Stmt-For", s, f"loop body assigns its iterator {sorted(hit)[0]}")
        return None
    raise TypeError(f"not a statement: {s!r}")


def _wf_block(block, g):
    for s in block:
        bad = _wf_stmt(s, g)
        if bad:
            return bad
    return None


def check_wellformed(t, g: TranslationContext):
    """Return None when ``g ⊢ t`` is derivable, else the first WfViolation.

    Subterms are checked before the premises of the node itself, left to
    right, so the reported violation is the leftmost innermost one.
    Binding premises are checked before descending, since the body's context
    is only meaningful once they hold.
    """
    if isinstance(t, tuple):
        return _wf_block(t, g)
    if isinstance(t, (Assign, Put, If, For)):
        return _wf_stmt(t, g)
    if isinstance(t, (Atom, And, Foreach, Exists)):
        return _wf_inv(t, g)
    return _wf_expr(t, g)


def program_violations(prog: Program) -> list:
    """All (where, violation) pairs of a program; empty when well formed."""
    out = []
    g = TranslationContext.for_program(prog)
    for k, inv in enumerate(prog.invariants):
        bad = check_wellformed(inv, g)
        if bad:
            out.append((f"invariant {k}", bad))
    for proc in prog.procedures:
        bad = check_wellformed(proc.body, g.with_globals(n for n, _ in proc.params))
        if bad:
            out.append((f"procedure {proc.name}", bad))
    return out


# -- name sets --------------------------------------------------------------


def _expr_names(e, g, out: set):
    if isinstance(e, Var):
        out.add(e.name)
        if g is not None and e.name in g:
            out.add(g.get(e.name))
    elif isinstance(e, (Val, Prev, Idx)):
        out.add(e.iter)
        if g is not None and e.iter in g:
            out.add(g.get(e.iter))
        if isinstance(e, Prev):
            _expr_names(e.default, g, out)
    elif isinstance(e, Size):
        out.add(e.name)
        if g is not None and e.name in g:
            out.add(g.get(e.name))
    elif isinstance(e, BinOp):
        _expr_names(e.lhs, g, out)
        _expr_names(e.rhs, g, out)
    elif isinstance(e, UnOp):
        _expr_names(e.arg, g, out)


def free_vars(t, g: TranslationContext | None = None) -> set:
    """Names occurring free in an expression, invariant, statement or block."""
    out: set = set()
    if isinstance(t, Atom):
        _expr_names(t.expr, g, out)
    elif isinstance(t, And):
        out = free_vars(t.lhs, g) | free_vars(t.rhs, g)
    elif isinstance(t, Foreach):
        binders = {i for i, _ in t.bindings}
        out = (free_vars(t.body, g) - binders) | set(t.collections)
    elif isinstance(t, Exists):
        out = free_vars(t.body, g) - {t.var}
    elif isinstance(t, tuple):
        for s in t:
            out |= free_vars(s, g)
    elif isinstance(t, (Assign, Put)):
        _expr_names(t.rhs, g, out)
    elif isinstance(t, If):
        _expr_names(t.cond, g, out)
        out |= free_vars(t.then, g) | free_vars(t.orelse, g)
    elif isinstance(t, For):
        binders = set(t.iterators)
        out = (free_vars(t.body, g) - binders) | set(t.collections)
    else:
        _expr_names(t, g, out)
    return out


def modified_vars(block, g: TranslationContext | None = None) -> set:
    """Assign and Put targets; a Put also modifies the iterator's collection."""
    out: set = set()
    for s in block:
        if isinstance(s, Assign):
            out.add(s.target)
        elif isinstance(s, Put):
            out.add(s.target)
            if g is not None and s.target in g:
                out.add(g.get(s.target))
        elif isinstance(s, If):
            out |= modified_vars(s.then, g) | modified_vars(s.orelse, g)
        elif isinstance(s, For):
            inner = modified_vars(s.body, g)
            for it, coll in s.bindings:
                if it in inner:
                    out.add(coll)
            out |= inner - set(s.iterators)
    return out


def assigned_vars(block) -> set:
    out: set = set()
    for s in block:
        if isinstance(s, Assign):
            out.add(s.target)
        elif isinstance(s, If):
            out |= assigned_vars(s.then) | assigned_vars(s.orelse)
        elif isinstance(s, For):
            out |= assigned_vars(s.body)
    return out


# -- data dependencies ------------------------------------------------------


WITNESS = "?"


def atom_groups(inv, g: TranslationContext | None = None) -> list:
    """Node sets whose members are directly related by the invariant.

    Each atom contributes the names free in it, with iterators replaced by
    the collection they range over.  Collections quantified together by one
    ``foreach`` form a group as well, because they are constrained jointly.
    """
    groups: list = []
    base = dict(g.bindings) if g is not None else {}
    counter = [0]

    def node(name, env):
        return env.get(name, name)

    def visit(t, env):
        if isinstance(t, Atom):
            names: set = set()
            _expr_names(t.expr, None, names)
            groups.append({node(n, env) for n in names})
        elif isinstance(t, And):
            visit(t.lhs, env)
            visit(t.rhs, env)
        elif isinstance(t, Foreach):
            groups.append(set(t.collections))
            visit(t.body, {**env, **dict(t.bindings)})
        elif isinstance(t, Exists):
            # the witness links its neighbours but is never reported itself
            counter[0] += 1
            visit(t.body, {**env, t.var: f"{WITNESS}{counter[0]}"})

    visit(inv, base)
    return [grp for grp in groups if grp]


def _foreach_bindings(inv) -> list:
    if isinstance(inv, Foreach):
        return list(inv.bindings) + _foreach_bindings(inv.body)
    if isinstance(inv, And):
        return _foreach_bindings(inv.lhs) + _foreach_bindings(inv.rhs)
    if isinstance(inv, Exists):
        return _foreach_bindings(inv.body)
    return []


def depends(x: str, inv, g: TranslationContext | None = None) -> set:
    """Variables a change to ``x`` may affect through ``inv`` (excluding ``x``).

    The relation is the reflexive, symmetric and transitive closure of
    "occur together in an atom"; an iterator stands for its collection.
    """
    parent: dict = {}

    def find(a):
        parent.setdefault(a, a)
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for grp in atom_groups(inv, g):
        items = sorted(grp)
        for other in items[1:]:
            parent[find(other)] = find(items[0])
        find(items[0])
    alias = {x}
    if g is not None and x in g:
        alias.add(g.get(x))
    elif x not in parent:
        # an iterator named by a foreach of the invariant stands for its collection
        alias |= {c for it, c in _foreach_bindings(inv) if it == x}
    roots = {find(a) for a in alias if a in parent}
    if not roots:
        return set()
    comp = {n for n in parent if find(n) in roots}
    return {n for n in comp - alias if not n.startswith(WITNESS)}
