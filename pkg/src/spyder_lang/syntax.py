"""Abstract syntax for Spyder programs.

All nodes are frozen dataclasses, so structural equality and hashing come
for free and terms can be shared between threads.  Blocks are plain tuples
of statements; the empty tuple is ``skip``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

BINARY_OPS = ("+", "-", "*", "%", "==>", "<=>", "=", "!=", "<", "<=", ">", ">=", "&&", "||")
UNARY_OPS = ("!", "-")
ARITH_OPS = ("+", "-", "*", "%")
COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")
LOGIC_OPS = ("==>", "<=>", "&&", "||")


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "Expr"
    rhs: "Expr"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary operator {self.op!r}")


@dataclass(frozen=True)
class UnOp:
    op: str
    arg: "Expr"

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary operator {self.op!r}")


@dataclass(frozen=True)
class Val:
    """``x.val``: the current element under iterator ``x``."""

    iter: str


@dataclass(frozen=True)
class Prev:
    """``x.prev(default)``: the previous element, or ``default`` at index 0."""

    iter: str
    default: "Expr"

    def __post_init__(self):
        for node in walk_expr(self.default):
            if isinstance(node, (Val, Prev, Idx)) and node.iter == self.iter:
                raise ValueError(f"prev default of {self.iter!r} refers to {self.iter!r}")


@dataclass(frozen=True)
class Idx:
    iter: str


@dataclass(frozen=True)
class Size:
    name: str


Expr = Union[Var, IntLit, BoolLit, BinOp, UnOp, Val, Prev, Idx, Size]


# -- statements -------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    target: str
    rhs: Expr


@dataclass(frozen=True)
class Put:
    target: str
    rhs: Expr


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple = ()
    orelse: tuple = ()


@dataclass(frozen=True)
class For:
    bindings: tuple  # ((iterator, collection), ...)
    body: tuple = ()

    def __post_init__(self):
        if not self.bindings:
            raise ValueError("for loop needs at least one binding")
        names = [it for it, _ in self.bindings]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate iterator in for loop: {names}")

    @property
    def iterators(self):
        return tuple(it for it, _ in self.bindings)

    @property
    def collections(self):
        return tuple(coll for _, coll in self.bindings)


Stmt = Union[Assign, Put, If, For]
Block = tuple


# -- invariants -------------------------------------------------------------


@dataclass(frozen=True)
class Foreach:
    bindings: tuple
    body: "Inv"

    def __post_init__(self):
        if not self.bindings:
            raise ValueError("foreach needs at least one binding")
        names = [it for it, _ in self.bindings]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate iterator in foreach: {names}")

    @property
    def collections(self):
        return tuple(coll for _, coll in self.bindings)


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Inv"


@dataclass(frozen=True)
class And:
    lhs: "Inv"
    rhs: "Inv"


@dataclass(frozen=True)
class Atom:
    expr: Expr


Inv = Union[Foreach, Exists, And, Atom]

TRUE = Atom(BoolLit(True))


# -- programs ---------------------------------------------------------------


@dataclass(frozen=True)
class Procedure:
    name: str
    params: tuple = ()  # ((name, "int"), ...)
    body: tuple = ()


@dataclass(frozen=True)
class Program:
    datadecls: tuple = ()  # ((name, "int" | "int[]"), ...)
    invariants: tuple = ()
    procedures: tuple = ()
    sizes: tuple = ()  # sorted ((collection, length), ...)
    # source positions ((kind, name, line, col), ...); ignored by equality
    spans: tuple = field(default=(), compare=False, repr=False)

    @property
    def size_map(self) -> dict:
        return dict(self.sizes)

    @property
    def collections(self) -> tuple:
        return tuple(n for n, ty in self.datadecls if ty == "int[]")

    @property
    def scalars(self) -> tuple:
        return tuple(n for n, ty in self.datadecls if ty == "int")

    def procedure(self, name: str) -> Procedure:
        for proc in self.procedures:
            if proc.name == name:
                return proc
        raise KeyError(name)

    def replace_procedure(self, proc: Procedure) -> "Program":
        procs = tuple(proc if p.name == proc.name else p for p in self.procedures)
        return Program(self.datadecls, self.invariants, procs, self.sizes, self.spans)

    def invariant(self) -> Inv:
        """Conjunction of every declared invariant (``true`` when none)."""
        return conjoin(self.invariants)


# -- utilities --------------------------------------------------------------


def block_append(a: Block, b: Block) -> Block:
    return tuple(a) + tuple(b)


def conjoin(parts) -> Inv:
    parts = [p for p in parts if p != TRUE]
    if not parts:
        return TRUE
    result = parts[-1]
    for p in reversed(parts[:-1]):
        result = And(p, result)
    return result


def conjuncts(inv: Inv) -> list:
    """Flatten nested ``And`` nodes, left to right."""
    if isinstance(inv, And):
        return conjuncts(inv.lhs) + conjuncts(inv.rhs)
    return [inv]


def walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, BinOp):
        yield from walk_expr(e.lhs)
        yield from walk_expr(e.rhs)
    elif isinstance(e, UnOp):
        yield from walk_expr(e.arg)
    elif isinstance(e, Prev):
        yield from walk_expr(e.default)


def inv_exprs(inv: Inv) -> Iterator[Expr]:
    if isinstance(inv, Atom):
        yield inv.expr
    elif isinstance(inv, And):
        yield from inv_exprs(inv.lhs)
        yield from inv_exprs(inv.rhs)
    else:
        yield from inv_exprs(inv.body)


def walk_block(block: Block) -> Iterator[Stmt]:
    for s in block:
        yield s
        if isinstance(s, If):
            yield from walk_block(s.then)
            yield from walk_block(s.orelse)
        elif isinstance(s, For):
            yield from walk_block(s.body)


def ast_size(t) -> int:
    """Number of AST nodes, the size measure used for patches and benchmarks."""
    if isinstance(t, (Var, IntLit, BoolLit, Val, Idx, Size)):
        return 1
    if isinstance(t, BinOp):
        return 1 + ast_size(t.lhs) + ast_size(t.rhs)
    if isinstance(t, UnOp):
        return 1 + ast_size(t.arg)
    if isinstance(t, Prev):
        return 1 + ast_size(t.default)
    if isinstance(t, (Assign, Put)):
        return 1 + ast_size(t.rhs)
    if isinstance(t, If):
        return 1 + ast_size(t.cond) + ast_size(t.then) + ast_size(t.orelse)
    if isinstance(t, For):
        return 1 + len(t.bindings) + ast_size(t.body)
    if isinstance(t, tuple):
        return sum(ast_size(s) for s in t)
    if isinstance(t, Atom):
        return ast_size(t.expr)
    if isinstance(t, And):
        return 1 + ast_size(t.lhs) + ast_size(t.rhs)
    if isinstance(t, Foreach):
        return 1 + len(t.bindings) + ast_size(t.body)
    if isinstance(t, Exists):
        return 1 + ast_size(t.body)
    if isinstance(t, Procedure):
        return ast_size(t.body)
    raise TypeError(f"not a Spyder term: {t!r}")


def rename_expr(e: Expr, mapping: dict) -> Expr:
    """Rename iterator and variable names according to ``mapping``."""
    if isinstance(e, Var):
        return Var(mapping.get(e.name, e.name))
    if isinstance(e, BinOp):
        return BinOp(e.op, rename_expr(e.lhs, mapping), rename_expr(e.rhs, mapping))
    if isinstance(e, UnOp):
        return UnOp(e.op, rename_expr(e.arg, mapping))
    if isinstance(e, Val):
        return Val(mapping.get(e.iter, e.iter))
    if isinstance(e, Prev):
        return Prev(mapping.get(e.iter, e.iter), rename_expr(e.default, mapping))
    if isinstance(e, Idx):
        return Idx(mapping.get(e.iter, e.iter))
    if isinstance(e, Size):
        return Size(mapping.get(e.name, e.name))
    return e


def rename_inv(inv: Inv, mapping: dict) -> Inv:
    if isinstance(inv, Atom):
        return Atom(rename_expr(inv.expr, mapping))
    if isinstance(inv, And):
        return And(rename_inv(inv.lhs, mapping), rename_inv(inv.rhs, mapping))
    if isinstance(inv, Exists):
        inner = {k: v for k, v in mapping.items() if k != inv.var}
        return Exists(inv.var, rename_inv(inv.body, inner))
    inner = {k: v for k, v in mapping.items() if k not in {it for it, _ in inv.bindings}}
    bindings = tuple((it, mapping.get(c, c)) for it, c in inv.bindings)
    return Foreach(bindings, rename_inv(inv.body, inner))


def subst_expr(e: Expr, target: Expr, repl: Expr) -> Expr:
    """Replace every occurrence of the node ``target`` by ``repl``."""
    if e == target:
        return repl
    if isinstance(e, BinOp):
        return BinOp(e.op, subst_expr(e.lhs, target, repl), subst_expr(e.rhs, target, repl))
    if isinstance(e, UnOp):
        return UnOp(e.op, subst_expr(e.arg, target, repl))
    if isinstance(e, Prev):
        return Prev(e.iter, subst_expr(e.default, target, repl))
    return e


def subst_inv(inv: Inv, target: Expr, repl: Expr) -> Inv:
    if isinstance(inv, Atom):
        return Atom(subst_expr(inv.expr, target, repl))
    if isinstance(inv, And):
        return And(subst_inv(inv.lhs, target, repl), subst_inv(inv.rhs, target, repl))
    if isinstance(inv, Exists):
        if isinstance(target, Var) and target.name == inv.var:
            return inv
        return Exists(inv.var, subst_inv(inv.body, target, repl))
    bound = {it for it, _ in inv.bindings}
    if isinstance(target, (Var, Val, Idx)) and getattr(target, "name", getattr(target, "iter", None)) in bound:
        return inv
    return Foreach(inv.bindings, subst_inv(inv.body, target, repl))


def names_in(t) -> set:
    """Every identifier occurring anywhere in ``t`` (used for freshness)."""
    out = set()
    if isinstance(t, tuple):
        for s in t:
            out |= names_in(s)
        return out
    if isinstance(t, (Assign, Put)):
        return {t.target} | names_in(t.rhs)
    if isinstance(t, If):
        return names_in(t.cond) | names_in(t.then) | names_in(t.orelse)
    if isinstance(t, For):
        return {n for b in t.bindings for n in b} | names_in(t.body)
    if isinstance(t, (Atom, And, Exists, Foreach)):
        if isinstance(t, Foreach):
            out |= {n for b in t.bindings for n in b}
        if isinstance(t, Exists):
            out.add(t.var)
        for e in inv_exprs(t):
            out |= names_in(e)
        return out
    for node in walk_expr(t):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, (Val, Prev, Idx)):
            out.add(node.iter)
        elif isinstance(node, Size):
            out.add(node.name)
    return out


def fresh_name(base: str, taken) -> str:
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"
