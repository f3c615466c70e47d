"""The array-based imperative core language.

Spyder programs are given meaning by translation into this small language
of scalars, fixed-length integer arrays, ``while`` loops and first-order
quantifiers.  The evaluator here is exact: out-of-bounds accesses, modulo by
zero, ill-typed operands, 64-bit overflow and runaway loops all fault
instead of producing a value.

Evaluation runs against a *store*, a flat mapping from cells (a scalar name
or an ``(array, index)`` pair) to values.  Reading a cell that is absent
raises ``NeedCell``; the bounded verifier relies on that to enumerate only
the cells a check actually looks at.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from . import syntax as spy
from .analysis import TranslationContext, WellFormednessError, WfViolation, check_wellformed

INT_LIMIT = 2 ** 63
DEFAULT_STEP_BUDGET = 100_000


# -- syntax -----------------------------------------------------------------


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
    lhs: "ImpExpr"
    rhs: "ImpExpr"


@dataclass(frozen=True)
class UnOp:
    op: str
    arg: "ImpExpr"


@dataclass(frozen=True)
class Select:
    arr: str
    idx: "ImpExpr"


@dataclass(frozen=True)
class Size:
    arr: str


@dataclass(frozen=True)
class Ite:
    cond: "ImpExpr"
    then: "ImpExpr"
    orelse: "ImpExpr"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "ImpExpr"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "ImpExpr"


ImpExpr = Union[Var, IntLit, BoolLit, BinOp, UnOp, Select, Size, Ite, Forall, Exists]


@dataclass(frozen=True)
class Assign:
    var: str
    rhs: ImpExpr


@dataclass(frozen=True)
class Store:
    arr: str
    idx: ImpExpr
    rhs: ImpExpr


@dataclass(frozen=True)
class If:
    cond: ImpExpr
    then: "ImpStmt"
    orelse: "ImpStmt"


@dataclass(frozen=True)
class While:
    cond: ImpExpr
    body: "ImpStmt"


@dataclass(frozen=True)
class Seq:
    first: "ImpStmt"
    second: "ImpStmt"


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assume:
    """Internal: stop quietly when the condition is false.

    Used by the synthesizer to replay branch conditions; such runs are
    vacuous and carry no obligation.
    """

    cond: ImpExpr


ImpStmt = Union[Assign, Store, If, While, Seq, Skip, Assume]

SKIP = Skip()
TRUE = BoolLit(True)


def seq(*stmts) -> ImpStmt:
    """Right-nested sequence, dropping skips."""
    parts = [s for s in stmts if not isinstance(s, Skip)]
    if not parts:
        return SKIP
    out = parts[-1]
    for s in reversed(parts[:-1]):
        out = Seq(s, out)
    return out


def flatten(s: ImpStmt) -> list:
    if isinstance(s, Seq):
        return flatten(s.first) + flatten(s.second)
    if isinstance(s, Skip):
        return []
    return [s]


def conj(parts) -> ImpExpr:
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = BinOp("&&", p, out)
    return out


def implies(a, b) -> ImpExpr:
    return BinOp("==>", a, b)


def neg(e) -> ImpExpr:
    return UnOp("!", e)


# -- states -----------------------------------------------------------------


class Fault(Exception):
    """Evaluation went wrong (the program has no defined result)."""


class StepBudgetExceeded(Fault):
    """A run took more steps than allowed (treated as non-termination)."""


class NeedCell(Exception):
    """A read hit a cell with no value; ``cell`` is a name or (array, index)."""

    def __init__(self, cell):
        super().__init__(f"no value for {cell!r}")
        self.cell = cell


class Vacuous(Exception):
    """An ``Assume`` failed; the run imposes no obligation."""


@dataclass
class ImpState:
    """Scalars by name and arrays as tuples of ints."""

    scalars: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    def cells(self) -> dict:
        values = dict(self.scalars)
        for a, xs in self.arrays.items():
            for i, v in enumerate(xs):
                values[(a, i)] = v
        return values

    def sizes(self) -> dict:
        return {a: len(xs) for a, xs in self.arrays.items()}

    @classmethod
    def from_cells(cls, values: dict, sizes: dict, fill=None) -> "ImpState":
        scalars = {k: v for k, v in values.items() if isinstance(k, str)}
        arrays = {}
        for a, n in sizes.items():
            row = []
            for i in range(n):
                v = values.get((a, i), fill)
                if v is None:
                    raise Fault(f"array {a} has no value at {i}")
                row.append(v)
            arrays[a] = tuple(row)
        return cls(scalars, arrays)

    def to_json(self) -> dict:
        return {"scalars": dict(sorted(self.scalars.items())),
                "arrays": {a: list(xs) for a, xs in sorted(self.arrays.items())}}

    @classmethod
    def from_json(cls, data: dict) -> "ImpState":
        return cls(dict(data.get("scalars", {})),
                   {a: tuple(xs) for a, xs in data.get("arrays", {}).items()})

    def __str__(self):
        parts = [f"{k}={v}" for k, v in sorted(self.scalars.items())]
        parts += [f"{a}={list(xs)}" for a, xs in sorted(self.arrays.items())]
        return "{" + ", ".join(parts) + "}"


# -- evaluation -------------------------------------------------------------


def _int(v):
    if type(v) is not int:
        raise Fault(f"expected an integer, got {v!r}")
    return v


def _bool(v):
    if type(v) is not bool:
        raise Fault(f"expected a boolean, got {v!r}")
    return v


def _checked(v: int) -> int:
    if not -INT_LIMIT < v < INT_LIMIT:
        raise Fault("integer overflow")
    return v


def _guard_parts(e) -> list:
    if isinstance(e, BinOp) and e.op == "&&":
        return _guard_parts(e.lhs) + _guard_parts(e.rhs)
    return [e]


def _quant_guard(body) -> list:
    """Conjuncts that restrict a quantified variable, looking through nesting."""
    while isinstance(body, (Forall, Exists)):
        body = body.body
    if isinstance(body, BinOp) and body.op == "==>":
        return _guard_parts(body.lhs)
    return _guard_parts(body)


class Machine:
    """Evaluator and executor over a mutable cell store."""

    def __init__(self, values: dict, sizes: dict, int_range=(-4, 4), steps: int = DEFAULT_STEP_BUDGET):
        self.values = values
        self.sizes = sizes
        self.int_range = int_range
        self.steps = steps

    def read(self, cell):
        try:
            return self.values[cell]
        except KeyError:
            raise NeedCell(cell) from None

    def size(self, arr) -> int:
        try:
            return self.sizes[arr]
        except KeyError:
            raise Fault(f"unknown array {arr}") from None

    def index(self, arr, idx) -> int:
        i = _int(self.eval(idx))
        if not 0 <= i < self.size(arr):
            raise Fault(f"index {i} out of bounds for {arr}")
        return i

    def quant_range(self, var, body):
        lo_ok = hi = None
        for g in _quant_guard(body):
            if not isinstance(g, BinOp):
                continue
            if g.op == "=" and g.lhs == Var(var) and isinstance(g.rhs, Var) and g.rhs.name in self.values:
                return [self.values[g.rhs.name]]
            if g.op == "<=" and g.lhs == IntLit(0) and g.rhs == Var(var):
                lo_ok = True
            if g.op == "<" and g.lhs == Var(var) and isinstance(g.rhs, Size):
                hi = self.size(g.rhs.arr)
        if lo_ok and hi is not None:
            return range(hi)
        lo, hi = self.int_range
        return range(lo, hi + 1)

    def eval(self, e):
        t = type(e)
        if t is Var:
            return self.read(e.name)
        if t is IntLit:
            return _checked(e.value)
        if t is BoolLit:
            return e.value
        if t is Select:
            return self.read((e.arr, self.index(e.arr, e.idx)))
        if t is BinOp:
            return self.binop(e)
        if t is UnOp:
            v = self.eval(e.arg)
            if e.op == "!":
                return not _bool(v)
            return _checked(-_int(v))
        if t is Size:
            return self.size(e.arr)
        if t is Ite:
            return self.eval(e.then) if _bool(self.eval(e.cond)) else self.eval(e.orelse)
        if t is Forall or t is Exists:
            want = t is Exists
            saved = self.values.get(e.var, _MISSING)
            try:
                for k in self.quant_range(e.var, e.body):
                    self.values[e.var] = k
                    if _bool(self.eval(e.body)) == want:
                        return want
                return not want
            finally:
                if saved is _MISSING:
                    self.values.pop(e.var, None)
                else:
                    self.values[e.var] = saved
        raise TypeError(f"not an expression: {e!r}")

    def binop(self, e):
        op = e.op
        if op == "&&":
            return _bool(self.eval(e.lhs)) and _bool(self.eval(e.rhs))
        if op == "||":
            return _bool(self.eval(e.lhs)) or _bool(self.eval(e.rhs))
        if op == "==>":
            return (not _bool(self.eval(e.lhs))) or _bool(self.eval(e.rhs))
        a = self.eval(e.lhs)
        b = self.eval(e.rhs)
        if op == "<=>":
            return _bool(a) == _bool(b)
        if op in ("=", "!="):
            if type(a) is not type(b):
                raise Fault(f"cannot compare {a!r} with {b!r}")
            return (a == b) == (op == "=")
        a, b = _int(a), _int(b)
        if op == "+":
            return _checked(a + b)
        if op == "-":
            return _checked(a - b)
        if op == "*":
            return _checked(a * b)
        if op == "%":
            if b == 0:
                raise Fault("modulo by zero")
            return a % abs(b)  # euclidean: always in [0, |b|)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        raise Fault(f"unknown operator {op}")

    def exec(self, s):
        t = type(s)
        if t is Seq:
            self.exec(s.first)
            self.exec(s.second)
        elif t is Assign:
            self.tick()
            self.values[s.var] = self.eval(s.rhs)
        elif t is Store:
            self.tick()
            i = self.index(s.arr, s.idx)
            self.values[(s.arr, i)] = self.eval(s.rhs)
        elif t is If:
            self.tick()
            self.exec(s.then if _bool(self.eval(s.cond)) else s.orelse)
        elif t is While:
            while True:
                self.tick()
                if not _bool(self.eval(s.cond)):
                    break
                self.exec(s.body)
        elif t is Skip:
            pass
        elif t is Assume:
            if not _bool(self.eval(s.cond)):
                raise Vacuous()
        else:
            raise TypeError(f"not a statement: {s!r}")

    def tick(self):
        self.steps -= 1
        if self.steps < 0:
            raise StepBudgetExceeded("step budget exceeded")


_MISSING = object()


def _int_range(domain):
    if domain is None:
        return (-4, 4)
    if isinstance(domain, tuple):
        return domain
    return (domain.int_lo, domain.int_hi)


def eval_expr(e: ImpExpr, state: ImpState, domain=None):
    """Value of ``e`` in ``state``; raises Fault if undefined."""
    m = Machine(state.cells(), state.sizes(), _int_range(domain))
    try:
        return m.eval(e)
    except NeedCell as exc:
        raise Fault(f"unbound {exc.cell!r}") from None


def exec_stmt(s: ImpStmt, state: ImpState, domain=None, steps: int = DEFAULT_STEP_BUDGET) -> ImpState:
    """Big-step execution; the input state is left untouched."""
    m = Machine(state.cells(), state.sizes(), _int_range(domain), steps)
    try:
        m.exec(s)
    except NeedCell as exc:
        raise Fault(f"unbound {exc.cell!r}") from None
    return ImpState.from_cells(m.values, m.sizes)


# -- translation ------------------------------------------------------------


def _coll(name, g: TranslationContext):
    c = g.get(name)
    if c is None:
        raise WellFormednessError(WfViolation("Elem", name, f"{name} is not a bound iterator"))
    return c


def _tr_expr(e, g: TranslationContext):
    if isinstance(e, spy.Var):
        if e.name in g:
            return Select(_coll(e.name, g), Var(e.name))
        return Var(e.name)
    if isinstance(e, spy.IntLit):
        return IntLit(e.value)
    if isinstance(e, spy.BoolLit):
        return BoolLit(e.value)
    if isinstance(e, spy.BinOp):
        return BinOp(e.op, _tr_expr(e.lhs, g), _tr_expr(e.rhs, g))
    if isinstance(e, spy.UnOp):
        return UnOp(e.op, _tr_expr(e.arg, g))
    if isinstance(e, spy.Val):
        return Select(_coll(e.iter, g), Var(e.iter))
    if isinstance(e, spy.Prev):
        x = Var(e.iter)
        return Ite(BinOp(">", x, IntLit(0)),
                   Select(_coll(e.iter, g), BinOp("-", x, IntLit(1))),
                   _tr_expr(e.default, g))
    if isinstance(e, spy.Idx):
        _coll(e.iter, g)
        return Var(e.iter)
    if isinstance(e, spy.Size):
        return Size(g.get(e.name, e.name))
    raise TypeError(f"not an expression: {e!r}")


def index_guard(bindings) -> ImpExpr:
    """``0 <= v_i && v_i < size(u_i)`` for every binding, plus ``v_i = v_1``."""
    parts = []
    first = bindings[0][0]
    for k, (v, u) in enumerate(bindings):
        parts.append(BinOp("<=", IntLit(0), Var(v)))
        parts.append(BinOp("<", Var(v), Size(u)))
        if k:
            parts.append(BinOp("=", Var(v), Var(first)))
    return conj(parts)


def _tr_inv(inv, g: TranslationContext):
    if isinstance(inv, spy.Atom):
        return _tr_expr(inv.expr, g)
    if isinstance(inv, spy.And):
        return BinOp("&&", _tr_inv(inv.lhs, g), _tr_inv(inv.rhs, g))
    if isinstance(inv, spy.Foreach):
        body = implies(index_guard(inv.bindings), _tr_inv(inv.body, g.extend(inv.bindings)))
        for v, _ in reversed(inv.bindings):
            body = Forall(v, body)
        return body
    if isinstance(inv, spy.Exists):
        return Exists(inv.var, _tr_inv(inv.body, g.with_globals([inv.var])))
    raise TypeError(f"not an invariant: {inv!r}")


def _tr_stmt(s, g: TranslationContext):
    if isinstance(s, tuple):
        return seq(*[_tr_stmt(x, g) for x in s])
    if isinstance(s, spy.Assign):
        return Assign(s.target, _tr_expr(s.rhs, g))
    if isinstance(s, spy.Put):
        return Store(_coll(s.target, g), Var(s.target), _tr_expr(s.rhs, g))
    if isinstance(s, spy.If):
        return If(_tr_expr(s.cond, g), _tr_stmt(s.then, g), _tr_stmt(s.orelse, g))
    if isinstance(s, spy.For):
        inner = g.extend(s.bindings)
        init = [Assign(x, IntLit(0)) for x, _ in s.bindings]
        guard = conj(BinOp("<", Var(x), Size(y)) for x, y in s.bindings)
        # indices advance together as the last statements of the body
        incr = [Assign(x, BinOp("+", Var(x), IntLit(1))) for x, _ in reversed(s.bindings)]
        body = seq(_tr_stmt(s.body, inner), *incr)
        return seq(*init, While(guard, body))
    raise TypeError(f"not a statement: {s!r}")


def _require_wf(t, g):
    bad = check_wellformed(t, g)
    if bad is not None:
        raise WellFormednessError(bad)


def translate_expr(e, g: TranslationContext | None = None, check: bool = True) -> ImpExpr:
    g = g or TranslationContext()
    if check and g.globals:
        _require_wf(e, g)
    return _tr_expr(e, g)


def translate_inv(inv, g: TranslationContext | None = None, check: bool = True) -> ImpExpr:
    g = g or TranslationContext()
    if check and g.globals:
        _require_wf(inv, g)
    return _tr_inv(inv, g)


def translate_stmt(s, g: TranslationContext | None = None, check: bool = True) -> ImpStmt:
    """Translate a statement or block.

    Well-formedness is enforced whenever ``g`` knows the global names.
    """
    g = g or TranslationContext()
    if check and g.globals:
        _require_wf(s, g)
    return _tr_stmt(s, g)


def run_spyder(prog: spy.Program, proc, state: ImpState, args: dict | None = None,
               domain=None, steps: int = DEFAULT_STEP_BUDGET) -> ImpState:
    """Run a procedure (name or Procedure) of ``prog`` on ``state``."""
    if isinstance(proc, str):
        proc = prog.procedure(proc)
    args = dict(args or {})
    missing = [n for n, _ in proc.params if n not in args]
    if missing:
        raise Fault(f"missing argument {missing[0]}")
    g = TranslationContext.for_program(prog, [n for n, _ in proc.params])
    code = translate_stmt(proc.body, g)
    start = ImpState({**state.scalars, **args}, dict(state.arrays))
    out = exec_stmt(code, start, domain, steps)
    keep = set(state.scalars)
    return ImpState({k: v for k, v in out.scalars.items() if k in keep}, out.arrays)


# -- debug dump -------------------------------------------------------------

_PREC = {"<=>": 0, "==>": 1, "||": 2, "&&": 3, "=": 4, "!=": 4, "<": 4, "<=": 4,
         ">": 4, ">=": 4, "+": 5, "-": 5, "*": 6, "%": 6}
_DUMP_OP = {"=": "==", "%": "mod"}


def dump_expr(e, parent: int = -1) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Select):
        return f"{e.arr}[{dump_expr(e.idx)}]"
    if isinstance(e, Size):
        return f"size({e.arr})"
    if isinstance(e, UnOp):
        return f"{e.op}{dump_expr(e.arg, 7)}"
    if isinstance(e, Ite):
        return f"(if {dump_expr(e.cond)} then {dump_expr(e.then)} else {dump_expr(e.orelse)})"
    if isinstance(e, (Forall, Exists)):
        q = "forall" if isinstance(e, Forall) else "exists"
        return f"({q} {e.var}: int :: {dump_expr(e.body)})"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        text = f"{dump_expr(e.lhs, p)} {_DUMP_OP.get(e.op, e.op)} {dump_expr(e.rhs, p + 1)}"
        return f"({text})" if p < parent else text
    raise TypeError(f"not an expression: {e!r}")


def dump_stmt(s, depth: int = 0) -> list:
    pad = "  " * depth
    if isinstance(s, Seq):
        return dump_stmt(s.first, depth) + dump_stmt(s.second, depth)
    if isinstance(s, Skip):
        return []
    if isinstance(s, Assign):
        return [f"{pad}{s.var} := {dump_expr(s.rhs)};"]
    if isinstance(s, Store):
        return [f"{pad}{s.arr}[{dump_expr(s.idx)}] := {dump_expr(s.rhs)};"]
    if isinstance(s, Assume):
        return [f"{pad}assume {dump_expr(s.cond)};"]
    if isinstance(s, If):
        lines = [f"{pad}if ({dump_expr(s.cond)}) {{"] + dump_stmt(s.then, depth + 1)
        if not isinstance(s.orelse, Skip):
            lines += [f"{pad}}} else {{"] + dump_stmt(s.orelse, depth + 1)
        return lines + [f"{pad}}}"]
    if isinstance(s, While):
        return [f"{pad}while ({dump_expr(s.cond)}) {{"] + dump_stmt(s.body, depth + 1) + [f"{pad}}}"]
    raise TypeError(f"not a statement: {s!r}")


def dump_procedure(prog: spy.Program, proc) -> str:
    """Boogie-flavoured listing of a translated procedure, for inspection."""
    if isinstance(proc, str):
        proc = prog.procedure(proc)
    lines = []
    for name, ty in prog.datadecls:
        lines.append(f"var {name}: {'[int]int' if ty == 'int[]' else 'int'};")
    iters = []
    for s in spy.walk_block(proc.body):
        if isinstance(s, spy.For):
            iters += [x for x in s.iterators if x not in iters]
    lines += [f"var {x}: int;" for x in iters]
    params = ", ".join(f"{n}: int" for n, _ in proc.params)
    g = TranslationContext.for_program(prog, [n for n, _ in proc.params])
    lines.append("")
    lines.append(f"procedure {proc.name}({params}) {{")
    lines += dump_stmt(translate_stmt(proc.body, g), 1)
    lines.append("}")
    return "\n".join(lines) + "\n"
