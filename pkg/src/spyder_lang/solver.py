"""Validity over all integers, for the rule-based checker's side conditions.

Bounded enumeration is exact for whole triples, but a derivation's side
conditions talk about intermediate states, whose values can leave the
enumerated range.  Those conditions are therefore discharged here, over
unbounded integers, at each collection length the domain enumerates.
Index-guarded quantifiers are unrolled at the fixed lengths, so most
queries are quantifier free.  z3 is optional: without it every query
answers "unknown".
"""

from __future__ import annotations

from .imp import BinOp, BoolLit, Exists, Forall, IntLit, Ite, Select, Size, UnOp, Var, _quant_guard

try:
    import z3
except ImportError:  # pragma: no cover - exercised only without the extra
    z3 = None


def available() -> bool:
    return z3 is not None


class _Unsupported(Exception):
    pass


def _index_range(var, body, sizes):
    """Upper bound n when ``body`` guards ``var`` by ``0 <= var && var < size(a)``."""
    lo = hi = None
    for g in _quant_guard(body):
        if type(g) is not BinOp:
            continue
        if g.op == "<=" and g.lhs == IntLit(0) and g.rhs == Var(var):
            lo = 0
        elif g.op == "<" and g.lhs == Var(var) and type(g.rhs) is Size:
            hi = sizes[g.rhs.arr]
    return hi if lo == 0 and hi is not None else None


class _Encoder:
    def __init__(self, sizes: dict):
        self.sizes = sizes
        self.scalars: dict = {}
        self.cells: dict = {}
        self.fresh = 0

    def scalar(self, name):
        if name not in self.scalars:
            self.scalars[name] = z3.Int(name)
        return self.scalars[name]

    def cell(self, arr, i):
        key = (arr, i)
        if key not in self.cells:
            self.cells[key] = z3.Int(f"{arr}[{i}]")
        return self.cells[key]

    def expr(self, e, env):
        t = type(e)
        if t is Var:
            if e.name in env:
                return env[e.name]
            return self.scalar(e.name)
        if t is IntLit:
            return z3.IntVal(e.value)
        if t is BoolLit:
            return z3.BoolVal(e.value)
        if t is Size:
            return z3.IntVal(self.sizes[e.arr])
        if t is Select:
            idx = self.expr(e.idx, env)
            n = self.sizes[e.arr]
            if z3.is_int_value(idx):
                k = idx.as_long()
                if 0 <= k < n:
                    return self.cell(e.arr, k)
            # outside the guards the value is unconstrained
            self.fresh += 1
            out = z3.Int(f"oob{self.fresh}")
            for k in reversed(range(n)):
                out = z3.If(idx == k, self.cell(e.arr, k), out)
            return out
        if t is Ite:
            return z3.If(self.expr(e.cond, env), self.expr(e.then, env), self.expr(e.orelse, env))
        if t is UnOp:
            a = self.expr(e.arg, env)
            return z3.Not(a) if e.op == "!" else -a
        if t in (Forall, Exists):
            n = _index_range(e.var, e.body, self.sizes)
            if n is not None:
                parts = [self.expr(e.body, {**env, e.var: z3.IntVal(k)}) for k in range(n)]
                if t is Forall:
                    return z3.And(*parts) if parts else z3.BoolVal(True)
                return z3.Or(*parts) if parts else z3.BoolVal(False)
            self.fresh += 1
            v = z3.Int(f"{e.var}#{self.fresh}")
            body = self.expr(e.body, {**env, e.var: v})
            return z3.ForAll([v], body) if t is Forall else z3.Exists([v], body)
        if t is BinOp:
            return self.binop(e.op, self.expr(e.lhs, env), self.expr(e.rhs, env), e.rhs)
        raise _Unsupported(repr(e))

    def binop(self, op, a, b, rhs):
        if op == "%":
            # a zero divisor faults at run time; only literal divisors are safe to model
            if type(rhs) is not IntLit or rhs.value == 0:
                raise _Unsupported("modulo by a non-constant")
            return a % abs(rhs.value)
        table = {
            "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
            "=": lambda: a == b, "!=": lambda: a != b, "<": lambda: a < b, "<=": lambda: a <= b,
            ">": lambda: a > b, ">=": lambda: a >= b, "&&": lambda: z3.And(a, b),
            "||": lambda: z3.Or(a, b), "==>": lambda: z3.Implies(a, b), "<=>": lambda: a == b,
        }
        return table[op]()


def valid_over_integers(f, size_options, timeout_ms: int = 5000) -> str:
    """"valid", "invalid" or "unknown" for the boolean Imp formula ``f``,
    with integers unbounded and collection lengths drawn from ``size_options``."""
    if z3 is None:
        return "unknown"
    for sizes in size_options:
        enc = _Encoder(sizes)
        try:
            goal = enc.expr(f, {})
        except (_Unsupported, z3.Z3Exception, KeyError):
            return "unknown"
        s = z3.Solver()
        s.set("timeout", timeout_ms)
        s.add(z3.Not(goal))
        r = s.check()
        if r == z3.sat:
            return "invalid"
        if r != z3.unsat:
            return "unknown"
    return "valid"
