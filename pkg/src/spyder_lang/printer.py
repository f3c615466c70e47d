"""Pretty-printing of Spyder terms into the braced concrete syntax.

The output always re-parses to a structurally equal term.
"""

from __future__ import annotations

from .syntax import (
    And, Assign, BinOp, BoolLit, Exists, For, Foreach, Idx, If, IntLit, Atom,
    Prev, Procedure, Program, Put, Size, UnOp, Val, Var,
)

# binding strength; higher binds tighter
PREC = {
    "<=>": 0, "==>": 1, "||": 2, "&&": 3,
    "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "%": 6,
}
RIGHT_ASSOC = {"==>"}
NON_ASSOC = {"<=>", "=", "!=", "<", "<=", ">", ">="}
UNARY_PREC = 7
ATOM_PREC = 8

INDENT = "  "


def _prec(e) -> int:
    if isinstance(e, BinOp):
        return PREC[e.op]
    if isinstance(e, UnOp):
        return UNARY_PREC
    if isinstance(e, IntLit) and e.value < 0:
        return UNARY_PREC
    return ATOM_PREC


def expr_str(e) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Val):
        return f"{e.iter}.val"
    if isinstance(e, Prev):
        return f"{e.iter}.prev({expr_str(e.default)})"
    if isinstance(e, Idx):
        return f"{e.iter}.idx"
    if isinstance(e, Size):
        return f"{e.name}.size"
    if isinstance(e, UnOp):
        inner = expr_str(e.arg)
        if _prec(e.arg) < UNARY_PREC or isinstance(e.arg, UnOp) or (
            e.op == "-" and isinstance(e.arg, IntLit)
        ):
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, BinOp):
        p = PREC[e.op]
        left, right = expr_str(e.lhs), expr_str(e.rhs)
        lp, rp = _prec(e.lhs), _prec(e.rhs)
        if lp < p or (lp == p and (e.op in RIGHT_ASSOC or e.op in NON_ASSOC)):
            left = f"({left})"
        if rp < p or (rp == p and e.op not in RIGHT_ASSOC):
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def _bindings(bindings) -> str:
    return ", ".join(f"{it} in {coll}" for it, coll in bindings)


def inv_str(inv) -> str:
    if isinstance(inv, Atom):
        text = expr_str(inv.expr)
        # keep a top-level && inside the atom rather than splitting it
        if isinstance(inv.expr, BinOp) and PREC[inv.expr.op] <= PREC["&&"]:
            text = f"({text})"
        return text
    if isinstance(inv, And):
        left = inv_str(inv.lhs)
        if isinstance(inv.lhs, And):
            left = f"{{ {left} }}"
        return f"{left} && {inv_str(inv.rhs)}"
    if isinstance(inv, Foreach):
        return f"foreach {_bindings(inv.bindings)} {{ {inv_str(inv.body)} }}"
    if isinstance(inv, Exists):
        return f"exists {inv.var} {{ {inv_str(inv.body)} }}"
    raise TypeError(f"not an invariant: {inv!r}")


def stmt_lines(s, depth: int = 0) -> list:
    pad = INDENT * depth
    if isinstance(s, Assign):
        return [f"{pad}{s.target} := {expr_str(s.rhs)};"]
    if isinstance(s, Put):
        return [f"{pad}{s.target} <- {expr_str(s.rhs)};"]
    if isinstance(s, If):
        lines = [f"{pad}if ({expr_str(s.cond)}) {{"]
        lines += block_lines(s.then, depth + 1)
        if s.orelse:
            lines.append(f"{pad}}} else {{")
            lines += block_lines(s.orelse, depth + 1)
        lines.append(f"{pad}}}")
        return lines
    if isinstance(s, For):
        lines = [f"{pad}for {_bindings(s.bindings)} {{"]
        lines += block_lines(s.body, depth + 1)
        lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"not a statement: {s!r}")


def block_lines(block, depth: int = 0) -> list:
    lines = []
    for s in block:
        lines += stmt_lines(s, depth)
    return lines


def procedure_str(proc: Procedure) -> str:
    params = ", ".join(f"{n}: {ty}" for n, ty in proc.params)
    lines = [f"procedure {proc.name}({params}) {{"]
    lines += block_lines(proc.body, 1)
    lines.append("}")
    return "\n".join(lines)


def program_str(p: Program) -> str:
    sizes = p.size_map
    parts = []
    for name, ty in p.datadecls:
        if ty == "int[]":
            n = sizes.get(name)
            parts.append(f"data {name}: int[{'' if n is None else n}];")
        else:
            parts.append(f"data {name}: int;")
    if p.invariants:
        parts.append("")
    for inv in p.invariants:
        parts.append(f"invariant {inv_str(inv)};")
    for proc in p.procedures:
        parts.append("")
        parts.append(procedure_str(proc))
    return "\n".join(parts) + ("\n" if parts else "")


def pretty_print(t) -> str:
    """Render any Spyder term (expression, invariant, statement, block, program)."""
    if isinstance(t, Program):
        return program_str(t)
    if isinstance(t, Procedure):
        return procedure_str(t) + "\n"
    if isinstance(t, tuple):
        return "\n".join(block_lines(t))
    if isinstance(t, (Assign, Put, If, For)):
        return "\n".join(stmt_lines(t))
    if isinstance(t, (Atom, And, Foreach, Exists)):
        return inv_str(t)
    return expr_str(t)
