"""Lexing, parsing and name resolution for ``.spy`` source text.

Two surface styles are accepted and may be mixed:

* braces: ``procedure p() { for x in xs { x <- x.val + 1; } }``
* indentation: a line ending in ``:`` followed by an indented block opens a
  block that closes when the indentation drops back.

A ``:`` that is not followed by an indented block introduces a single
statement (or, after ``foreach``, the rest of the invariant).  Statement
terminators ``;`` are optional.  ``:=`` and ``=`` both assign; ``<-`` writes
through an iterator and is always lexed as one token, so write ``x < -1``
when a comparison is meant.  ``red`` and ``black`` are the constants 1 and 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .syntax import (
    And, Assign, Atom, BinOp, BoolLit, Exists, For, Foreach, Idx, If, IntLit,
    Prev, Procedure, Program, Put, Size, UnOp, Val, Var, walk_expr,
)

KEYWORDS = {
    "data", "procedure", "invariant", "foreach", "exists", "for", "in",
    "if", "else", "true", "false", "int",
}
COLOR_CONSTANTS = {"red": 1, "black": 0}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=>|==>|:=|<-|==|!=|<=|>=|&&|\|\||[-+*%<>=!(){}\[\],;:.])
    """,
    re.VERBOSE,
)

# binary operator levels, loosest first
_LEVELS = [
    ("<=>",),
    ("==>",),
    ("||",),
    ("&&",),
    ("=", "==", "!=", "<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "%"),
]
_RIGHT = {"==>"}
_NONASSOC = {"<=>", "=", "==", "!=", "<", "<=", ">", ">="}


class SourceError(Exception):
    """A located lex, parse or resolve failure."""

    def __init__(self, kind: str, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{line}:{col}: {kind}: {message}")
        self.kind = kind
        self.message = message
        self.line = line
        self.col = col

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.kind}: {self.message}"


@dataclass(frozen=True)
class Token:
    kind: str  # int | name | kw | op | eof
    text: str
    line: int
    col: int


# -- lexing -----------------------------------------------------------------


def _strip_comment(line: str) -> str:
    i = line.find("//")
    return line if i < 0 else line[:i]


def _indent_width(line: str) -> int:
    n = 0
    for ch in line:
        if ch == " ":
            n += 1
        elif ch == "\t":
            n += 4 - n % 4
        else:
            break
    return n


def indent_to_braces(text: str) -> str:
    """Rewrite colon-and-indent blocks into braces.

    Line numbers and the columns of existing characters are preserved:
    an opening ``:`` becomes ``{`` in place and closing braces are appended
    to the end of the last non-blank line of the block.
    """
    lines = [_strip_comment(l) for l in text.split("\n")]
    nonblank = [i for i, l in enumerate(lines) if l.strip()]
    out = list(lines)
    stack: list[int] = []  # indentation of lines that opened a block
    last = None
    for pos, i in enumerate(nonblank):
        width = _indent_width(lines[i])
        while stack and width <= stack[-1]:
            stack.pop()
            out[last] += " }"
        stripped = lines[i].rstrip()
        nxt = nonblank[pos + 1] if pos + 1 < len(nonblank) else None
        if stripped.endswith(":") and nxt is not None and _indent_width(lines[nxt]) > width:
            out[i] = stripped[:-1] + "{"
            stack.append(width)
        last = i
    while stack:
        stack.pop()
        out[last] += " }"
    return "\n".join(out)


def tokenize(text: str) -> list:
    text = indent_to_braces(text)
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SourceError("lex", f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "name":
            word = m.group()
            toks.append(Token("kw" if word in KEYWORDS else "name", word, line, col))
        elif kind != "ws":
            toks.append(Token(kind, m.group(), line, col))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


# -- parsing ----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, allow_exists: bool = False):
        self.toks = tokenize(text)
        self.i = 0
        self.allow_exists = allow_exists
        self.scopes: list[set] = []  # iterator names of enclosing binders
        self.parenthesized: set = set()  # ids of expressions written in parens
        self.spans: list = []

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("op", "kw") and t.text == text

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return SourceError("parse", f"{msg}, found {found}", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        return self.next()

    def name(self) -> Token:
        t = self.peek()
        if t.kind != "name":
            raise self.error("expected a name")
        return self.next()

    def skip_semis(self):
        while self.at(";"):
            self.next()

    def in_scope(self, name: str) -> bool:
        return any(name in s for s in self.scopes)

    # program structure
    def program(self) -> Program:
        decls, invs, procs, sizes = [], [], [], {}
        while self.peek().kind != "eof":
            t = self.peek()
            if self.at(";"):
                self.next()
            elif self.at("data"):
                self.next()
                nt = self.name()
                self.expect(":")
                self.expect("int")
                ty = "int"
                if self.at("["):
                    self.next()
                    ty = "int[]"
                    if self.peek().kind == "int":
                        sizes[nt.text] = int(self.next().text)
                    self.expect("]")
                decls.append((nt.text, ty))
                self.spans.append(("data", nt.text, nt.line, nt.col))
                self.skip_semis()
            elif self.at("procedure"):
                procs.append(self.procedure())
            else:
                if self.at("invariant"):
                    self.next()
                self.spans.append(("invariant", str(len(invs)), t.line, t.col))
                invs.append(self.inv())
                self.skip_semis()
        return Program(tuple(decls), tuple(invs), tuple(procs),
                       tuple(sorted(sizes.items())), tuple(self.spans))

    def procedure(self) -> Procedure:
        self.expect("procedure")
        nt = self.name()
        self.spans.append(("procedure", nt.text, nt.line, nt.col))
        self.expect("(")
        params = []
        while not self.at(")"):
            pt = self.name()
            self.expect(":")
            self.expect("int")
            params.append((pt.text, "int"))
            if not self.at(","):
                break
            self.next()
        self.expect(")")
        body = self.block()
        self.skip_semis()
        return Procedure(nt.text, tuple(params), body)

    def block(self) -> tuple:
        """``{ stmts }``, ``: { stmts }`` or ``: stmt``."""
        if self.at(":"):
            self.next()
            if not self.at("{"):
                return (self.stmt(),)
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise self.error("expected '}'")
            if self.at(";"):
                self.next()
                continue
            stmts.append(self.stmt())
        self.next()
        return tuple(stmts)

    def bindings(self) -> tuple:
        out = []
        while True:
            it = self.name().text
            self.expect("in")
            coll = self.name().text
            out.append((it, coll))
            if not self.at(","):
                return tuple(out)
            self.next()

    def stmt(self):
        t = self.peek()
        if self.at("for"):
            self.next()
            binds = self.bindings()
            names = [it for it, _ in binds]
            if len(set(names)) != len(names):
                raise SourceError("parse", "duplicate iterator in for loop", t.line, t.col)
            self.scopes.append(set(names))
            body = self.block()
            self.scopes.pop()
            return For(binds, body)
        if self.at("if"):
            self.next()
            cond = self.expr()
            then = self.block()
            orelse = ()
            self.skip_semis()
            if self.at("else"):
                self.next()
                orelse = (self.stmt(),) if self.at("if") else self.block()
            return If(cond, then, orelse)
        if t.kind == "name":
            self.next()
            if self.at(":=") or self.at("="):
                self.next()
                s = Assign(t.text, self.expr())
            elif self.at("<-"):
                self.next()
                s = Put(t.text, self.expr())
            else:
                raise self.error("expected ':=' or '<-'")
            self.skip_semis()
            return s
        raise self.error("expected a statement")

    # invariants
    def inv(self):
        parts = [self.inv_unit()]
        while self.at("&&"):
            self.next()
            parts.append(self.inv_unit())
        flat = []
        for p in parts:
            flat.extend(p if isinstance(p, list) else [p])
        return conjoin_all(flat)

    def inv_unit(self):
        t = self.peek()
        if self.at("foreach"):
            self.next()
            binds = self.bindings()
            names = [it for it, _ in binds]
            if len(set(names)) != len(names):
                raise SourceError("parse", "duplicate iterator in foreach", t.line, t.col)
            self.scopes.append(set(names))
            if self.at(":"):
                self.next()
            if self.at("{"):
                self.next()
                body = self.inv()
                self.expect("}")
            else:
                body = self.inv()
            self.scopes.pop()
            return Foreach(binds, body)
        if self.at("exists"):
            if not self.allow_exists:
                raise self.error("existential quantifiers are not part of the source language", t)
            self.next()
            v = self.name().text
            self.expect("{")
            body = self.inv()
            self.expect("}")
            return Exists(v, body)
        if self.at("{"):
            self.next()
            body = self.inv()
            self.expect("}")
            return body
        # an expression; unparenthesized top-level && splits into conjuncts
        return [Atom(e) for e in self._split_and(self.expr())]

    def _split_and(self, e) -> list:
        if isinstance(e, BinOp) and e.op == "&&" and id(e) not in self.parenthesized:
            return self._split_and(e.lhs) + self._split_and(e.rhs)
        return [e]

    # expressions
    def expr(self, level: int = 0):
        if level == len(_LEVELS):
            return self.unary()
        ops = _LEVELS[level]
        lhs = self.expr(level + 1)
        while True:
            t = self.peek()
            if t.kind != "op" or t.text not in ops:
                return lhs
            # `e && foreach ...` continues an invariant, not the expression
            if t.text == "&&" and (self.at("foreach", 1) or self.at("exists", 1) or self.at("{", 1)):
                return lhs
            self.next()
            op = "=" if t.text == "==" else t.text
            if t.text in _RIGHT:
                rhs = self.expr(level)
                return BinOp(op, lhs, rhs)
            rhs = self.expr(level + 1)
            lhs = BinOp(op, lhs, rhs)
            if t.text in _NONASSOC:
                nt = self.peek()
                if nt.kind == "op" and nt.text in ops:
                    raise self.error(f"operator {t.text!r} is not associative")
                return lhs

    def unary(self):
        if self.at("!"):
            self.next()
            return UnOp("!", self.unary())
        if self.at("-"):
            self.next()
            if self.peek().kind == "int":
                return IntLit(-int(self.next().text))
            return UnOp("-", self.unary())
        return self.primary()

    def primary(self):
        t = self.next()
        if t.kind == "int":
            return IntLit(int(t.text))
        if t.kind == "kw" and t.text in ("true", "false"):
            return BoolLit(t.text == "true")
        if t.kind == "op" and t.text == "(":
            e = self.expr()
            self.expect(")")
            self.parenthesized.add(id(e))
            return e
        if t.kind == "name":
            if t.text in COLOR_CONSTANTS:
                return IntLit(COLOR_CONSTANTS[t.text])
            if self.at("."):
                self.next()
                m = self.peek()
                if m.kind != "name" or m.text not in ("val", "prev", "idx", "size"):
                    raise self.error("expected 'val', 'prev', 'idx' or 'size'")
                self.next()
                if m.text == "val":
                    return Val(t.text)
                if m.text == "idx":
                    return Idx(t.text)
                if m.text == "size":
                    return Size(t.text)
                self.expect("(")
                default = self.expr()
                self.expect(")")
                try:
                    return Prev(t.text, default)
                except ValueError as exc:
                    raise SourceError("parse", str(exc), t.line, t.col) from None
            if self.in_scope(t.text):
                return Val(t.text)
            return Var(t.text)
        self.i -= 1 if t.kind != "eof" else 0
        raise self.error("expected an expression", t)


def conjoin_all(parts: list):
    """Right-nested conjunction that keeps ``true`` atoms as written."""
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def _finish(p: _Parser):
    if p.peek().kind != "eof":
        raise p.error("unexpected trailing input")


def parse_program(text: str) -> Program:
    """Parse a whole ``.spy`` file; raises SourceError on failure."""
    return _Parser(text).program()


def parse_expr(text: str, iterators=()):
    p = _Parser(text)
    p.scopes.append(set(iterators))
    e = p.expr()
    _finish(p)
    return e


def parse_inv(text: str, iterators=(), allow_exists: bool = True):
    """Parse an invariant formula; existentials are allowed here for tooling."""
    p = _Parser(text, allow_exists=allow_exists)
    p.scopes.append(set(iterators))
    inv = p.inv()
    _finish(p)
    return inv


def parse_block(text: str, iterators=()) -> tuple:
    p = _Parser("{" + text + "\n}")
    p.scopes.append(set(iterators))
    b = p.block()
    _finish(p)
    return b


# -- name resolution --------------------------------------------------------


@dataclass(frozen=True)
class ResolvedProgram:
    """A program whose names are all bound.

    ``globals`` maps each data name to ``int`` or ``int[]``; ``params`` maps
    each procedure to its parameter names.  Iterator references were already
    tagged by the parser (``Val``/``Prev``/``Idx``), so the tree itself is
    the parsed one.
    """

    program: Program
    globals: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)


def _span(prog: Program, kind: str, name: str):
    for k, n, line, col in prog.spans:
        if k == kind and n == name:
            return line, col
    return 1, 1


def resolve_names(prog: Program) -> ResolvedProgram:
    """Check that every reference is bound; raises SourceError(resolve)."""
    globals_: dict = {}
    for name, ty in prog.datadecls:
        if name in globals_ or name in COLOR_CONSTANTS:
            raise SourceError("resolve", f"duplicate declaration of {name!r}", *_span(prog, "data", name))
        globals_[name] = ty
    sizes = prog.size_map
    for coll in sizes:
        if globals_.get(coll) != "int[]":
            raise SourceError("resolve", f"size given for non-collection {coll!r}", *_span(prog, "data", coll))

    def fail(msg, kind, name):
        raise SourceError("resolve", msg, *_span(prog, kind, name))

    def check_bindings(bindings, scope, where):
        seen_sizes = set()
        for it, coll in bindings:
            if it in scope or it in globals_:
                fail(f"iterator {it!r} shadows an existing name", *where)
            if globals_.get(coll) != "int[]":
                what = "undeclared" if coll not in globals_ else "not a collection:"
                fail(f"{what} {coll!r} in binding", *where)
            if coll in sizes:
                seen_sizes.add(sizes[coll])
        if len(seen_sizes) > 1:
            fail("collections iterated together have different declared sizes", *where)

    def check_expr(e, scope, iters, where):
        for node in walk_expr(e):
            if isinstance(node, Var):
                if node.name not in scope:
                    fail(f"undeclared name {node.name!r}", *where)
            elif isinstance(node, (Val, Prev, Idx)):
                if node.iter not in iters and node.iter not in globals_:
                    fail(f"{node.iter!r} is not an iterator in scope", *where)
            elif isinstance(node, Size):
                if node.name not in iters and globals_.get(node.name) != "int[]":
                    fail(f"{node.name!r} has no size", *where)

    def check_inv(inv, iters, where):
        if isinstance(inv, Foreach):
            check_bindings(inv.bindings, iters, where)
            check_inv(inv.body, iters | {it for it, _ in inv.bindings}, where)
        elif isinstance(inv, Exists):
            if inv.var in globals_ or inv.var in iters:
                fail(f"bound name {inv.var!r} shadows an existing name", *where)
            globals_[inv.var] = "int"
            try:
                check_inv(inv.body, iters, where)
            finally:
                del globals_[inv.var]
        elif isinstance(inv, And):
            check_inv(inv.lhs, iters, where)
            check_inv(inv.rhs, iters, where)
        else:
            check_expr(inv.expr, set(globals_), iters, where)

    for k, inv in enumerate(prog.invariants):
        check_inv(inv, set(), ("invariant", str(k)))

    params: dict = {}
    for proc in prog.procedures:
        where = ("procedure", proc.name)
        if proc.name in params:
            fail(f"duplicate procedure {proc.name!r}", *where)
        names = [n for n, _ in proc.params]
        for n in names:
            if n in globals_:
                fail(f"parameter {n!r} shadows a global", *where)
        if len(set(names)) != len(names):
            fail("duplicate parameter", *where)
        params[proc.name] = tuple(names)
        scope = set(globals_) | set(names)

        def check_block(block, iters):
            for s in block:
                if isinstance(s, (Assign, Put)):
                    if s.target not in scope and s.target not in iters:
                        fail(f"undeclared name {s.target!r}", *where)
                    check_expr(s.rhs, scope, iters, where)
                elif isinstance(s, If):
                    check_expr(s.cond, scope, iters, where)
                    check_block(s.then, iters)
                    check_block(s.orelse, iters)
                else:
                    for it, _ in s.bindings:
                        if it in names:
                            fail(f"iterator {it!r} shadows a parameter", *where)
                    check_bindings(s.bindings, iters, where)
                    check_block(s.body, iters | set(s.iterators))

        check_block(proc.body, set())
    return ResolvedProgram(prog, globals_, params)


def load_program(text: str) -> ResolvedProgram:
    """Parse and resolve in one step."""
    return resolve_names(parse_program(text))
