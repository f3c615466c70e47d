"""Targeted synthesis: complete a procedure so it preserves the invariant.

The programmer's statements are kept and patches are only inserted between
them.  Each patch writes variables that the invariant ties to what the
procedure changed (the *stale candidates*), never anything the procedure
already modifies (the *frame*).  Because the original statements still run
unchanged, the completed procedure extends the original one.

A goal's precondition is kept as a base invariant plus the statements run
since then (``Pre``), which avoids the existentials of a strongest
postcondition.  Loops over collections related to the invariant are
specialized: the loop is widened with iterators over the related
collections and its body is completed under the per-element invariant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import imp
from . import syntax as spy
from .analysis import (
    TranslationContext, assigned_vars, atom_groups, depends, free_vars, modified_vars,
)
from .imp import Fault, Machine, NeedCell, Vacuous
from .printer import pretty_print
from .verify import (
    BoundedDomain, HoareGoal, Verdict, _vocab_for, check_triple_imp, check_triple_spy,
    index_guards, loop_guards, search, sp_assign, sp_put, weaken_prev,
)


class SynthesisFailure(Exception):
    """No patch in the grammar closes the residual goal.

    ``reason`` is one of ``unsatisfiable``, ``frame-blocked``,
    ``grammar-exhausted`` or ``verification-unknown``.
    """

    def __init__(self, reason, pre=None, post=None, writable=(), counterexample=None,
                 ctx=None, facts=(), path=""):
        self.reason = reason
        self.pre = pre
        self.post = post
        self.writable = tuple(sorted(writable))
        self.counterexample = counterexample
        self.ctx = ctx
        self.facts = tuple(facts)
        self.path = path
        super().__init__(f"{reason} at {path or 'top'}")


@dataclass(frozen=True)
class PatchGrammar:
    """Bounds of the patch language."""

    depth_limit: int = 3
    ops: tuple = ("+", "-", "*", "%")
    cond_ops: tuple = ("<", "<=", "=")
    allow_if: bool = True
    allow_loops: bool = True
    max_rounds: int = 64
    loop_size: int = 5

    @property
    def max_size(self) -> int:
        return 2 ** self.depth_limit - 1


@dataclass(frozen=True)
class AssumeCond:
    """Trace marker: the branch condition taken to reach this point."""

    cond: object


@dataclass(frozen=True)
class Pre:
    """``base`` held, then ``trace`` ran (statements and branch assumptions)."""

    base: object
    trace: tuple = ()

    def then(self, *items) -> "Pre":
        return Pre(self.base, self.trace + tuple(items))

    def as_inv(self, taken=()):
        """The same precondition as a Spyder invariant (strongest postcondition)."""
        taken = set(taken) | spy.names_in(self.base)
        inv = self.base
        for item in self.trace:
            if isinstance(item, AssumeCond):
                inv = spy.And(inv, spy.Atom(item.cond))
            elif isinstance(item, spy.Assign):
                inv = sp_assign(inv, item, taken)
            elif isinstance(item, spy.Put):
                inv = sp_put(inv, item, taken)
            else:
                return None  # loops have no finite strongest postcondition
        return inv


@dataclass(frozen=True)
class CompletionGoal:
    stale: frozenset
    pre: Pre
    block: tuple
    post: object
    ctx: TranslationContext
    frame: frozenset = frozenset()
    facts: tuple = ()


@dataclass
class PatchReport:
    procedure: str
    patches: list = field(default_factory=list)  # [{path, code, ast_size}]
    verdicts: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def locs(self) -> int:
        return len(self.patches)

    @property
    def patch_size(self) -> int:
        return sum(p["ast_size"] for p in self.patches)

    def to_dict(self) -> dict:
        return {"procedure": self.procedure, "patches": self.patches,
                "verdicts": self.verdicts, "stats": self.stats}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- helpers ----------------------------------------------------------------


def _nodes(t, ctx: TranslationContext) -> set:
    """Free names of ``t`` with bound iterators replaced by their collections."""
    return {ctx.get(n, n) for n in free_vars(t, ctx)}


def stale_candidates(stale, inv, ctx: TranslationContext | None = None) -> set:
    """Variables the invariant relates to something in ``stale``, minus ``stale`` itself."""
    ctx = ctx or TranslationContext()
    out: set = set()
    for x in stale:
        out |= depends(x, inv, ctx)
    gone = set(stale) | {ctx.get(x) for x in stale if x in ctx}
    return out - gone


def _distances(sources, inv, ctx) -> dict:
    """BFS distance in the "occur together" graph from ``sources``."""
    groups = atom_groups(inv, ctx)
    start = {ctx.get(s, s) for s in sources}
    dist = {s: 0 for s in start}
    frontier = sorted(start)
    while frontier:
        nxt = []
        for n in frontier:
            for grp in groups:
                if n in grp:
                    for m in sorted(grp):
                        if m not in dist:
                            dist[m] = dist[n] + 1
                            nxt.append(m)
        frontier = nxt
    return dist


def _written(s, ctx) -> set:
    out = {s.target}
    if isinstance(s, spy.Put) and s.target in ctx:
        out.add(ctx.get(s.target))
    return out


def _tr_item(item, ctx):
    if isinstance(item, AssumeCond):
        return imp.Assume(imp.translate_expr(item.cond, ctx, check=False))
    return imp.translate_stmt(item, ctx, check=False)


def _euclid(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        return None
    return a % abs(b)


def _is_index_eq(f) -> bool:
    return (isinstance(f, spy.Atom) and isinstance(f.expr, spy.BinOp) and f.expr.op == "="
            and isinstance(f.expr.lhs, spy.Idx) and isinstance(f.expr.rhs, spy.Idx))


_CMP = {"<": lambda a, b: a < b, "<=": lambda a, b: a <= b, "=": lambda a, b: a == b}


@dataclass
class _Entry:
    expr: object
    size: int
    depth: int
    sig: tuple
    mask: int = 0


@dataclass(frozen=True)
class _Target:
    kind: str  # assign | put | loop
    name: str  # variable, iterator or collection
    node: str  # the invariant-level name (collection for put)


class _Engine:
    def __init__(self, prog: spy.Program, params=(), dom: BoundedDomain | None = None,
                 grammar: PatchGrammar | None = None):
        self.prog = prog
        self.params = tuple(params)
        self.dom = dom or BoundedDomain()
        self.grammar = grammar or PatchGrammar()
        self.cache: dict = {}
        self.patches: list = []  # (path, block)
        self.extended: list = []
        self.stats = {"verifications": 0, "candidates": 0, "rounds": 0}
        self.int_range = (self.dom.int_lo, self.dom.int_hi)

    # -- verification ------------------------------------------------------

    def _trace(self, pre: Pre, patch, ctx):
        parts = [_tr_item(i, ctx) for i in pre.trace]
        parts.append(imp.translate_stmt(tuple(patch), ctx, check=False))
        return imp.seq(*parts)

    def verify(self, pre: Pre, patch, post, ctx, facts) -> Verdict:
        key = (pre, tuple(patch), post, ctx, tuple(facts))
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        self.stats["verifications"] += 1
        # index equalities first so the search fixes aligned iterators together
        first = [f for f in facts if _is_index_eq(f)]
        later = [f for f in facts if not _is_index_eq(f)]
        guide = imp.conj([imp.translate_inv(f, ctx, check=False) for f in first] + index_guards(ctx)
                         + [imp.translate_inv(f, ctx, check=False) for f in (pre.base, *later)])
        stmt = self._trace(pre, patch, ctx)
        q = imp.translate_inv(post, ctx, check=False)
        v = check_triple_imp(guide, stmt, q, self.dom, _vocab_for(ctx, self.prog, guide, stmt, q))
        self.cache[key] = v
        return v

    def points(self, examples, pre, patch, ctx) -> list:
        """States reached from each example after the trace and ``patch``."""
        stmt = self._trace(pre, patch, ctx)
        out = []
        for ex in examples:
            m = Machine(ex.cells(), ex.sizes(), self.int_range, self.dom.step_budget)
            try:
                m.exec(stmt)
            except (Fault, NeedCell, Vacuous):
                continue
            out.append((m.values, m.sizes))
        return out

    def _holds(self, e, values, sizes) -> bool:
        try:
            return Machine(values, sizes, self.int_range).eval(e) is True
        except (Fault, NeedCell):
            return False

    def failing(self, conjs, pts, ctx) -> list:
        out = []
        for i, c in enumerate(conjs):
            q = imp.translate_inv(c, ctx, check=False)
            if not all(self._holds(q, dict(v), s) for v, s in pts):
                out.append(i)
        return out

    # -- expression enumeration -------------------------------------------

    def vocabulary(self, terms, ctx, iterators=None):
        """Atoms and constants for the patch grammar, in a fixed order."""
        names: set = set()
        exprs = []
        for t in terms:
            names |= spy.names_in(t)
            if isinstance(t, (spy.Atom, spy.And, spy.Foreach, spy.Exists)):
                exprs.extend(spy.inv_exprs(t))
        scalars = set(self.prog.scalars) | set(self.params)
        its = [x for x, _ in ctx.bindings] if iterators is None else list(iterators)
        prevs, uses_idx, ints = [], False, set()
        for e in exprs:
            for n in spy.walk_expr(e):
                if isinstance(n, spy.Prev) and n.iter in its and n not in prevs:
                    prevs.append(n)
                elif isinstance(n, spy.Idx):
                    uses_idx = True
                elif isinstance(n, spy.IntLit):
                    ints.add(n.value)
        atoms = []
        for x in its:
            atoms.append(spy.Val(x))
            atoms.extend(sorted((p for p in prevs if p.iter == x), key=repr))
            if uses_idx:
                atoms.append(spy.Idx(x))
        atoms.extend(spy.Var(n) for n in sorted(names & scalars))
        consts = [spy.IntLit(0), spy.IntLit(1)] + [spy.IntLit(k) for k in sorted(ints - {0, 1})]
        return atoms, consts

    def _sig(self, e, pts, ctx):
        ie = imp.translate_expr(e, ctx, check=False)
        out = []
        for values, sizes in pts:
            try:
                v = Machine(values, sizes, self.int_range).eval(ie)
            except (Fault, NeedCell):
                return None
            if type(v) is not int:
                return None
            out.append(v)
        return tuple(out)

    def bank(self, atoms, consts, pts, ctx, max_size):
        """Expressions up to ``max_size``, one per behaviour on ``pts``, smallest first."""
        seen = set()
        levels: dict = {1: []}
        for e in list(consts) + list(atoms):
            sig = self._sig(e, pts, ctx)
            if sig is None or sig in seen:
                continue
            seen.add(sig)
            ent = _Entry(e, 1, 1, sig)
            levels[1].append(ent)
            yield ent
        for size in range(3, max_size + 1, 2):
            levels[size] = []
            for op in self.grammar.ops:
                for ls in range(1, size - 1, 2):
                    for a in levels[ls]:
                        for b in levels[size - 1 - ls]:
                            depth = 1 + max(a.depth, b.depth)
                            if depth > self.grammar.depth_limit:
                                continue
                            sig = []
                            for x, y in zip(a.sig, b.sig):
                                v = _euclid(op, x, y)
                                if v is None or abs(v) >= imp.INT_LIMIT:
                                    break
                                sig.append(v)
                            else:
                                sig = tuple(sig)
                                if sig in seen:
                                    continue
                                seen.add(sig)
                                ent = _Entry(spy.BinOp(op, a.expr, b.expr), size, depth, sig)
                                levels[size].append(ent)
                                yield ent

    def _write(self, tgt: _Target, values, ctx, v):
        values = dict(values)
        if tgt.kind == "assign":
            values[tgt.name] = v
        else:
            values[(ctx.get(tgt.name), values[tgt.name])] = v
        return values

    def _mask(self, tgt, ent, req_imp, pts, ctx, memo) -> int:
        """Bit k is set when writing the entry's value at point k satisfies the requirement."""
        m = 0
        for k, ((values, sizes), v) in enumerate(zip(pts, ent.sig)):
            ok = memo[k].get(v)
            if ok is None:
                ok = memo[k][v] = self._holds(req_imp, self._write(tgt, values, ctx, v), sizes)
            if ok:
                m |= 1 << k
        return m

    def _stmt(self, tgt, e):
        return spy.Assign(tgt.name, e) if tgt.kind == "assign" else spy.Put(tgt.name, e)

    def candidates(self, tgt, req, pre, patch, ctx, pts):
        """Statements for ``tgt`` that satisfy ``req`` on every point, plain ones first."""
        atoms, consts = self.vocabulary((req, pre.base) + pre.trace, ctx)
        # the target's own current value comes last: prefer defining it afresh
        own = spy.Var(tgt.name) if tgt.kind == "assign" else spy.Val(tgt.name)
        last = []
        if own in atoms:
            atoms, last = [a for a in atoms if a != own], [own]
        req_imp = imp.translate_inv(req, ctx, check=False)
        full = (1 << len(pts)) - 1
        entries = []
        memo = [{} for _ in pts]
        for ent in self.bank(atoms + last, consts, pts, ctx, self.grammar.max_size):
            ent.mask = self._mask(tgt, ent, req_imp, pts, ctx, memo)
            entries.append(ent)
            if ent.mask == full:
                yield self._stmt(tgt, ent.expr)
        if not self.grammar.allow_if or not pts:
            return
        # conditions compare a variable with a constant before another variable;
        # branch values prefer constants
        lits = [e for e in entries if isinstance(e.expr, spy.IntLit)]
        leaves = [e for e in entries if e.size == 1 and not isinstance(e.expr, spy.IntLit)]
        ranked = entries
        for op in self.grammar.cond_ops:
            for a in leaves:
                for b in lits + leaves:
                    if a is b:
                        continue
                    yes = 0
                    for k, (x, y) in enumerate(zip(a.sig, b.sig)):
                        if _CMP[op](x, y):
                            yes |= 1 << k
                    if yes in (0, full):
                        continue
                    e1 = next((e for e in ranked if e.mask & yes == yes), None)
                    e2 = next((e for e in ranked if e.mask & (full ^ yes) == full ^ yes), None)
                    if e1 is None or e2 is None:
                        continue
                    yield spy.If(spy.BinOp(op, a.expr, b.expr),
                                 (self._stmt(tgt, e1.expr),), (self._stmt(tgt, e2.expr),))

    # -- loops over collections outside the context -----------------------

    def loop_candidates(self, tgt, req, pre, patch, ctx, pts):
        fe = next((c for c in spy.conjuncts(req)
                   if isinstance(c, spy.Foreach) and tgt.name in c.collections), None)
        if fe is None or any(c in ctx.range for c in fe.collections):
            return
        taken = set(ctx.globals) | set(self.params) | {x for x, _ in ctx.bindings}
        for s in pre.trace:
            taken |= spy.names_in(s)
        mapping, bindings = {}, []
        for it, c in fe.bindings:
            name = spy.fresh_name(it, taken)
            taken.add(name)
            mapping[it] = name
            bindings.append((name, c))
        bindings = tuple(bindings)
        inner = ctx.extend(bindings)
        body_inv = spy.rename_inv(fe.body, mapping)
        atoms, consts = self.vocabulary((body_inv,), inner, [x for x, _ in bindings])
        writer = mapping[next(it for it, c in fe.bindings if c == tgt.name)]
        req_imp = imp.translate_inv(req, ctx, check=False)
        leaves = atoms + consts
        levels = {1: leaves}
        order = list(leaves)
        for size in range(3, self.grammar.loop_size + 1, 2):
            levels[size] = [spy.BinOp(op, a, b) for op in self.grammar.ops
                            for ls in range(1, size - 1, 2)
                            for a in levels[ls] for b in levels[size - 1 - ls]]
            order.extend(levels[size])
        for e in order:
            loop = spy.For(bindings, (spy.Put(writer, e),))
            code = imp.translate_stmt((loop,), ctx, check=False)
            ok = True
            for values, sizes in pts:
                m = Machine(dict(values), sizes, self.int_range, self.dom.step_budget)
                try:
                    m.exec(code)
                except (Fault, NeedCell):
                    ok = False
                    break
                if not self._holds(req_imp, m.values, sizes):
                    ok = False
                    break
            if ok:
                yield loop

    # -- one target, counterexample guided -------------------------------

    def solve_target(self, tgt, req, pre, patch, ctx, facts, examples):
        rejected = set()
        for _ in range(self.grammar.max_rounds):
            self.stats["rounds"] += 1
            pts = self.points(examples, pre, patch, ctx)
            gen = (self.loop_candidates if tgt.kind == "loop" else self.candidates)(
                tgt, req, pre, patch, ctx, pts)
            progress = False
            for cand in gen:
                if cand in rejected:
                    continue
                self.stats["candidates"] += 1
                v = self.verify(pre, tuple(patch) + (cand,), req, ctx, facts)
                if v.is_valid:
                    return cand
                rejected.add(cand)
                if v.is_invalid:
                    examples.append(v.counterexample)
                    progress = True
                    break
            if not progress:
                return None
        return None

    # -- the base rule -----------------------------------------------------

    def targets(self, names, ctx) -> dict:
        owner = {c: x for x, c in ctx.bindings}
        out = {}
        for n in names:
            if n in owner:
                out[n] = _Target("put", owner[n], n)
            elif n in self.prog.collections:
                if self.grammar.allow_loops:
                    out[n] = _Target("loop", n, n)
            elif n in self.prog.scalars:
                out[n] = _Target("assign", n, n)
        return out

    def synth_base(self, pre: Pre, post, stale, frame, ctx, facts, path) -> tuple:
        """Patch ``{pre} patch {post}`` writing only stale candidates outside the frame."""
        frame_nodes = set(frame) | {ctx.get(f) for f in frame if f in ctx}
        cands = stale_candidates(stale, post, ctx)
        return self.solve(pre, post, cands - frame_nodes, stale, frame_nodes, ctx, facts, path,
                          blocked=bool(cands))

    def solve(self, pre: Pre, post, writable, sources, frame_nodes, ctx, facts, path,
              blocked=False) -> tuple:
        where = "/".join(str(p) for p in path)
        v = self.verify(pre, (), post, ctx, facts)
        if v.is_valid:
            return ()
        fail = dict(pre=pre, post=post, ctx=ctx, facts=facts, path=where)
        if v.is_unknown:
            raise SynthesisFailure("verification-unknown", **fail)
        examples = [v.counterexample]
        targets = self.targets(writable, ctx)
        fail["writable"] = sorted(targets)
        if not targets:
            reason = "frame-blocked" if blocked else "unsatisfiable"
            raise SynthesisFailure(reason, counterexample=v.counterexample, **fail)
        conjs = spy.conjuncts(post)
        nodes = [_nodes(c, ctx) for c in conjs]
        dist = _distances(sources, post, ctx)
        far = len(dist) + 1
        patch: tuple = ()
        settled: set = set()

        def open_(i):
            return (nodes[i] & set(targets)) - settled

        while True:
            pts = self.points(examples, pre, patch, ctx)
            bad = self.failing(conjs, pts, ctx)
            if not bad:
                v = self.verify(pre, patch, post, ctx, facts)
                if v.is_valid:
                    break
                if v.is_unknown:
                    raise SynthesisFailure("verification-unknown", **fail)
                examples.append(v.counterexample)
                continue
            i = min(bad, key=lambda k: (len(open_(k)), min((dist.get(n, far) for n in nodes[k]), default=far), k))
            # nearest first; among equals the least constrained (most derived) variable
            pending = sorted(open_(i), key=lambda n: (dist.get(n, far), sum(n in ns for ns in nodes), n))
            if not pending:
                if nodes[i] & settled:
                    reason = "grammar-exhausted"
                elif nodes[i] & frame_nodes:
                    reason = "frame-blocked"
                else:
                    reason = "unsatisfiable"
                raise SynthesisFailure(reason, counterexample=examples[-1], **fail)
            for t in pending:
                req = spy.conjoin([conjs[k] for k in range(len(conjs))
                                   if t in open_(k) and (open_(k) <= {t} or k == i)])
                stmt = self.solve_target(targets[t], req, pre, patch, ctx, facts, examples)
                if stmt is not None:
                    patch += (stmt,)
                    settled.add(t)
                    break
            else:
                raise SynthesisFailure("grammar-exhausted", counterexample=examples[-1], **fail)
        self.patches.append((where, patch))
        return patch

    # -- walking the procedure ---------------------------------------------

    def complete(self, goal: CompletionGoal, path, offset=0) -> tuple:
        out: list = []
        pre, stale, post, ctx = goal.pre, set(goal.stale), goal.post, goal.ctx

        def here():
            return list(path) + [offset + len(out)]

        for s in goal.block:
            if isinstance(s, (spy.Assign, spy.Put)):
                pre = pre.then(s)
                stale |= _written(s, ctx)
                out.append(s)
                continue
            if pre.trace or pre.base != post:
                # restore the invariant before a structured statement
                out.extend(self.synth_base(pre, post, stale, goal.frame, ctx, goal.facts, here()))
                pre, stale = Pre(post), set()
            at = here()
            if isinstance(s, spy.If):
                branches = []
                for cond, block, tag in ((s.cond, s.then, "then"),
                                         (spy.UnOp("!", s.cond), s.orelse, "else")):
                    sub = CompletionGoal(frozenset(), Pre(post, (AssumeCond(cond),)), block, post,
                                         ctx, goal.frame, goal.facts)
                    branches.append(self.complete(sub, at + [tag]))
                out.append(spy.If(s.cond, branches[0], branches[1]))
            else:
                loop = self.specialize(s, post, ctx, goal.frame, goal.facts, at)
                if loop is None:
                    pre = pre.then(s)
                    stale |= modified_vars((s,), ctx)
                    out.append(s)
                else:
                    out.append(loop)
        out.extend(self.synth_base(pre, post, stale, goal.frame, ctx, goal.facts, here()))
        return tuple(out)

    def specialize(self, loop: spy.For, post, ctx, frame, facts, path):
        """Widen ``loop`` over the collections the invariant relates to it."""
        conjs = spy.conjuncts(post)
        fes = [c for c in conjs if isinstance(c, spy.Foreach)]
        colls = set(loop.collections)
        picked: list = []
        grew = True
        while grew:
            grew = False
            for f in fes:
                if f not in picked and set(f.collections) & colls:
                    picked.append(f)
                    colls |= set(f.collections)
                    grew = True
        if not picked:
            return None
        picked.sort(key=conjs.index)
        rest = [c for c in conjs if c not in picked]
        psi = spy.conjoin(rest)
        if colls & ctx.range or _nodes(psi, ctx) & colls:
            return None
        # new collections, nearest to the loop first, then by first appearance
        appear = []
        for f in picked:
            for it, c in f.bindings:
                if c not in appear:
                    appear.append(c)
        dist = {c: 0 for c in loop.collections}
        frontier = list(loop.collections)
        while frontier:
            nxt = []
            for c in frontier:
                for f in picked:
                    if c in f.collections:
                        for d in f.collections:
                            if d not in dist:
                                dist[d] = dist[c] + 1
                                nxt.append(d)
            frontier = nxt
        new = sorted((c for c in appear if c not in loop.collections),
                     key=lambda c: (dist.get(c, len(appear)), appear.index(c)))
        # iterator names: the invariant's binder, disambiguated when shared
        binder: dict = {}
        for f in picked:
            for it, c in f.bindings:
                binder.setdefault(c, it)
        shared = {b for b in binder.values() if sum(1 for v in binder.values() if v == b) > 1}
        taken = (set(ctx.globals) | set(self.params) | {x for x, _ in ctx.bindings}
                 | spy.names_in(loop))
        ext = list(loop.bindings)
        for c in new:
            base = binder[c] + c[0] if binder[c] in shared else binder[c]
            name = spy.fresh_name(base, taken)
            taken.add(name)
            ext.append((name, c))
        by_coll = {c: x for x, c in ext}
        bodies = [spy.rename_inv(f.body, {it: by_coll[c] for it, c in f.bindings}) for f in picked]
        phi = spy.conjoin(bodies)
        scalars = set(self.prog.scalars) | set(self.params)
        phi_scalars = {n for n in free_vars(phi, ctx.extend(ext)) if n in scalars}
        if assigned_vars(loop.body) & phi_scalars:
            return None
        ext = tuple(ext)
        inner = ctx.extend(ext)
        facts = tuple(facts) + tuple(loop_guards(ext))
        target = spy.conjoin([phi, psi])
        inner_frame = frozenset(set(frame) | phi_scalars)
        b_pre: tuple = ()
        start = Pre(target)
        weak = weaken_prev(phi)
        if weak != phi:
            weak_pre = Pre(spy.conjoin([weak, psi]))
            touched = modified_vars(loop.body, inner)
            try:
                b_pre = self.synth_base(weak_pre, target, touched, inner_frame | touched, inner,
                                        facts, list(path) + ["body"])
            except SynthesisFailure:
                # the body itself has to re-establish the prev relations
                start = weak_pre
        body = self.complete(CompletionGoal(frozenset(), start, loop.body, target, inner,
                                            inner_frame, facts),
                             list(path) + ["body"], offset=len(b_pre))
        body = tuple(b_pre) + body
        used = spy.names_in(body)
        kept = tuple((x, c) for x, c in ext if (x, c) in loop.bindings or x in used)
        if len(kept) > len(loop.bindings):
            self.extended.append({"path": "/".join(str(p) for p in path),
                                  "bindings": [f"{x} in {c}" for x, c in kept]})
        return spy.For(kept, body)


# -- entry points -----------------------------------------------------------


def synth_patch(pre, post, writable, ctx: TranslationContext | None = None,
                dom: BoundedDomain | None = None, grammar: PatchGrammar | None = None,
                prog: spy.Program | None = None, params=(), facts=()) -> tuple:
    """Smallest patch (in grammar order) writing only ``writable`` with
    ``{pre} patch {post}`` valid.  ``pre`` is an invariant or a ``Pre``."""
    ctx = ctx or (TranslationContext.for_program(prog, params) if prog else TranslationContext())
    if prog is None:
        names = spy.names_in(post) | (spy.names_in(pre) if not isinstance(pre, Pre) else set())
        prog = spy.Program(tuple((n, "int") for n in sorted(names - {x for x, _ in ctx.bindings})))
    eng = _Engine(prog, params, dom, grammar)
    pre = pre if isinstance(pre, Pre) else Pre(pre)
    owner = {x: c for x, c in ctx.bindings}
    nodes = {owner.get(w, w) for w in writable}
    return eng.solve(pre, post, nodes, nodes, set(), ctx, facts, [])


def for_extend(loop: spy.For, inv, taken=()):
    """``loop`` with one more binding over a collection the invariant quantifies
    together with an iterated one; None when there is nothing to add."""
    have = set(loop.collections)
    taken = set(taken) | spy.names_in(loop)
    for c in spy.conjuncts(inv):
        if not isinstance(c, spy.Foreach) or not set(c.collections) & have:
            continue
        for it, coll in c.bindings:
            if coll not in have:
                return spy.For(loop.bindings + ((spy.fresh_name(it, taken), coll),), loop.body)
    return None


def merge(lhs: spy.Foreach, rhs: spy.Foreach) -> spy.Foreach:
    """One foreach equivalent to ``lhs && rhs``; shared collections use lhs's iterators."""
    mine = {c: it for it, c in lhs.bindings}
    if not set(mine) & set(rhs.collections):
        raise ValueError("merge needs foreach terms over a common collection")
    taken = spy.names_in(lhs) | spy.names_in(rhs)
    mapping, extra = {}, []
    for it, c in rhs.bindings:
        if c in mine:
            mapping[it] = mine[c]
        else:
            name = it if it not in {x for x, _ in lhs.bindings} else spy.fresh_name(it, taken)
            taken.add(name)
            mapping[it] = name
            extra.append((name, c))
    body = spy.rename_inv(rhs.body, mapping)
    return spy.Foreach(lhs.bindings + tuple(extra), spy.And(lhs.body, body))


def residual_unsatisfied(failure: SynthesisFailure, dom: BoundedDomain | None = None,
                         prog: spy.Program | None = None) -> bool:
    """Does the empty patch indeed fail the goal a failure gave up on?"""
    if failure.pre is None or failure.ctx is None:
        return False
    eng = _Engine(prog or spy.Program(), (), dom)
    v = eng.verify(failure.pre, (), failure.post, failure.ctx, failure.facts)
    return not v.is_valid


def extension_holds(original, patched, ctx: TranslationContext, dom: BoundedDomain | None = None,
                    prog: spy.Program | None = None, pre=None) -> Verdict:
    """Does ``patched`` end every run with the same values as ``original`` on what
    ``original`` modifies?  States are drawn from ``pre`` when given."""
    dom = dom or BoundedDomain()
    b1 = imp.translate_stmt(tuple(original), ctx, check=False)
    b2 = imp.translate_stmt(tuple(patched), ctx, check=False)
    parts = index_guards(ctx)
    if pre is not None:
        parts.append(imp.translate_inv(pre, ctx, check=False))
    guide = imp.conj(parts)
    known = set(ctx.globals)
    mods = {n for n in modified_vars(tuple(original), ctx) if not known or n in known}
    arrays = sorted(n for n in mods if ctx.is_collection(n))
    scalars = sorted(mods - set(arrays))

    def check(search, values):
        m1 = search.machine(values)
        try:
            m1.exec(b1)
        except Fault:
            return True  # nothing to extend when the original goes wrong
        m2 = search.machine(values)
        m2.exec(b2)
        for n in scalars:
            if m1.values.get(n) != m2.values.get(n):
                return False
        for a in arrays:
            for i in range(search.sizes.get(a, 0)):
                if m1.values.get((a, i)) != m2.values.get((a, i)):
                    return False
        return True

    return search(guide, check, _vocab_for(ctx, prog, guide, b1, b2), dom)


def _report_patches(eng: _Engine) -> list:
    out = []
    for path, block in sorted(eng.patches, key=lambda p: p[0]):
        if block:
            out.append({"path": path, "code": pretty_print(block).strip(),
                        "ast_size": spy.ast_size(block)})
    return out


def enforce_procedure(prog: spy.Program, name: str, dom: BoundedDomain | None = None,
                      grammar: PatchGrammar | None = None):
    """Complete one procedure; returns (procedure, PatchReport)."""
    dom = dom or BoundedDomain()
    proc = prog.procedure(name)
    params = [n for n, _ in proc.params]
    phi = prog.invariant()
    ctx = TranslationContext.for_program(prog, params)
    before = check_triple_spy(HoareGoal(phi, proc.body, phi, ctx), dom, prog)
    report = PatchReport(name, verdicts={"original": before.status})
    if before.is_valid or phi == spy.TRUE:
        report.verdicts.update(patched=before.status, extension="valid")
        report.stats = {"verifications": 1, "candidates": 0, "rounds": 0, "extended_loops": []}
        return proc, report
    eng = _Engine(prog, params, dom, grammar)
    frame = frozenset(modified_vars(proc.body, ctx))
    goal = CompletionGoal(frozenset(), Pre(phi), proc.body, phi, ctx, frame, ())
    body = eng.complete(goal, [])
    after = check_triple_spy(HoareGoal(phi, body, phi, ctx), dom, prog)
    ext = extension_holds(proc.body, body, ctx, dom, prog, pre=phi)
    report.verdicts.update(patched=after.status, extension=ext.status)
    report.patches = _report_patches(eng)
    report.stats = {**eng.stats, "verifications": eng.stats["verifications"] + 3,
                    "extended_loops": eng.extended}
    if not after.is_valid or not ext.is_valid:
        bad = after if not after.is_valid else ext
        raise SynthesisFailure("verification-unknown" if bad.is_unknown else "unsatisfiable",
                               pre=Pre(phi), post=phi, ctx=ctx, counterexample=bad.counterexample)
    return spy.Procedure(proc.name, proc.params, body), report


def enforce_program(prog: spy.Program, dom: BoundedDomain | None = None,
                    grammar: PatchGrammar | None = None, procedures=None):
    """Complete every (or the named) procedure; returns (program, [PatchReport])."""
    names = list(procedures) if procedures else [p.name for p in prog.procedures]
    reports = []
    for name in names:
        proc, report = enforce_procedure(prog, name, dom, grammar)
        prog = prog.replace_procedure(proc)
        reports.append(report)
    return prog, reports
