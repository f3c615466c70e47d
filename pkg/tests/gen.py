"""Random well-formed Spyder terms for the property and acceptance suites.

Every generator takes a ``random.Random`` so runs are reproducible from a
seed and hypothesis can drive them through ``st.randoms()``.
"""

from spyder_lang import syntax as spy

SCALARS = ("a", "b", "c")
ARRAYS = ("xs", "ys")
PROGRAM = spy.Program(tuple((n, "int") for n in SCALARS) + tuple((n, "int[]") for n in ARRAYS))


def lit(k):
    return spy.IntLit(k)


def expr(rng, leaves, depth=2):
    if depth == 0 or rng.random() < 0.4:
        if rng.random() < 0.35:
            return lit(rng.randint(-2, 2))
        return rng.choice(leaves)
    op = rng.choice(("+", "-", "*", "+", "-"))
    return spy.BinOp(op, expr(rng, leaves, depth - 1), expr(rng, leaves, depth - 1))


def atom(rng, leaves, depth=1):
    op = rng.choice(("=", "<", "<=", "!=", ">="))
    return spy.BinOp(op, expr(rng, leaves, depth), expr(rng, leaves, depth))


def scalar_leaves(names=SCALARS):
    return [spy.Var(n) for n in names]


def foreach(rng, two=None):
    """A foreach over xs (and maybe ys) relating elements to scalars."""
    two = rng.random() < 0.5 if two is None else two
    binds = (("x", "xs"), ("y", "ys")) if two else (("x", "xs"),)
    leaves = [spy.Val(x) for x, _ in binds] + scalar_leaves(SCALARS[:1])
    if two and rng.random() < 0.6:
        body = spy.BinOp("=", spy.Val("y"), expr(rng, [spy.Val("x"), lit(1), lit(2)], 1))
    else:
        body = atom(rng, leaves)
    return spy.Foreach(binds, spy.Atom(body))


def scalar_inv(rng, k=None):
    k = rng.randint(0, 2) if k is None else k
    return spy.conjoin([spy.Atom(atom(rng, scalar_leaves())) for _ in range(k)])


def stmt(rng, depth=2, iters=()):
    leaves = scalar_leaves() + [spy.Val(x) for x in iters]
    roll = rng.random()
    if iters and roll < 0.55:
        return spy.Put(rng.choice(iters), expr(rng, leaves))
    if depth > 1 and roll < 0.7:
        return spy.If(atom(rng, leaves), block(rng, depth - 1, iters, 1), block(rng, depth - 1, iters, 0))
    if depth > 1 and not iters and roll < 0.85:
        if rng.random() < 0.5:
            binds = (("x", "xs"), ("y", "ys"))
        else:
            binds = (("x", "xs"),)
        return spy.For(binds, block(rng, depth - 1, tuple(x for x, _ in binds), 1))
    return spy.Assign(rng.choice(SCALARS), expr(rng, leaves))


def block(rng, depth=2, iters=(), least=1):
    return tuple(stmt(rng, depth, iters) for _ in range(rng.randint(least, 2)))


def triple(rng):
    """(pre, block, post) over PROGRAM; biased toward derivable triples."""
    shape = rng.random()
    if shape < 0.45:
        # loop over a quantified invariant
        inv = spy.conjoin([foreach(rng), scalar_inv(rng, rng.randint(0, 1))])
        two = len(spy.conjuncts(inv)[0].bindings) == 2
        binds = (("x", "xs"), ("y", "ys")) if two else (("x", "xs"),)
        body = block(rng, 2, tuple(x for x, _ in binds), 1)
        return inv, (spy.For(binds, body),), inv
    pre = scalar_inv(rng, rng.randint(1, 2))
    body = block(rng, 2)
    if shape < 0.7:
        return pre, body, pre
    if shape < 0.85 and isinstance(body[-1], spy.Assign):
        s = body[-1]
        # the last assignment's own effect, stated as a post
        if s.target not in spy.names_in(s.rhs):
            return pre, body, spy.Atom(spy.BinOp("=", spy.Var(s.target), s.rhs))
    return pre, body, scalar_inv(rng, 1)


# -- enforcement problems -----------------------------------------------------

ENF_SCALARS = ("a", "b", "c")
ENF_ARRAYS = ("xs", "ys", "zs")


def _linear(rng, target, sources):
    """``target = k * s + m`` style relation over the sources."""
    e = spy.Var(sources[0]) if isinstance(sources[0], str) else sources[0]
    k = rng.choice((1, 1, 2, -1, 7))
    if k != 1:
        e = spy.BinOp("*", lit(k), e)
    for s in sources[1:]:
        e = spy.BinOp(rng.choice(("+", "-")), e, spy.Var(s) if isinstance(s, str) else s)
    m = rng.randint(-2, 2)
    if m:
        e = spy.BinOp("+", e, lit(m))
    return spy.BinOp("=", target, e)


def enforcement_problem(rng):
    """A program with invariants and one procedure that may break them."""
    invs, decls, body = [], [], []
    kind = rng.random()
    if kind < 0.4:
        decls = [(n, "int") for n in ENF_SCALARS]
        invs.append(spy.Atom(_linear(rng, spy.Var("b"), ["a"])))
        if rng.random() < 0.5:
            invs.append(spy.Atom(_linear(rng, spy.Var("c"), ["a", "b"][: rng.randint(1, 2)])))
        for _ in range(rng.randint(1, 2)):
            tgt = rng.choice(("a", "a", "b", "c"))
            rhs = spy.BinOp(rng.choice(("+", "-")), spy.Var(tgt), lit(rng.randint(1, 3)))
            if rng.random() < 0.3:
                rhs = lit(rng.randint(-2, 2))
            body.append(spy.Assign(tgt, rhs))
        if rng.random() < 0.3:
            body = [spy.If(spy.BinOp(">", spy.Var("a"), lit(0)), tuple(body), ())]
    else:
        decls = [(n, "int[]") for n in ENF_ARRAYS] + [("k", "int")]
        invs.append(spy.Foreach((("x", "xs"), ("y", "ys")),
                                spy.Atom(_linear(rng, spy.Val("y"), [spy.Val("x")]))))
        extra = rng.random()
        if extra < 0.3:
            invs.append(spy.Foreach((("y", "ys"), ("z", "zs")),
                                    spy.Atom(_linear(rng, spy.Val("z"), [spy.Val("y")]))))
        elif extra < 0.5:
            invs.append(spy.Foreach((("x", "xs"), ("z", "zs")),
                                    spy.Atom(spy.BinOp("=", spy.Val("z"),
                                                       spy.BinOp("+", spy.Prev("z", lit(0)), spy.Val("x"))))))
        it, coll = rng.choice((("x", "xs"), ("x", "xs"), ("y", "ys")))
        upd = rng.choice((spy.BinOp("+", spy.Val(it), lit(rng.randint(1, 2))),
                          spy.BinOp("*", spy.Val(it), spy.Var("k")),
                          spy.BinOp("-", spy.Val(it), spy.Var("k"))))
        inner = (spy.Put(it, upd),)
        if rng.random() < 0.4:
            inner = (spy.If(spy.BinOp(">", spy.Val(it), lit(0)), inner, ()),)
        body.append(spy.For(((it, coll),), inner))
        if rng.random() < 0.3:
            body.append(spy.Assign("k", spy.BinOp("+", spy.Var("k"), lit(1))))
    proc = spy.Procedure("p", (), tuple(body))
    return spy.Program(tuple(decls), tuple(invs), (proc,))
