import copy

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import gen
from spyder_lang import imp
from spyder_lang import syntax as spy
from spyder_lang.analysis import TranslationContext, check_wellformed, depends, free_vars
from spyder_lang.frontend import parse_block, parse_inv, parse_program
from spyder_lang.imp import Fault, ImpState, StepBudgetExceeded, run_spyder
from spyder_lang.printer import inv_str, pretty_print, program_str
from spyder_lang.synth import SynthesisFailure, enforce_program, extension_holds, merge, residual_unsatisfied
from spyder_lang.verify import (
    BoundedDomain, HoareGoal, check_triple_spy, check_triple_structural, spy_implies, weaken_prev,
)

from test_analysis import reference_depends

SMALL = BoundedDomain(-2, 2, (1, 2))
CTX = TranslationContext.for_program(gen.PROGRAM)
QUICK = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
SLOW = settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def random_state(rng, n=None):
    n = n or rng.randint(1, 3)
    return ImpState({s: rng.randint(-3, 3) for s in gen.SCALARS},
                    {a: tuple(rng.randint(-3, 3) for _ in range(n)) for a in gen.ARRAYS})


# -- syntax ------------------------------------------------------------------------


@QUICK
@given(st.randoms(use_true_random=False))
def test_block_printing_round_trips(rng):
    b = gen.block(rng, 3)
    assert parse_block(pretty_print(b)) == b


@QUICK
@given(st.randoms(use_true_random=False))
def test_invariant_printing_round_trips(rng):
    inv = spy.conjoin([gen.foreach(rng), gen.scalar_inv(rng)])
    prog = spy.Program(gen.PROGRAM.datadecls, (inv,), (spy.Procedure("p", (), gen.block(rng)),))
    assert parse_program(program_str(prog)) == prog
    assert parse_inv(inv_str(inv)) == inv


@QUICK
@given(st.randoms(use_true_random=False))
def test_block_append_is_a_monoid(rng):
    a, b, c = (gen.block(rng, 1, (), 0) for _ in range(3))
    assert spy.block_append(spy.block_append(a, b), c) == spy.block_append(a, spy.block_append(b, c))
    assert spy.block_append((), a) == a == spy.block_append(a, ())


# -- analysis --------------------------------------------------------------------


def random_inv(rng, k):
    parts = []
    for _ in range(k):
        parts.append(gen.foreach(rng) if rng.random() < 0.4 else spy.Atom(gen.atom(rng, gen.scalar_leaves())))
    return spy.conjoin(parts)


@QUICK
@given(st.randoms(use_true_random=False), st.integers(1, 4))
def test_depends_is_the_closure(rng, k):
    inv = random_inv(rng, k)
    for x in gen.SCALARS + gen.ARRAYS:
        assert depends(x, inv) == reference_depends(x, inv)


@QUICK
@given(st.randoms(use_true_random=False))
def test_loop_iterators_are_never_free_in_outer_formulas(rng):
    inv = random_inv(rng, 2)
    loop = gen.stmt(rng, 3)
    if check_wellformed(inv, CTX) is None and check_wellformed((loop,), CTX) is None and isinstance(loop, spy.For):
        assert not set(loop.iterators) & free_vars(inv, CTX)


@QUICK
@given(st.randoms(use_true_random=False))
def test_wellformed_loops_never_assign_their_iterator(rng):
    it = rng.choice(("x", "y"))
    target = rng.choice(gen.SCALARS + (it,))
    loop = spy.For((("x", "xs"), ("y", "ys")), (spy.Assign(target, spy.IntLit(0)),))
    ok = check_wellformed((loop,), CTX) is None
    assert ok == (target in gen.SCALARS)


# -- the imp core ------------------------------------------------------------------


def zip_oracle(loop, state):
    """Direct lockstep interpretation of a For over equal-size collections."""
    arrays = {a: list(xs) for a, xs in state.arrays.items()}
    scalars = dict(state.scalars)
    owner = dict(loop.bindings)

    def ev(e, i):
        if isinstance(e, spy.IntLit):
            return e.value
        if isinstance(e, spy.Var):
            return scalars[e.name]
        if isinstance(e, spy.Val):
            return arrays[owner[e.iter]][i]
        if isinstance(e, spy.BinOp):
            a, b = ev(e.lhs, i), ev(e.rhs, i)
            return {"+": a + b, "-": a - b, "*": a * b, "=": a == b, "!=": a != b, "<": a < b,
                    "<=": a <= b, ">": a > b, ">=": a >= b}[e.op]
        raise AssertionError(e)

    def run(block, i):
        for s in block:
            if isinstance(s, spy.Put):
                arrays[owner[s.target]][i] = ev(s.rhs, i)
            elif isinstance(s, spy.Assign):
                scalars[s.target] = ev(s.rhs, i)
            else:
                run(s.then if ev(s.cond, i) else s.orelse, i)

    n = min(len(arrays[c]) for _, c in loop.bindings)
    for i in range(n):
        run(loop.body, i)
    return ImpState(scalars, {a: tuple(xs) for a, xs in arrays.items()})


@QUICK
@given(st.randoms(use_true_random=False))
def test_multi_binding_loops_run_in_lockstep(rng):
    loop = spy.For((("x", "xs"), ("y", "ys")), gen.block(rng, 2, ("x", "y")))
    prog = spy.Program(gen.PROGRAM.datadecls, (), (spy.Procedure("p", (), (loop,)),))
    state = random_state(rng)
    assert run_spyder(prog, "p", state) == zip_oracle(loop, state)


@QUICK
@given(st.randoms(use_true_random=False))
def test_execution_is_pure_and_terminates(rng):
    body = gen.block(rng, 3)
    state = random_state(rng)
    before = copy.deepcopy(state)
    code = imp.translate_stmt(body, CTX)
    try:
        imp.exec_stmt(code, state, steps=10_000)
    except StepBudgetExceeded:  # pragma: no cover - collection loops always terminate
        raise AssertionError("translated code exceeded the step budget")
    except Fault:
        pass
    assert state == before


# -- verification ---------------------------------------------------------------


def prev_inv(rng):
    acc = spy.Foreach((("x", "xs"), ("y", "ys")), spy.Atom(spy.BinOp(
        "=", spy.Val("y"), spy.BinOp("+", spy.Prev("y", spy.IntLit(rng.randint(-1, 1))), spy.Val("x")))))
    return spy.conjoin([acc, gen.scalar_inv(rng, rng.randint(0, 2))])


@QUICK
@given(st.randoms(use_true_random=False))
def test_weakening_prev_is_implied(rng):
    inv = prev_inv(rng) if rng.random() < 0.7 else random_inv(rng, 2)
    assert spy_implies(inv, weaken_prev(inv), CTX, SMALL, gen.PROGRAM).is_valid


@QUICK
@given(st.randoms(use_true_random=False))
def test_counterexamples_replay(rng):
    pre, body, post = gen.triple(rng)
    goal = HoareGoal(pre, body, post, CTX)
    v = check_triple_spy(goal, SMALL, gen.PROGRAM)
    assert v == check_triple_spy(goal, SMALL, gen.PROGRAM)
    if not v.is_invalid:
        return
    cex = v.counterexample
    assert imp.eval_expr(imp.translate_inv(pre, CTX), cex) is True
    try:
        out = imp.exec_stmt(imp.translate_stmt(body, CTX), cex)
    except Fault:
        return
    assert imp.eval_expr(imp.translate_inv(post, CTX), out) is False


@QUICK
@given(st.randoms(use_true_random=False))
def test_rule_based_derivations_are_sound(rng):
    goal = HoareGoal(*gen.triple(rng), CTX)
    if check_triple_structural(goal, SMALL, gen.PROGRAM).is_valid:
        assert check_triple_spy(goal, SMALL, gen.PROGRAM).is_valid


# -- synthesis ------------------------------------------------------------------


@QUICK
@given(st.randoms(use_true_random=False))
def test_merge_is_conjunction(rng):
    a = gen.foreach(rng, two=True)
    b = spy.Foreach((("u", "ys"),), spy.Atom(gen.atom(rng, [spy.Val("u"), spy.Var("a")])))
    m = merge(a, b)
    assert spy_implies(m, spy.And(a, b), CTX, SMALL, gen.PROGRAM).is_valid
    assert spy_implies(spy.And(a, b), m, CTX, SMALL, gen.PROGRAM).is_valid


@QUICK
@given(st.randoms(use_true_random=False))
def test_every_block_extends_itself(rng):
    body = gen.block(rng, 2)
    assert extension_holds(body, body, CTX, SMALL, gen.PROGRAM).is_valid


@SLOW
@given(st.randoms(use_true_random=False))
def test_enforcement_is_sound(rng):
    prog = gen.enforcement_problem(rng)
    try:
        new, _ = enforce_program(prog, SMALL)
    except SynthesisFailure as exc:
        assert residual_unsatisfied(exc, SMALL, prog)
        return
    phi = prog.invariant()
    ctx = TranslationContext.for_program(prog)
    body = new.procedures[0].body
    assert check_triple_spy(HoareGoal(phi, body, phi, ctx), SMALL, prog).is_valid
    assert extension_holds(prog.procedures[0].body, body, ctx, SMALL, prog, pre=phi).is_valid
