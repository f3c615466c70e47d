from pathlib import Path

import pytest

from spyder_lang import imp
from spyder_lang import syntax as spy
from spyder_lang.analysis import TranslationContext, WellFormednessError
from spyder_lang.frontend import parse_block, parse_inv, parse_program
from spyder_lang.imp import BinOp, IntLit, Var
from spyder_lang.verify import (
    BoundedDomain, HoareGoal, check_triple_imp, check_triple_spy, check_triple_structural,
    check_validity, emit_smtlib, spy_implies, weaken_prev,
)

CORPUS = Path(imp.__file__).parent / "corpus"
SMALL = BoundedDomain(-3, 3, (1, 2))


def v(n):
    return Var(n)


def test_validity_examples():
    assert check_validity(BinOp(">", BinOp("+", v("x"), IntLit(1)), v("x"))).is_valid
    bad = check_validity(BinOp(">", v("x"), IntLit(0)))
    assert bad.is_invalid
    assert bad.counterexample.scalars["x"] <= 0


def test_cola_invariant_has_a_model_and_a_countermodel():
    prog = parse_program((CORPUS / "budget_ex1.spy").read_text())
    g = TranslationContext.for_program(prog)
    inv = imp.translate_inv(prog.invariants[0], g)
    good = imp.ImpState({}, {"weeks": (7,), "days": (1,)})
    bad = imp.ImpState({}, {"weeks": (8,), "days": (1,)})
    assert imp.eval_expr(inv, good) is True
    assert imp.eval_expr(inv, bad) is False
    assert check_validity(inv).is_invalid


# -- Imp triples ----------------------------------------------------------------

SUM = BinOp("=", BinOp("+", v("l"), v("r")), IntLit(10))


def test_midpoint_moves_keep_the_sum():
    both = imp.seq(imp.Assign("l", BinOp("+", v("l"), IntLit(1))), imp.Assign("r", BinOp("-", v("r"), IntLit(1))))
    assert check_triple_imp(SUM, both, SUM, BoundedDomain(0, 10)).is_valid


def test_one_sided_move_breaks_the_sum():
    one = imp.Assign("l", BinOp("+", v("l"), IntLit(1)))
    out = check_triple_imp(SUM, one, SUM, BoundedDomain(0, 10))
    assert out.is_invalid
    cex = out.counterexample
    assert cex.scalars["l"] + cex.scalars["r"] == 10


def test_false_precondition_is_vacuous():
    f = imp.BoolLit(False)
    assert check_triple_imp(f, imp.Assign("x", IntLit(1)), f).is_valid


def test_counterexample_replays():
    one = imp.Assign("l", BinOp("+", v("l"), IntLit(1)))
    cex = check_triple_imp(SUM, one, SUM, BoundedDomain(0, 10)).counterexample
    assert imp.eval_expr(SUM, cex) is True
    assert imp.eval_expr(SUM, imp.exec_stmt(one, cex)) is False


# -- Spyder triples -------------------------------------------------------------


def goal_for(prog, proc):
    p = prog.procedure(proc)
    inv = spy.conjoin(prog.invariants)
    return HoareGoal(inv, p.body, inv, TranslationContext.for_program(prog, [n for n, _ in p.params]))


COLA_PATCHED = """\
data weeks: int[];
data days: int[];
foreach w in weeks, d in days: 7 * d.val = w.val
procedure adjustForCOLA(cola: int):
  for d in days, w in weeks:
    if (d > 0):
      d <- d * cola;
      w <- 7 * d.val;
"""


def test_patched_cola_loop_is_valid():
    prog = parse_program(COLA_PATCHED)
    assert check_triple_spy(goal_for(prog, "adjustForCOLA"), SMALL, prog).is_valid


def test_unpatched_cola_loop_is_invalid_and_replays():
    prog = parse_program((CORPUS / "budget_ex1.spy").read_text())
    goal = goal_for(prog, "adjustForCOLA")
    out = check_triple_spy(goal, SMALL, prog)
    assert out.is_invalid
    cex = out.counterexample
    g = goal.ctx
    pre, post = imp.translate_inv(goal.pre, g), imp.translate_inv(goal.post, g)
    assert imp.eval_expr(pre, cex) is True
    assert imp.eval_expr(post, imp.exec_stmt(imp.translate_stmt(goal.block, g), cex)) is False


def test_decrement_breaks_positivity():
    prog = parse_program((CORPUS / "decrement.spy").read_text())
    assert check_triple_spy(goal_for(prog, prog.procedures[0].name), SMALL, prog).is_invalid


def test_ill_formed_goal_is_an_error_not_invalid():
    g = TranslationContext((), frozenset({"a"}))
    with pytest.raises(WellFormednessError):
        check_triple_spy(HoareGoal(spy.TRUE, parse_block("a <- 1;"), spy.TRUE, g))


def test_spy_implies():
    g = TranslationContext((), frozenset({"a", "b"}))
    assert spy_implies(parse_inv("a = b && a > 0"), parse_inv("b > 0"), g).is_valid
    assert spy_implies(parse_inv("a > 0"), parse_inv("b > 0"), g).is_invalid


def test_verdicts_are_deterministic():
    prog = parse_program((CORPUS / "budget_ex2.spy").read_text())
    goal = goal_for(prog, prog.procedures[0].name)
    assert check_triple_spy(goal, SMALL, prog) == check_triple_spy(goal, SMALL, prog)


# -- weakening --------------------------------------------------------------------


def test_weaken_prev_examples():
    plain = parse_inv("7 * d.val = w.val", ["d", "w"])
    assert weaken_prev(plain) == plain
    assert weaken_prev(spy.TRUE) == spy.TRUE
    both = parse_inv("t.val = t.prev(0) + d.val && 7 * d.val = w.val", ["t", "d", "w"])
    assert weaken_prev(both) == spy.And(spy.TRUE, plain)


def test_weaken_prev_is_implied():
    prog = parse_program((CORPUS / "budget_ex2.spy").read_text())
    g = TranslationContext.for_program(prog)
    inv = spy.conjoin(prog.invariants)
    assert spy_implies(inv, weaken_prev(inv), g, SMALL, prog).is_valid


# -- the rule-based checker ---------------------------------------------------------


@pytest.mark.parametrize("text", [COLA_PATCHED, (CORPUS / "increment.spy").read_text(),
                                  (CORPUS / "product.spy").read_text()])
def test_structural_valid_implies_semantic_valid(text):
    prog = parse_program(text)
    goal = goal_for(prog, prog.procedures[0].name)
    structural = check_triple_structural(goal, SMALL, prog)
    assert structural.is_valid
    assert check_triple_spy(goal, SMALL, prog).is_valid


def test_structural_never_claims_invalid():
    prog = parse_program((CORPUS / "budget_ex1.spy").read_text())
    assert check_triple_structural(goal_for(prog, "adjustForCOLA"), SMALL, prog).is_unknown


# -- SMT-LIB ---------------------------------------------------------------------


def test_smtlib_shape():
    g = TranslationContext((), frozenset({"x"}))
    text = emit_smtlib(HoareGoal(spy.TRUE, (), spy.TRUE, g))
    assert "(check-sat)" in text
    assert "(assert" in text


def _solve(text):
    z3 = pytest.importorskip("z3")
    s = z3.Solver()
    s.from_string(text)
    return str(s.check())


def test_smtlib_trivial_triple_is_unsat():
    g = TranslationContext((), frozenset({"x"}))
    assert _solve(emit_smtlib(HoareGoal(spy.TRUE, (), spy.TRUE, g))) == "unsat"


def test_smtlib_midpoint_is_unsat():
    src = "data l: int;\ndata r: int;\nl + r = 10\nprocedure both():\n  l := l + 1;\n  r := r - 1;\n"
    prog = parse_program(src)
    assert _solve(emit_smtlib(goal_for(prog, "both"), prog)) == "unsat"


def test_smtlib_unpatched_cola_is_sat():
    prog = parse_program((CORPUS / "budget_ex1.spy").read_text())
    assert _solve(emit_smtlib(goal_for(prog, "adjustForCOLA"), prog)) == "sat"


def test_smtlib_patched_cola_is_unsat():
    prog = parse_program(COLA_PATCHED)
    assert _solve(emit_smtlib(goal_for(prog, "adjustForCOLA"), prog)) == "unsat"
