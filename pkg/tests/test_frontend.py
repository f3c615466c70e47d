from pathlib import Path

import pytest

from spyder_lang import syntax as spy
from spyder_lang.frontend import (
    SourceError, indent_to_braces, load_program, parse_block, parse_expr, parse_inv,
    parse_program, resolve_names,
)
from spyder_lang.printer import pretty_print, program_str

CORPUS = sorted((Path(spy.__file__).parent / "corpus").glob("*.spy"))

FIG3A = """\
data weeks: int[];
data days: int[];

foreach w in weeks, d in days:
  7 * d.val = w.val

procedure adjustForCOLA(cola: int):
  for d in days:
    if (d > 0):
      d <- d * cola;
"""


def test_fig3a_parses_to_one_foreach_with_two_bindings():
    p = parse_program(FIG3A)
    assert p.datadecls == (("weeks", "int[]"), ("days", "int[]"))
    [inv] = p.invariants
    assert isinstance(inv, spy.Foreach)
    assert inv.bindings == (("w", "weeks"), ("d", "days"))
    assert inv.body == spy.Atom(spy.BinOp("=", spy.BinOp("*", spy.IntLit(7), spy.Val("d")), spy.Val("w")))


def test_bare_iterator_means_its_value():
    body = parse_program(FIG3A).procedure("adjustForCOLA").body
    loop = body[0]
    assert loop.body[0].cond == spy.BinOp(">", spy.Val("d"), spy.IntLit(0))
    assert loop.body[0].then == (spy.Put("d", spy.BinOp("*", spy.Val("d"), spy.Var("cola"))),)


def test_empty_file():
    p = parse_program("")
    assert p.datadecls == () and p.invariants == () and p.procedures == ()


def test_single_line_for_with_put():
    p = parse_program("data xs: int[];\nprocedure inc():\n  for x in xs: x <- x.val + 1;\n")
    [loop] = p.procedure("inc").body
    assert loop.bindings == (("x", "xs"),)
    assert loop.body == (spy.Put("x", spy.BinOp("+", spy.Val("x"), spy.IntLit(1))),)


def test_braces_and_colons_give_the_same_tree():
    braced = ("data xs: int[];\nforeach x in xs { x.val > 0 };\n"
              "procedure inc() { for x in xs { x <- x.val + 1; } }\n")
    colon = "data xs: int[];\nforeach x in xs: x.val > 0\nprocedure inc():\n  for x in xs:\n    x <- x.val + 1;\n"
    assert parse_program(braced) == parse_program(colon)


def test_assignment_spellings_and_equality():
    a = parse_block("x := 1; y = 2;")
    assert a == (spy.Assign("x", spy.IntLit(1)), spy.Assign("y", spy.IntLit(2)))
    assert parse_expr("a == b") == parse_expr("a = b")


def test_colours_desugar_to_integers():
    assert parse_expr("red") == spy.IntLit(1)
    assert parse_expr("black") == spy.IntLit(0)


def test_precedence():
    e = parse_expr("a + b * c < d && e ==> f")
    assert e.op == "==>"
    assert e.lhs.op == "&&"
    assert e.lhs.lhs == spy.BinOp("<", spy.BinOp("+", spy.Var("a"), spy.BinOp("*", spy.Var("b"), spy.Var("c"))),
                                  spy.Var("d"))


def test_implication_is_right_associative():
    e = parse_expr("a ==> b ==> c")
    assert e.rhs == spy.BinOp("==>", spy.Var("b"), spy.Var("c"))


def test_prev_idx_size():
    e = parse_expr("t.prev(0) + t.idx + ts.size", iterators=["t"])
    assert spy.Prev("t", spy.IntLit(0)) in list(spy.walk_expr(e))
    assert spy.Idx("t") in list(spy.walk_expr(e))
    assert spy.Size("ts") in list(spy.walk_expr(e))


def test_exists_only_through_internal_parser():
    assert isinstance(parse_inv("exists k { k = x }"), spy.Exists)
    with pytest.raises(SourceError):
        parse_program("data x: int;\nexists k { k = x }\n")


def test_declared_sizes():
    p = parse_program("data xs: int[3];\ndata ys: int[];\n")
    assert p.size_map == {"xs": 3}


def test_put_print_form():
    assert pretty_print((spy.Put("w", spy.BinOp("*", spy.IntLit(7), spy.Val("d"))),)).strip() == "w <- 7 * d.val;"
    assert pretty_print(()) == ""


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_corpus_round_trip(path):
    p = parse_program(path.read_text())
    assert parse_program(program_str(p)) == p
    resolve_names(p)


# -- errors -------------------------------------------------------------------


def test_undeclared_collection_is_a_resolve_error():
    with pytest.raises(SourceError) as err:
        load_program("data xs: int[];\nprocedure p():\n  for z in zs: z <- 1;\n")
    assert err.value.kind == "resolve"
    assert "zs" in err.value.format("f.spy")
    assert err.value.format("f.spy").startswith("f.spy:2:")


def test_parse_error_location():
    with pytest.raises(SourceError) as err:
        parse_program("data x: int;\nprocedure p() { x := ; }\n")
    assert err.value.kind == "parse"
    assert err.value.line == 2


def test_lex_error():
    with pytest.raises(SourceError) as err:
        parse_program("data x: int;\nx = 1 $ 2\n")
    assert err.value.kind == "lex"


def test_duplicate_declaration():
    with pytest.raises(SourceError):
        load_program("data x: int;\ndata x: int[];\n")


def test_iterator_out_of_scope():
    with pytest.raises(SourceError):
        load_program("data xs: int[];\ndata y: int;\nprocedure p():\n  for x in xs: y := 1;\n  y := x.val;\n")


def test_same_binder_in_foreach_and_for_resolves_independently():
    rp = load_program("data xs: int[];\nforeach x in xs: x.val > 0\n"
                      "procedure p():\n  for x in xs: x <- x.val + 1;\n")
    assert rp.program.invariants[0].bindings == rp.program.procedure("p").body[0].bindings


def test_indent_pre_pass_keeps_lines():
    out = indent_to_braces("procedure p():\n  x := 1;\n\n  y := 2;\n")
    assert len(out.splitlines()) == 4
    assert out.splitlines()[0].endswith("{")
