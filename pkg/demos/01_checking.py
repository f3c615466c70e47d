"""Checking procedures against data invariants.

Walks through parsing a small program, translating it to the imperative
core, running it, and asking the bounded checker whether each procedure
keeps the declared invariant.
"""

# %%
from spyder_lang import imp
from spyder_lang.analysis import TranslationContext
from spyder_lang.frontend import parse_program
from spyder_lang.imp import ImpState, run_spyder
from spyder_lang.verify import BoundedDomain, HoareGoal, check_triple_spy, emit_smtlib

SOURCE = """
data xs: int[];

foreach x in xs: x.val > 0

procedure increment():
  for x in xs:
    x <- x.val + 1;

procedure decrement():
  for x in xs:
    x <- x.val - 1;
"""

prog = parse_program(SOURCE)
phi = prog.invariant()
print(prog.procedure("increment"))

# %% the imperative translation: a loop over indices, guarded by the collection size
print(imp.dump_procedure(prog, "increment"))

# %% running it on a concrete state
state = ImpState({}, {"xs": (1, 2, 3)})
print(run_spyder(prog, "increment", state))

# %% checking: increment keeps every element positive, decrement does not
dom = BoundedDomain(-4, 4, (1, 2, 3))
ctx = TranslationContext.for_program(prog)
for name in ("increment", "decrement"):
    goal = HoareGoal(phi, prog.procedure(name).body, phi, ctx)
    print(name, check_triple_spy(goal, dom, prog))

# %% the counterexample is a real state, so it can be replayed
goal = HoareGoal(phi, prog.procedure("decrement").body, phi, ctx)
cex = check_triple_spy(goal, dom, prog).counterexample
print("before", cex, "after", run_spyder(prog, "decrement", cex))

# %% the same triple as an SMT-LIB query, for an external solver
print(emit_smtlib(goal, prog)[:600])
