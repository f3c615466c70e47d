"""Patching a procedure that breaks an invariant.

The budget sheet keeps weekly amounts equal to seven times the daily
ones.  The procedure only edits the daily column; the synthesizer adds the
missing update for the weekly column inside the same loop.
"""

# %%
from pathlib import Path

import spyder_lang
from spyder_lang.frontend import parse_program
from spyder_lang.imp import ImpState, run_spyder
from spyder_lang.printer import program_str
from spyder_lang.synth import enforce_program
from spyder_lang.verify import BoundedDomain

CORPUS = Path(spyder_lang.__file__).parent / "corpus"
prog = parse_program((CORPUS / "budget_ex1.spy").read_text())
print(program_str(prog))

# %% the unpatched procedure leaves weeks stale
state = ImpState({}, {"days": (1, -2, 3), "weeks": (7, -14, 21)})
print(run_spyder(prog, "adjustForCOLA", state, {"cola": 2}))

# %% synthesis: one patch, placed right after the write it depends on
patched, [report] = enforce_program(prog, BoundedDomain())
print(program_str(patched))
print(report.to_json())

# %% the patched program keeps weeks in step and leaves days as the programmer wrote them
after = run_spyder(patched, "adjustForCOLA", state, {"cola": 2})
print(after)
assert after.arrays["days"] == run_spyder(prog, "adjustForCOLA", state, {"cola": 2}).arrays["days"]
assert after.arrays["weeks"] == tuple(7 * d for d in after.arrays["days"])
