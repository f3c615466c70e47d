"""Synthesizing over the whole benchmark corpus.

Each row reports the invariant and procedure sizes, how many patch
locations were needed, their total size, and whether the patched program
and the extension check both came out valid.
"""

# %%
from pathlib import Path

import spyder_lang
from spyder_lang.cli import bench_file
from spyder_lang.synth import PatchGrammar
from spyder_lang.verify import BoundedDomain

CORPUS = Path(spyder_lang.__file__).parent / "corpus"
dom, grammar = BoundedDomain(), PatchGrammar()

# %%
rows = [bench_file(p, dom, grammar) for p in sorted(CORPUS.glob("*.spy"))]
for r in rows:
    status = "error" if "error" in r else "failed" if "failures" in r else "ok"
    print(f"{r['benchmark']:<18} locs={r.get('locs', '-'):<3} size={r.get('patch_size', '-'):<4} {status}")

# %% a benchmark with two related scalars shows a patch per procedure
row = next(r for r in rows if r["benchmark"] == "midpoint_2")
print(row)
