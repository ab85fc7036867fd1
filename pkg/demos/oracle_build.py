"""Build a toy oracle and check the equivalence word by word.

    python3 demos/oracle_build.py [seed]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from switchlab.oracle import OracleParams, build_oracle

cfg = json.loads((Path(__file__).resolve().parents[1] / "configs" / "oracle_tiny.json").read_text())
params = OracleParams.from_json(cfg["oracle"])
seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0

b = build_oracle(params, seed)
print(f"space: {len(b.table.space)} bits; round-1 tries {b.first.certification.tries}, "
      f"round-2 tries {b.second.certification.tries}")
for e in b.table.stage_log:
    print(f"  {e.stage:<14} sets {len(e.assignments):>4} bits  {dict(e.info)}")
for a, maps in b.second.designated_maps().items():
    print(f"S({a}): {maps}")
for r in b.report.rows:
    print(f"a={r.a}: formula {r.phi}  forall-exists-forall {r.target}  {'ok' if r.ok else 'MISMATCH'}")
