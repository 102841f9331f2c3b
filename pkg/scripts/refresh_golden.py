"""Regenerate tests/golden/<name> from the bundled scenarios.

Run only after an intended change to the numerics, and review the diff.
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

from superlattice.cli import main

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"
SCENARIOS = ("fig2", "fig4", "fig8")


def refresh(names=SCENARIOS) -> int:
    for name in names:
        out = GOLDEN / name
        if out.exists():
            shutil.rmtree(out)
        code = main(["simulate", name, "--out", str(out)])
        if code != 0:
            print(f"[x] {name}: exit {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    raise SystemExit(refresh(sys.argv[1:] or SCENARIOS))
