"""
Running the batch pipeline
==========================

Writes two cohorts of landmark files to a temporary directory, runs
``facemorph analyze`` on them and shows the exported table.
"""

import tempfile
from pathlib import Path

from facemorph.cli import main
from facemorph.synthetic import synthetic_cohorts, write_landmark_cohort

root = Path(tempfile.mkdtemp())
a, b = synthetic_cohorts(30, 25, seed=7)
write_landmark_cohort(a, root / "pths")
write_landmark_cohort(b, root / "control")

code = main(["analyze", "--cohort-a", str(root / "pths"), "--cohort-b", str(root / "control"),
             "--landmarks-only", "--out", str(root / "out")])
print("exit code", code)
print((root / "out" / "table1.csv").read_text())
print(sorted(p.name for p in (root / "out").iterdir()))
