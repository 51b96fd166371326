#!/usr/bin/env python3
"""Run all four experiments, writing artifacts to results/<name>/ and printing
one pass/fail line per criterion.  Exit code 0 iff everything passed."""

import sys

from innerseries.cli import main
from innerseries.experiments import EXPERIMENT_NAMES

if __name__ == "__main__":
    worst = 0
    for name in EXPERIMENT_NAMES:
        print(f"=== {name} ===")
        worst = max(worst, main(["experiment", name, "--out-dir", f"results/{name}"]))
    sys.exit(worst)
