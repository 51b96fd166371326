#!/usr/bin/env python3
"""Run one named experiment and drop its artifacts under results/.

Usage: python3 scripts/run_experiment.py {sine,monotone-1d,lifted-2d,mixture-2d}
       [--seed S] [--out-dir DIR]
"""

import sys

from innerseries.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if not args:
        print(__doc__.strip(), file=sys.stderr)
        sys.exit(2)
    if "--out-dir" not in args:
        args += ["--out-dir", f"results/{args[0]}"]
    sys.exit(main(["experiment"] + args))
