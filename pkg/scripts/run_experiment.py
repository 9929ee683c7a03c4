"""Run both search modes on a model and compare their final hypervolumes.

Thin wrapper over ``cpco optimize`` followed by ``cpco compare``.

Usage: python3 scripts/run_experiment.py --runs 10 --evaluations 5000 --output-dir results
"""

import argparse
import os
import sys
from importlib.resources import files

from cpco.cli import main as cli


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--model", default=str(files("cpco") / "data" / "mobilemedia.fm"))
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--evaluations", type=int, default=5000)
    p.add_argument("--attribute-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output-dir", default="results")
    args = p.parse_args()
    code = cli(["optimize", "--model", args.model, "--runs", str(args.runs),
                "--population", str(args.population), "--evaluations", str(args.evaluations),
                "--attribute-seed", str(args.attribute_seed), "--seed", str(args.seed),
                "--jobs", str(args.jobs), "--output-dir", args.output_dir])
    if code:
        return code
    out = os.path.join(args.output_dir, "comparison.csv")
    return cli(["compare", os.path.join(args.output_dir, "cpco"),
                os.path.join(args.output_dir, "repair-baseline"), "--out", out])


if __name__ == "__main__":
    sys.exit(main())
