"""Check generated operators against toggle-graph enumeration on random models.

For every real-optional decision the variants of the fully simplified rule
must equal the valid toggle graphs, and must be a subset of the variants of
the unsimplified rule.

Usage: python3 scripts/oracle_sweep.py --models 200 --sizes 8 12 14
"""

import argparse
import sys

from cpco.fad import build_fad, enumerate_toggle_graphs
from cpco.generate import BASIC, FULL, generate_vb_rule, suite_decisions
from cpco.rules import flat_decision_sets, rule_name
from cpco.sat import UnsatisfiableModel, classify_features
from cpco.synth import random_feature_model


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--models", type=int, default=100, help="models per size")
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 12, 14])
    p.add_argument("--ctcs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    checked = failures = strict = 0
    for n in args.sizes:
        for k in range(args.models):
            fm = random_feature_model(args.seed + k, n=n, ctc_count=args.ctcs)
            try:
                cls = classify_features(fm)
            except UnsatisfiableModel:
                continue
            fad = build_fad(fm, cls)
            checked += 1
            for d in suite_decisions(cls):
                tg = {g.decisions for g in enumerate_toggle_graphs(fad, d)}
                full = flat_decision_sets(generate_vb_rule(fad, d, FULL))
                basic = flat_decision_sets(generate_vb_rule(fad, d, BASIC))
                strict += full < basic
                if full != tg or not full <= basic:
                    failures += 1
                    print(f"mismatch: n={n} seed={args.seed + k} {rule_name(fm, d)} "
                          f"full={len(full)} oracle={len(tg)} basic={len(basic)}")
    print(f"models={checked} mismatches={failures} rules-with-strict-reduction={strict}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
