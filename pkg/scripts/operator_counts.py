"""Operator counts and generation times for the bundled models.

Usage: python3 scripts/operator_counts.py [MODEL ...]   (default: mobilemedia wget)
"""

import argparse
import time

from cpco.fad import build_fad
from cpco.fm import bundled_model
from cpco.generate import generate_suite
from cpco.sat import classify_features, count_models, to_cnf


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("models", nargs="*", default=["mobilemedia", "wget"])
    p.add_argument("--limit", type=float, default=1, help="variants per rule")
    args = p.parse_args()
    names = args.models
    print(f"{'model':<18}{'features':>9}{'core':>6}{'ctcs':>6}{'configs':>10}{'cpcos':>7}{'variants':>9}{'seconds':>9}")
    for name in names:
        fm = bundled_model(name)
        t0 = time.perf_counter()
        cls = classify_features(fm)
        suite = generate_suite(fm, cls, build_fad(fm, cls), limit=args.limit)
        seconds = time.perf_counter() - t0
        variants = sum(len(v) for v in suite.variants.values())
        print(f"{name:<18}{fm.size:>9}{len(cls.core):>6}{len(fm.requires) + len(fm.excludes):>6}"
              f"{count_models(to_cnf(fm)):>10}{len(suite):>7}{variants:>9}{seconds:>9.3f}")


if __name__ == "__main__":
    main()
