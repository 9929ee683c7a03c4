"""Command-line entry point: analyze, gen, flatten, optimize, compare, hv and exports.

Exit status is 0 on success, 1 on bad input and 2 when a generation budget
cut the operator suite short.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

from .fad import FeatureDecision, build_fad
from .fm import FeatureModel, FeatureModelError, load_feature_model
from .generate import BASIC, FULL, GenerationOptions, generate_suite, generate_vb_rule
from .metrics import HvConfig, a12, hypervolume, mann_whitney_u, pareto_front, summarize_runs, SUMMARY_COLUMNS
from .rules import flatten
from .sat import UnsatisfiableModel, classify_features, count_models, dimacs_for_model, to_cnf
from .search import MODES, OBJECTIVE_NAMES, SearchParams, generate_attributes, ibea_run
from .suite_io import load_suite, log_csv, save_suite

log = logging.getLogger("cpco")

EXIT_OK, EXIT_INPUT, EXIT_TRUNCATED = 0, 1, 2
HV_DIMS = (0, 1, 2)


class UsageError(Exception):
    """Bad arguments or inconsistent input files."""


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    model_path: str = ""
    attribute_seed: int = 0
    runs: int = 30
    population: int = 100
    evaluations: int = 5000
    variant_limit: int = 1
    time_budget_s: float = 600.0
    modes: list[str] = field(default_factory=lambda: list(MODES))
    output_dir: str = "results"
    seed: int = 0
    suite_path: str = ""
    jobs: int = 1

    def validate(self) -> None:
        if self.runs < 1:
            raise UsageError("runs must be at least 1")
        if not self.model_path or not Path(self.model_path).is_file():
            raise UsageError(f"model file not found: {self.model_path!r}")
        if self.suite_path and not Path(self.suite_path).is_file():
            raise UsageError(f"suite file not found: {self.suite_path!r}")
        bad = [m for m in self.modes if m not in MODES]
        if bad or not self.modes:
            raise UsageError(f"unknown modes {bad}; choose from {', '.join(MODES)}")
        SearchParams(self.population, self.evaluations)  # raises on bad sizes


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = (x.strip() for x in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def build_config(file_values: dict[str, str], overrides: dict[str, object]) -> ExperimentConfig:
    cfg = ExperimentConfig()
    known = {f.name: f for f in fields(ExperimentConfig)}
    for key, raw in list(file_values.items()) + [(k, v) for k, v in overrides.items() if v is not None]:
        if key not in known:
            raise UsageError(f"unknown configuration key {key!r}")
        current = getattr(cfg, key)
        try:
            if isinstance(current, list):
                value = [m.strip() for m in raw.split(",") if m.strip()] if isinstance(raw, str) else list(raw)
            elif isinstance(current, bool):
                value = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(raw)
            elif isinstance(current, float):
                value = float(raw)
            else:
                value = str(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
        setattr(cfg, key, value)
    return cfg


# ---------------------------------------------------------------------------
# commands


def _limit(text: str) -> float | int:
    if text in ("inf", "all"):
        return float("inf")
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("limit must be >= 1")
    return value


def cmd_analyze(args) -> int:
    fm = load_feature_model(args.model)
    t0 = time.perf_counter()
    cnf = to_cnf(fm)
    cls = classify_features(fm, cnf)
    seconds = time.perf_counter() - t0
    groups = sum(1 for g in fm.group_kind if g.value != "none")
    ctcs = len(fm.requires) + len(fm.excludes)
    configs = count_models(cnf)
    shown = f"> {args.cap}" if args.cap is not None and configs > args.cap else str(configs)
    parts = [f"features={fm.size}"]
    if groups:
        parts.append(f"groups={groups}")
    parts.append(f"core={len(cls.core)}")
    if ctcs:
        parts.append(f"ctcs={ctcs}")
    parts.append(f"configs={shown}")
    print(" ".join(parts))
    print(f"dead={len(cls.dead)} real-optional={len(cls.real_optional)} "
          f"cpco-capacity={2 * len(cls.real_optional)} classify-seconds={seconds:.4f}")
    return EXIT_OK


def _options(args) -> GenerationOptions:
    return BASIC if getattr(args, "basic", False) else FULL


def cmd_gen(args) -> int:
    fm = load_feature_model(args.model)
    t0 = time.perf_counter()
    cls = classify_features(fm)
    fad = build_fad(fm, cls)
    suite = generate_suite(fm, cls, fad, limit=args.limit, time_budget=args.budget,
                           seed=args.seed, options=_options(args))
    seconds = time.perf_counter() - t0
    save_suite(suite, args.out)
    log_path = args.log or str(Path(args.out).with_suffix(".log.csv"))
    Path(log_path).write_text(log_csv(suite.log), encoding="utf-8")
    variants = sum(len(v) for v in suite.variants.values())
    print(f"rules={len(suite)} variants={variants} missing={len(suite.missing)} seconds={seconds:.3f}")
    if suite.truncated:
        print(f"time budget exhausted: {len(suite.missing)} rules missing", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


def _find_decision(fm: FeatureModel, name: str) -> FeatureDecision:
    if "_" not in name:
        raise UsageError(f"rule name must look like Act_<Feature> or De_<Feature>: {name!r}")
    kind, feature = name.split("_", 1)
    if kind not in ("Act", "De") or feature not in fm.index:
        raise UsageError(f"unknown rule {name!r}")
    return FeatureDecision(fm.id(feature), kind == "Act")


def cmd_flatten(args) -> int:
    fm = load_feature_model(args.model)
    cls = classify_features(fm)
    d = _find_decision(fm, args.rule)
    if d.feature not in cls.real_optional:
        raise UsageError(f"{fm.names[d.feature]} is not real-optional")
    rule = generate_vb_rule(build_fad(fm, cls), d, _options(args))
    variants = flatten(rule, limit=args.limit, seed=args.seed)
    for v in variants:
        print(f"{v.id} {v.describe(fm)}")
    return EXIT_OK


def _run_one(job):
    fm, cnf, cls, attrs, suite, params = job
    result = ibea_run(fm, cnf, cls, attrs, suite, params)
    return params.mode, params.seed, result.checkpoints


def cmd_optimize(args) -> int:
    overrides = {k: getattr(args, k) for k in (
        "model_path", "attribute_seed", "runs", "population", "evaluations", "variant_limit",
        "time_budget_s", "modes", "output_dir", "seed", "suite_path", "jobs")}
    cfg = build_config(read_config_file(args.config) if args.config else {}, overrides)
    cfg.validate()
    fm = load_feature_model(cfg.model_path)
    cnf = to_cnf(fm)
    cls = classify_features(fm, cnf)
    attrs = generate_attributes(fm, cfg.attribute_seed)
    suite = None
    if "cpco" in cfg.modes:
        if cfg.suite_path:
            suite = load_suite(cfg.suite_path, fm)
        else:
            suite = generate_suite(fm, cls, build_fad(fm, cls), limit=cfg.variant_limit,
                                   time_budget=cfg.time_budget_s, seed=cfg.seed)
        if not suite.variants:
            raise UsageError("operator suite is empty")
    jobs = [(fm, cnf, cls, attrs, suite if mode == "cpco" else None,
             SearchParams(cfg.population, cfg.evaluations, seed=cfg.seed + k, mode=mode))
            for mode in cfg.modes for k in range(cfg.runs)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    # one normalization for every run of this invocation
    union = [p[: len(HV_DIMS)] for _, _, cps in results for cp in cps for p in cp.front]
    hv_cfg = HvConfig.from_reference_front(pareto_front(union), HV_DIMS) if union else None
    out = Path(cfg.output_dir)
    per_mode: dict[str, list] = {}
    for mode, seed, cps in results:
        folder = out / mode
        folder.mkdir(parents=True, exist_ok=True)
        rows = []
        for cp in cps:
            hv = hypervolume([p[: len(HV_DIMS)] for p in cp.front], hv_cfg) if hv_cfg else 0.0
            rows.append({"NFE": cp.nfe, "HV": hv, "TimeSeconds": cp.seconds, "ValidRatio": cp.valid_ratio})
        run = seed - cfg.seed
        _write_csv(folder / f"run_{run:03d}.csv", ["NFE", "HV", "TimeSeconds", "ValidRatio"], rows)
        _write_csv(folder / f"run_{run:03d}_front.csv", list(OBJECTIVE_NAMES),
                   [dict(zip(OBJECTIVE_NAMES, p)) for p in cps[-1].front])
        per_mode.setdefault(mode, []).append(rows)
    for mode, runs in per_mode.items():
        _write_csv(out / mode / "summary.csv", list(SUMMARY_COLUMNS), summarize_runs(runs))
        final = [r[-1] for r in runs]
        print(f"{mode}: runs={len(runs)} hv-median={statistics.median(r['HV'] for r in final):.6f} "
              f"valid-ratio-min={min(row['ValidRatio'] for r in runs for row in r):.3f}")
    manifest = asdict(cfg)
    manifest.update(kappa=SearchParams().kappa, crossover_rate=SearchParams().crossover_rate,
                    hv_dimensions=list(HV_DIMS), hv_reference_point=1.1)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})


def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _read_front(path: Path) -> list[tuple[float, ...]]:
    return [tuple(float(r[c]) for c in OBJECTIVE_NAMES) for r in _read_csv(path)]


def _run_files(folder: Path) -> list[Path]:
    runs = sorted(p for p in folder.glob("run_*.csv") if not p.name.endswith("_front.csv"))
    if not runs:
        raise UsageError(f"no run files in {folder}")
    return runs


def compare_dirs(dir_a: Path, dir_b: Path) -> dict[str, float]:
    """Final-front HV statistics of two result folders under a shared normalization."""
    runs_a, runs_b = _run_files(dir_a), _run_files(dir_b)
    grids = {tuple(r["NFE"] for r in _read_csv(p)) for p in runs_a + runs_b}
    if len(grids) != 1:
        raise UsageError("result folders have different NFE grids")
    fronts_a = [_read_front(p.with_name(p.stem + "_front.csv")) for p in runs_a]
    fronts_b = [_read_front(p.with_name(p.stem + "_front.csv")) for p in runs_b]
    union = [p[: len(HV_DIMS)] for f in fronts_a + fronts_b for p in f]
    if not union:
        raise UsageError("no valid solutions in either folder")
    cfg = HvConfig.from_reference_front(pareto_front(union), HV_DIMS)
    hv_a = [hypervolume([p[: len(HV_DIMS)] for p in f], cfg) for f in fronts_a]
    hv_b = [hypervolume([p[: len(HV_DIMS)] for p in f], cfg) for f in fronts_b]
    sd = lambda xs: statistics.stdev(xs) if len(xs) > 1 else 0.0  # noqa: E731
    return {
        "runs_a": len(hv_a), "runs_b": len(hv_b),
        "hv_median_a": statistics.median(hv_a), "hv_median_b": statistics.median(hv_b),
        "hv_sd_a": sd(hv_a), "hv_sd_b": sd(hv_b),
        "p_a_greater": mann_whitney_u(hv_a, hv_b, "greater"),
        "p_a_less": mann_whitney_u(hv_a, hv_b, "less"),
        "a12": a12(hv_a, hv_b),
    }


def cmd_compare(args) -> int:
    report = compare_dirs(Path(args.dir_a), Path(args.dir_b))
    width = max(map(len, report))
    for k, v in report.items():
        print(f"{k:<{width}}  {v:.6g}" if isinstance(v, float) else f"{k:<{width}}  {v}")
    if args.out:
        _write_csv(Path(args.out), list(report), [report])
    return EXIT_OK


def cmd_hv(args) -> int:
    front = _read_points(args.front)
    dims = tuple(int(x) for x in args.dims.split(",")) if args.dims else None
    if args.reference:
        cfg = HvConfig.from_reference_front(_read_points(args.reference), dims, args.ref_point)
    else:
        width = len(front[0]) if front else 0
        d = dims if dims is not None else tuple(range(width))
        cfg = HvConfig(reference_point=(args.ref_point,) * len(d), dimensions=d)
    print(f"{hypervolume(pareto_front(front), cfg):.12g}")
    return EXIT_OK


def _read_points(path: str) -> list[tuple[float, ...]]:
    pts = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                pts.append(tuple(float(x) for x in row))
            except ValueError:
                if pts:
                    raise UsageError(f"{path}: non-numeric row {row}")
                # header line
    return pts


def cmd_export_dimacs(args) -> int:
    text = dimacs_for_model(load_feature_model(args.model))
    _emit(text, args.out)
    return EXIT_OK


def cmd_export_dot(args) -> int:
    fm = load_feature_model(args.model)
    _emit(build_fad(fm, classify_features(fm)).to_dot(), args.out)
    return EXIT_OK


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpco", description="Consistency-preserving configuration operators.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="model statistics and feature classification")
    a.add_argument("model")
    a.add_argument("--cap", type=int, default=None, help="report configurations above this as '> cap'")
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("gen", help="generate the operator suite")
    g.add_argument("model")
    g.add_argument("-o", "--out", required=True)
    g.add_argument("--log", default=None, help="per-rule timing CSV (default: next to the suite)")
    g.add_argument("--limit", type=_limit, default=1, help="variants per rule, or 'inf'")
    g.add_argument("--budget", type=float, default=600.0, help="time budget in seconds")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--basic", action="store_true", help="skip the simplification steps")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("flatten", help="list the variants of one rule")
    f.add_argument("model")
    f.add_argument("rule", help="Act_<Feature> or De_<Feature>")
    f.add_argument("--limit", type=_limit, default=float("inf"))
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--basic", action="store_true")
    f.set_defaults(func=cmd_flatten)

    o = sub.add_parser("optimize", help="run IBEA experiments")
    o.add_argument("--config", default=None, help="key=value file; flags override it")
    o.add_argument("--model", dest="model_path", default=None)
    o.add_argument("--suite", dest="suite_path", default=None)
    o.add_argument("--attribute-seed", type=int, default=None)
    o.add_argument("--runs", type=int, default=None)
    o.add_argument("--population", type=int, default=None)
    o.add_argument("--evaluations", type=int, default=None)
    o.add_argument("--variant-limit", type=int, default=None)
    o.add_argument("--time-budget", dest="time_budget_s", type=float, default=None)
    o.add_argument("--modes", default=None, help="comma-separated subset of " + ",".join(MODES))
    o.add_argument("--output-dir", default=None)
    o.add_argument("--seed", type=int, default=None, help="base seed; run k uses seed + k")
    o.add_argument("--jobs", type=int, default=None)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("compare", help="statistical comparison of two result folders")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_compare)

    h = sub.add_parser("hv", help="hypervolume of a CSV front")
    h.add_argument("front")
    h.add_argument("--reference", default=None, help="front whose extremes give the normalization")
    h.add_argument("--ref-point", type=float, default=1.1)
    h.add_argument("--dims", default=None, help="comma-separated objective indices")
    h.set_defaults(func=cmd_hv)

    d = sub.add_parser("export-dimacs", help="CNF of the model")
    d.add_argument("model")
    d.add_argument("-o", "--out", default=None)
    d.set_defaults(func=cmd_export_dimacs)

    x = sub.add_parser("export-dot", help="feature-activation diagram in Graphviz format")
    x.add_argument("model")
    x.add_argument("-o", "--out", default=None)
    x.set_defaults(func=cmd_export_dot)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, FeatureModelError, UnsatisfiableModel, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
