"""JSON form of operator suites.

Timing data is kept out of the suite document so that regenerating a suite
from the same inputs yields identical bytes; :func:`log_csv` renders it
separately.
"""

from __future__ import annotations

import json
from typing import Any

from .fad import FeatureDecision
from .fm import FeatureModel, parse_feature_model, serialize_feature_model
from .generate import CpcoSuite, RuleLog
from .rules import FlatRule, RuleConstraint, RuleNode, VBRule, parse_formula

FORMAT_VERSION = 1


def _decision(d: FeatureDecision) -> list:
    return [d.feature, d.activate]


def _undecision(x) -> FeatureDecision:
    return FeatureDecision(int(x[0]), bool(x[1]))


def rule_to_dict(rule: VBRule) -> dict[str, Any]:
    return {
        "name": rule.name,
        "root": _decision(rule.root_decision),
        "supported_only": rule.supported_only,
        "nodes": [{"decision": _decision(n.decision), "old": n.old, "new": n.new,
                   "pc": n.pc.to_prefix()} for n in rule.nodes],
        "groups": [[g, list(alts)] for g, alts in rule.groups],
        "constraints": [[c.kind, c.formula.to_prefix()] for c in rule.constraints],
    }


def rule_from_dict(data: dict[str, Any]) -> VBRule:
    return VBRule(
        data["name"],
        _undecision(data["root"]),
        tuple(RuleNode(_undecision(n["decision"]), n["old"], n["new"], parse_formula(n["pc"]))
              for n in data["nodes"]),
        tuple((g, tuple(alts)) for g, alts in data["groups"]),
        tuple(RuleConstraint(k, parse_formula(f)) for k, f in data["constraints"]),
        bool(data.get("supported_only", False)),
    )


def suite_to_dict(suite: CpcoSuite) -> dict[str, Any]:
    order = sorted(suite.rules, key=lambda d: (d.feature, not d.activate))
    return {
        "format": FORMAT_VERSION,
        "model": serialize_feature_model(suite.fm),
        "limit": None if suite.limit == float("inf") else suite.limit,
        "seed": suite.seed,
        "missing": [_decision(d) for d in suite.missing],
        "rules": [
            {"rule": rule_to_dict(suite.rules[d]),
             "variants": [{"id": v.id, "decisions": [_decision(x) for x in v.decisions]}
                          for v in suite.variants.get(d, [])]}
            for d in order
        ],
    }


def suite_from_dict(data: dict[str, Any], fm: FeatureModel | None = None) -> CpcoSuite:
    if data.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported suite format {data.get('format')!r}")
    fm = fm or parse_feature_model(data["model"])
    limit = data.get("limit")
    suite = CpcoSuite(fm, limit=float("inf") if limit is None else limit, seed=data.get("seed", 0))
    suite.missing = [_undecision(x) for x in data.get("missing", [])]
    for entry in data["rules"]:
        rule = rule_from_dict(entry["rule"])
        suite.rules[rule.root_decision] = rule
        suite.variants[rule.root_decision] = [
            FlatRule(v["id"], rule.name, rule.root_decision,
                     tuple(_undecision(x) for x in v["decisions"]))
            for v in entry["variants"]
        ]
    return suite


def dumps_suite(suite: CpcoSuite) -> str:
    return json.dumps(suite_to_dict(suite), indent=1, sort_keys=True) + "\n"


def loads_suite(text: str, fm: FeatureModel | None = None) -> CpcoSuite:
    return suite_from_dict(json.loads(text), fm)


def save_suite(suite: CpcoSuite, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_suite(suite))


def load_suite(path, fm: FeatureModel | None = None) -> CpcoSuite:
    with open(path, encoding="utf-8") as fh:
        return loads_suite(fh.read(), fm)


def log_csv(log: list[RuleLog]) -> str:
    lines = ["Rule,Seconds,Variants,Nodes"]
    lines += [f"{r.rule},{r.seconds:.6f},{r.variants},{r.nodes}" for r in log]
    return "\n".join(lines) + "\n"
