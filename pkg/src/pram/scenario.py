"""Scenario files: loading, validation, serialization and built-ins.

A scenario is a YAML (or JSON) mapping::

    name: flu-two-rules
    iterations: 2
    mode: {normalization: strict, conflicts: error, compaction: null}
    sites: [{id: adams, name: Adams}, {id: home}]
    groups:
      - {name: g1, features: {flu: s, mood: happy}, relations: {has_location: adams}, mass: 900}
    rules:
      - |
        rule flu_progression { ... }
      - {name: ..., clauses: [...]}      # structured form, see pram.dsl.structured
    probes:
      - {name: exposed_adams, site: adams, relation: has_location, where: {flu: e}, kind: proportion}

``groups_from: other.yaml`` may replace ``groups`` (the output of ``pram
compile``); relative paths resolve against the scenario file. An optional
``domains: {attr: [values...]}`` widens the clause-exclusivity check.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from pram.core import Group, ModelError, Population, Signature, SiteRef
from pram.dsl import (
    Clause,
    MoveRelation,
    Rule,
    RuleSyntaxError,
    RuleValidationError,
    check_exclusive,
    parse_rules,
    rule_from_tree,
    unparse_rule,
)
from pram.engine import EngineConfig, Probe
from pram.query import Predicate


class ScenarioError(ValueError):
    pass


_SYMBOL = {"type": ["string", "integer"]}
_MAP = {"type": "object", "additionalProperties": _SYMBOL}

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["iterations"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "iterations": {"type": "integer", "minimum": 1},
        "mode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "normalization": {"enum": ["strict", "fill"]},
                "conflicts": {"enum": ["error", "last-writer-wins"]},
                "compaction": {"type": ["number", "null"], "minimum": 0},
            },
        },
        "sites": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"type": "string"},
                    {"type": "object", "required": ["id"], "additionalProperties": False,
                     "properties": {"id": {"type": "string"}, "name": {"type": "string"}}},
                ]
            },
        },
        "groups": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["mass"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "features": _MAP,
                    "relations": {"type": "object", "additionalProperties": {"type": "string"}},
                    "mass": {"type": "number", "minimum": 0},
                },
            },
        },
        "groups_from": {"type": "string"},
        "rules": {"type": "array", "items": {"type": ["string", "object"]}},
        "domains": {"type": "object", "additionalProperties": {"type": "array", "items": _SYMBOL}},
        "probes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "site", "relation"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "site": {"type": "string"},
                    "relation": {"type": "string"},
                    "where": _MAP,
                    "kind": {"enum": ["mass", "proportion"]},
                },
            },
        },
    },
    "not": {"required": ["groups", "groups_from"]},
}


@dataclass
class Scenario:
    population: Population
    rules: list[Rule]
    iterations: int
    probes: list[Probe] = field(default_factory=list)
    config: EngineConfig = field(default_factory=EngineConfig)
    name: str = ""
    description: str = ""
    domains: dict[str, list] = field(default_factory=dict)

    @property
    def sites(self) -> list[SiteRef]:
        return list(self.population.sites.values())

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        if self.name:
            out["name"] = self.name
        if self.description:
            out["description"] = self.description
        out["iterations"] = self.iterations
        out["mode"] = {
            "normalization": self.config.normalization,
            "conflicts": self.config.conflicts,
            "compaction": self.config.compaction,
        }
        out["sites"] = [{"id": s.id, "name": s.name} if s.name else {"id": s.id} for s in self.sites]
        out["groups"] = groups_to_dicts(self.population)
        out["rules"] = [unparse_rule(r) for r in self.rules]
        if self.domains:
            out["domains"] = {k: list(v) for k, v in self.domains.items()}
        out["probes"] = [
            {"name": p.name, "site": p.site, "relation": p.relation, "where": dict(p.predicate.tests), "kind": p.kind}
            for p in self.probes
        ]
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None, width=100)


def groups_to_dicts(pop: Population) -> list[dict]:
    out = []
    for g in pop:
        d: dict[str, Any] = {}
        if g.name:
            d["name"] = g.name
        d["features"] = dict(g.signature.features)
        d["relations"] = dict(g.signature.relations)
        d["mass"] = g.mass
        out.append(d)
    return out


def builtin_dir() -> Path:
    return Path(str(resources.files("pram") / "scenarios"))


def builtin_names() -> list[str]:
    return sorted(p.stem for p in builtin_dir().glob("*.yaml"))


def resolve_path(ref: str | Path) -> Path:
    """A file path, or the name of a built-in scenario."""
    p = Path(ref)
    if p.exists():
        return p
    cand = builtin_dir() / f"{ref}.yaml"
    if cand.exists():
        return cand
    raise ScenarioError(f"no scenario file or built-in named {str(ref)!r}")


def load_scenario(path: str | Path) -> Scenario:
    path = resolve_path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML: {exc}") from None
    return scenario_from_dict(data, base=path.parent, source=str(path))


def _loc(exc: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in exc.absolute_path) or "<root>"


def scenario_from_dict(data: Any, base: Path | None = None, source: str = "<scenario>") -> Scenario:
    def fail(where: str, msg: str):
        raise ScenarioError(f"{source}: {where}: {msg}")

    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        fail(_loc(exc), exc.message)

    mode = data.get("mode", {})
    config = EngineConfig(
        normalization=mode.get("normalization", "strict"),
        conflicts=mode.get("conflicts", "error"),
        compaction=mode.get("compaction"),
    )
    strict = config.normalization == "strict"

    sites = []
    for i, s in enumerate(data.get("sites", [])):
        s = {"id": s} if isinstance(s, str) else s
        try:
            sites.append(SiteRef(s["id"], s.get("name", "")))
        except ModelError as exc:
            fail(f"sites/{i}", str(exc))
    try:
        pop = Population(sites=sites)
    except ModelError as exc:
        fail("sites", str(exc))
    declared = set(pop.sites)

    group_specs = data.get("groups", [])
    group_src = "groups"
    if "groups_from" in data:
        gpath = Path(data["groups_from"])
        if not gpath.is_absolute() and base is not None:
            gpath = base / gpath
        try:
            gdata = yaml.safe_load(gpath.read_text())
        except (OSError, yaml.YAMLError) as exc:
            fail("groups_from", str(exc))
        gdata = gdata.get("groups", []) if isinstance(gdata, dict) else gdata
        try:
            jsonschema.validate(gdata, SCENARIO_SCHEMA["properties"]["groups"])
        except jsonschema.ValidationError as exc:
            fail(f"groups_from:{_loc(exc)}", exc.message)
        group_specs, group_src = gdata, f"groups_from({gpath})"

    for i, gs in enumerate(group_specs):
        where = f"{group_src}/{i}"
        try:
            sig = Signature.make(gs.get("features", {}), gs.get("relations", {}))
        except ModelError as exc:
            fail(where, str(exc))
        for rel, site in sig.relations:
            if site not in declared:
                fail(where, f"relation {rel} refers to undeclared site {site!r}")
        if sig in pop:
            fail(where, f"duplicate group signature {sig.key}")
        pop.upsert(Group(sig, gs["mass"], gs.get("name") or f"g{i + 1}"))

    rules: list[Rule] = []
    for i, item in enumerate(data.get("rules", [])):
        try:
            if isinstance(item, str):
                rules.extend(parse_rules(item, strict=strict))
            else:
                rules.append(rule_from_tree(item, strict=strict))
        except (RuleSyntaxError, RuleValidationError) as exc:
            fail(f"rules/{i}", str(exc))
    names = [r.name for r in rules]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        fail("rules", f"duplicate rule names {dupes}")

    relation_names = {rel for g in pop for rel, _ in g.signature.relations}
    for r in rules:
        for a in _actions(r):
            if isinstance(a, MoveRelation):
                relation_names.add(a.name)
                if a.kind == "site" and a.to not in declared:
                    fail(f"rule {r.name}", f"move to undeclared site {a.to!r}")
    for r in rules:
        for c in r.clauses:
            for k, v in c.condition.tests:
                if k in relation_names and v not in declared:
                    fail(f"rule {r.name}", f"condition {k} == {v} names undeclared site")

    domains = {k: list(v) for k, v in data.get("domains", {}).items()}
    exclusivity_domains = _value_domains(pop, rules, domains)
    for r in rules:
        try:
            check_exclusive(r, exclusivity_domains)
        except RuleValidationError as exc:
            fail(f"rule {r.name}", str(exc))

    probes = []
    for i, ps in enumerate(data.get("probes", [])):
        if ps["site"] not in declared:
            fail(f"probes/{i}", f"undeclared site {ps['site']!r}")
        probes.append(Probe(ps["name"], ps["site"], ps["relation"], Predicate.of(ps.get("where", {})),
                            ps.get("kind", "proportion")))
    pnames = [p.name for p in probes]
    if len(set(pnames)) != len(pnames):
        fail("probes", "duplicate probe names")

    return Scenario(pop, rules, data["iterations"], probes, config,
                    data.get("name", ""), data.get("description", ""), domains)


def _actions(rule: Rule):
    for c in rule.clauses:
        for b in c.bundles:
            yield from b.actions


def _value_domains(pop: Population, rules, declared_domains) -> dict[str, set]:
    dom: dict[str, set] = {k: set(v) for k, v in declared_domains.items()}
    for g in pop:
        for k, v in (*g.signature.features, *g.signature.relations):
            dom.setdefault(k, set()).add(v)
    sites = set(pop.sites)
    for r in rules:
        for a in _actions(r):
            if isinstance(a, MoveRelation):
                dom.setdefault(a.name, set()).update(sites)
            else:
                dom.setdefault(a.name, set()).add(a.value)
    return dom


def probe_attributes(s: Scenario) -> set[str]:
    """Attributes the scenario's probes read; compiling must not drop them."""
    out = set()
    for p in s.probes:
        out.add(p.relation)
        out.update(k for k, _ in p.predicate.tests)
    return out


def scenario_rules_stationary(s: Scenario) -> bool:
    return all(r.is_stationary() for r in s.rules)


def reorder(s: Scenario, rule_order=None, group_order=None, bundle_perm=None) -> Scenario:
    """Copy of ``s`` with rules, groups and/or clause bundles permuted.

    ``bundle_perm`` maps a clause's bundle list to its reordered version.
    """
    out = copy.copy(s)
    rules = list(s.rules)
    if rule_order is not None:
        rules = [rules[i] for i in rule_order]
    if bundle_perm is not None:
        rules = [
            Rule(r.name, tuple(Clause(c.condition, tuple(bundle_perm(list(c.bundles)))) for c in r.clauses))
            for r in rules
        ]
    out.rules = rules
    groups = s.population.groups
    if group_order is not None:
        groups = [groups[i] for i in group_order]
    pop = Population(sites=s.population.sites.values())
    for g in groups:
        pop.upsert(Group(g.signature, g.mass, g.name))
    out.population = pop
    return out


__all__ = [
    "Scenario",
    "ScenarioError",
    "builtin_names",
    "load_scenario",
    "probe_attributes",
    "reorder",
    "resolve_path",
    "scenario_from_dict",
]
