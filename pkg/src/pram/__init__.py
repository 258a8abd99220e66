"""Lifted redistribution engine: groups of functionally identical members whose
mass is moved between attribute signatures by probabilistic rules."""

from pram.core import Group, Population, Signature, SiteRef, canonical_key, total_mass, upsert
from pram.dsl import Rule, parse_rule, parse_rules
from pram.engine import EngineConfig, redistribute, run

__all__ = [
    "EngineConfig",
    "Group",
    "Population",
    "Rule",
    "Signature",
    "SiteRef",
    "canonical_key",
    "parse_rule",
    "parse_rules",
    "redistribute",
    "run",
    "total_mass",
    "upsert",
]
