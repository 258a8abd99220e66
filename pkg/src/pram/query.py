"""Relation lookups and mass-weighted aggregates over a frozen snapshot."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

from pram.core import AttrValue, Group, Population, Signature, SiteRef

log = logging.getLogger(__name__)


class RuleEvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Predicate:
    """Conjunction of attribute equality tests. Empty matches everything."""

    tests: tuple[tuple[str, AttrValue], ...] = ()

    @classmethod
    def of(cls, tests: Mapping[str, AttrValue] | Iterable[tuple[str, AttrValue]] = ()) -> Predicate:
        items = tests.items() if isinstance(tests, Mapping) else tests
        return cls(tuple(sorted(items)))

    def matches(self, sig: Signature) -> bool:
        for name, value in self.tests:
            got = sig.get(name)
            if got is None or got != value:
                return False
        return True

    def __str__(self) -> str:
        return " and ".join(f"{k} == {v}" for k, v in self.tests)


class Snapshot:
    """Read-only view of a population at the start of an iteration.

    Masses are copied in, so later changes to the source population are not
    visible. The (relation, site) -> groups index is built once; aggregate
    results are memoised since every query is a pure function of the snapshot.
    """

    def __init__(self, pop: Population):
        self.sites: Mapping[str, SiteRef] = MappingProxyType(dict(pop.sites))
        self._groups = {g.key: Group(g.signature, g.mass, g.name) for g in pop}
        index: dict[tuple[str, str], list[str]] = defaultdict(list)
        for key, g in self._groups.items():
            for rel, site in g.signature.relations:
                index[rel, site].append(key)
        self._index = {k: tuple(sorted(v)) for k, v in index.items()}
        self._cache: dict = {}

    @property
    def groups(self) -> list[Group]:
        return list(self._groups.values())

    def __len__(self) -> int:
        return len(self._groups)

    def __iter__(self):
        return iter(self._groups.values())

    def mass_of(self, key: str) -> float:
        g = self._groups.get(key)
        return 0.0 if g is None else g.mass

    def keys_at(self, site_id: str, rel_name: str) -> tuple[str, ...]:
        return self._index.get((rel_name, site_id), ())

    def mass_at(self, site_id: str, rel_name: str, pred: Predicate) -> float:
        ck = ("mass", site_id, rel_name, pred)
        hit = self._cache.get(ck)
        if hit is None:
            hit = math.fsum(
                self._groups[k].mass
                for k in self.keys_at(site_id, rel_name)
                if pred.matches(self._groups[k].signature)
            )
            self._cache[ck] = hit
        return hit


def _site_id(site: SiteRef | str) -> str:
    return site.id if isinstance(site, SiteRef) else site


def relation_target(g: Group | Signature, rel_name: str, sites: Mapping[str, SiteRef] | None = None) -> SiteRef:
    sig = g.signature if isinstance(g, Group) else g
    site_id = sig.relation_map.get(rel_name)
    if site_id is None:
        who = g.name or sig.key if isinstance(g, Group) else sig.key
        raise RuleEvaluationError(f"group {who} has no relation {rel_name!r}")
    if sites is not None and site_id in sites:
        return sites[site_id]
    return SiteRef(site_id)


def groups_at(site: SiteRef | str, rel_name: str, snap: Snapshot) -> list[Group]:
    return [snap._groups[k] for k in snap.keys_at(_site_id(site), rel_name)]


def mass_at(site: SiteRef | str, rel_name: str, pred: Predicate, snap: Snapshot) -> float:
    return snap.mass_at(_site_id(site), rel_name, pred)


def proportion_at(site: SiteRef | str, rel_name: str, pred: Predicate, snap: Snapshot) -> float:
    """Share of the mass at ``site`` satisfying ``pred``; 0 for an empty site."""
    site_id = _site_id(site)
    total = snap.mass_at(site_id, rel_name, Predicate())
    if total == 0:
        log.warning("proportion at empty site %s via %s; using 0", site_id, rel_name)
        return 0.0
    return snap.mass_at(site_id, rel_name, pred) / total
