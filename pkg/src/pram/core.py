"""Groups, sites, attribute signatures and the population container."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Union

AttrValue = Union[str, int]

_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ModelError(ValueError):
    """Invalid model data (bad symbol, negative mass, name clash...)."""


def check_name(name: str) -> str:
    if not isinstance(name, str) or not _NAME.match(name):
        raise ModelError(f"invalid attribute name {name!r}")
    return name


def check_value(value) -> AttrValue:
    """Validate a discrete attribute symbol.

    Symbols are identifier-like tokens or plain integers. Booleans and floats are
    refused so that ``1``, ``True`` and ``1.0`` never silently compare equal.
    """
    if isinstance(value, bool):
        raise ModelError(f"boolean {value!r} is not a valid symbol")
    if isinstance(value, int):
        return value
    if isinstance(value, str) and _TOKEN.match(value):
        return value
    raise ModelError(f"invalid symbol {value!r}")


def check_site_id(site_id) -> str:
    if not isinstance(site_id, str) or not _TOKEN.match(site_id):
        raise ModelError(f"invalid site id {site_id!r}")
    return site_id


@dataclass(frozen=True)
class SiteRef:
    id: str
    name: str = field(default="", compare=False)

    def __post_init__(self):
        check_site_id(self.id)

    @property
    def label(self) -> str:
        return self.name or self.id


@dataclass(frozen=True)
class Signature:
    """Immutable, canonically ordered attribute signature of a group.

    ``features`` maps names to symbols, ``relations`` maps names to site ids.
    Both are stored as name-sorted tuples, so equal content means equal objects.
    """

    features: tuple[tuple[str, AttrValue], ...] = ()
    relations: tuple[tuple[str, str], ...] = ()

    @classmethod
    def make(
        cls,
        features: Mapping[str, AttrValue] | None = None,
        relations: Mapping[str, str] | None = None,
    ) -> Signature:
        feats = {check_name(k): check_value(v) for k, v in (features or {}).items()}
        rels = {check_name(k): check_site_id(v) for k, v in (relations or {}).items()}
        clash = feats.keys() & rels.keys()
        if clash:
            raise ModelError(f"names used as both feature and relation: {sorted(clash)}")
        return cls(tuple(sorted(feats.items())), tuple(sorted(rels.items())))

    @cached_property
    def feature_map(self) -> dict[str, AttrValue]:
        return dict(self.features)

    @cached_property
    def relation_map(self) -> dict[str, str]:
        return dict(self.relations)

    @cached_property
    def key(self) -> str:
        return canonical_key(self)

    def get(self, name: str):
        """Value of a feature or relation (site id); ``None`` if absent."""
        if name in self.feature_map:
            return self.feature_map[name]
        return self.relation_map.get(name)

    def has(self, name: str) -> bool:
        return name in self.feature_map or name in self.relation_map

    @property
    def names(self) -> set[str]:
        return set(self.feature_map) | set(self.relation_map)

    def replace(
        self,
        features: Mapping[str, AttrValue] | None = None,
        relations: Mapping[str, str] | None = None,
    ) -> Signature:
        # only the changed entries need validating; the rest already are
        feats = dict(self.features)
        rels = dict(self.relations)
        for k, v in (features or {}).items():
            if k in rels:
                raise ModelError(f"{k!r} is a relation, not a feature")
            feats[check_name(k)] = check_value(v)
        for k, v in (relations or {}).items():
            if k in feats:
                raise ModelError(f"{k!r} is a feature, not a relation")
            rels[check_name(k)] = check_site_id(v)
        return Signature(tuple(sorted(feats.items())), tuple(sorted(rels.items())))

    def project(self, names: Iterable[str]) -> Signature:
        keep = set(names)
        return Signature(
            tuple(kv for kv in self.features if kv[0] in keep),
            tuple(kv for kv in self.relations if kv[0] in keep),
        )

    def __str__(self) -> str:
        return self.key


def canonical_key(sig: Signature) -> str:
    """Serialized canonical form, e.g. ``flu=s|mood=happy;has_school=adams``.

    Pairs are name-sorted and ``|``-separated; ``;`` splits features from
    relations. Strings can never start with a digit or ``-`` so integer and
    token symbols serialize differently.
    """
    feats = "|".join(f"{k}={v}" for k, v in sig.features)
    rels = "|".join(f"{k}={v}" for k, v in sig.relations)
    return f"{feats};{rels}"


def parse_key(text: str) -> Signature:
    """Inverse of :func:`canonical_key`."""
    if text.count(";") != 1:
        raise ModelError(f"malformed signature {text!r}")
    feats_txt, rels_txt = text.split(";")

    def pairs(part):
        out = {}
        for item in filter(None, part.split("|")):
            k, _, v = item.partition("=")
            out[k] = int(v) if re.fullmatch(r"-?\d+", v) else v
        return out

    return Signature.make(pairs(feats_txt), pairs(rels_txt))


def check_mass(mass) -> float:
    mass = float(mass)
    if not math.isfinite(mass) or mass < 0:
        raise ModelError(f"mass must be finite and non-negative, got {mass!r}")
    return mass


@dataclass
class Group:
    signature: Signature
    mass: float
    name: str = ""

    def __post_init__(self):
        self.mass = check_mass(self.mass)

    @property
    def key(self) -> str:
        return self.signature.key


class Population:
    """Groups indexed by canonical key, plus the declared sites.

    Iteration follows insertion order; anything that must be deterministic
    across permutations sorts by key instead.
    """

    def __init__(self, groups: Iterable[Group] = (), sites: Iterable[SiteRef] = ()):
        self._groups: dict[str, Group] = {}
        self.sites: dict[str, SiteRef] = {}
        for s in sites:
            self.add_site(s)
        for g in groups:
            self.upsert(g)

    def add_site(self, site: SiteRef) -> None:
        if site.id in self.sites:
            raise ModelError(f"duplicate site id {site.id!r}")
        self.sites[site.id] = site

    def upsert(self, g: Group) -> Group:
        return upsert(self, g)

    def get(self, sig: Signature | str) -> Group | None:
        key = sig if isinstance(sig, str) else sig.key
        return self._groups.get(key)

    def __contains__(self, sig) -> bool:
        return self.get(sig) is not None

    def __iter__(self) -> Iterator[Group]:
        return iter(self._groups.values())

    def __len__(self) -> int:
        return len(self._groups)

    @property
    def groups(self) -> list[Group]:
        return list(self._groups.values())

    def keys(self) -> list[str]:
        return list(self._groups)

    def sorted_groups(self) -> list[Group]:
        return [self._groups[k] for k in sorted(self._groups)]

    def masses(self) -> dict[str, float]:
        return {k: g.mass for k, g in self._groups.items()}

    def total_mass(self) -> float:
        return total_mass(self)

    def copy(self) -> Population:
        pop = Population(sites=self.sites.values())
        for g in self:
            pop._groups[g.key] = Group(g.signature, g.mass, g.name)
        return pop

    def drop_below(self, threshold: float) -> int:
        """Remove groups lighter than ``threshold``; returns how many went."""
        doomed = [k for k, g in self._groups.items() if g.mass < threshold]
        for k in doomed:
            del self._groups[k]
        return len(doomed)

    def __repr__(self) -> str:
        return f"Population({len(self)} groups, mass={self.total_mass():g})"


def upsert(pop: Population, g: Group) -> Population:
    """Insert ``g`` or merge it into the existing group with the same signature."""
    mass = check_mass(g.mass)
    existing = pop._groups.get(g.key)
    if existing is None:
        pop._groups[g.key] = Group(g.signature, mass, g.name)
    else:
        existing.mass += mass
    return pop


def total_mass(pop: Population) -> float:
    return math.fsum(g.mass for g in pop)
