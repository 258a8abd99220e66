"""Collapse individual records into a minimal initial population.

Only attributes a rule mentions (in a condition, a probability expression or an
action) survive; records that agree on those are merged and their weights
summed.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from pram.core import AttrValue, Group, ModelError, Population, Signature, SiteRef, check_mass
from pram.dsl.model import Rule

REL_PREFIX = "rel:"


class CompileError(ValueError):
    pass


@dataclass
class IndividualRecord:
    features: dict[str, AttrValue] = field(default_factory=dict)
    relations: dict[str, str] = field(default_factory=dict)
    weight: float = 1.0

    def __post_init__(self):
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise CompileError(f"record weight must be positive, got {self.weight!r}")

    def signature(self) -> Signature:
        return Signature.make(self.features, self.relations)


def relevant_attributes(rules: Iterable[Rule]) -> set[str]:
    out: set[str] = set()
    for r in rules:
        out |= r.names()
    return out


def _symbol(text: str) -> AttrValue:
    text = text.strip()
    return int(text) if re.fullmatch(r"-?\d+", text) else text


def read_records(path, delimiter: str | None = None) -> list[IndividualRecord]:
    """Read a header-first delimited table.

    ``rel:``-prefixed columns are relations, a ``weight`` column (optional)
    gives record weights, everything else is a feature. Integer-looking cells
    become integer symbols. The delimiter defaults to tab for ``.tsv`` files
    and comma otherwise.
    """
    path = str(path)
    if delimiter is None:
        delimiter = "\t" if path.endswith(".tsv") else ","
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = [h.strip() for h in next(reader)]
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CompileError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            feats, rels, weight = {}, {}, 1.0
            for col, cell in zip(header, row):
                if col == "weight":
                    weight = float(cell)
                elif col.startswith(REL_PREFIX):
                    rels[col[len(REL_PREFIX):]] = cell.strip()
                else:
                    feats[col] = _symbol(cell)
            records.append(IndividualRecord(feats, rels, weight))
    return records


def compile_population(
    records: Sequence[IndividualRecord],
    rules: Sequence[Rule],
    sites: Iterable[SiteRef] = (),
    keep: Iterable[str] = (),
) -> Population:
    """Project records onto the rule-relevant attributes and merge equal projections.

    ``keep`` names extra attributes to retain, e.g. those that probes query.
    """
    keep = relevant_attributes(rules) | set(keep)
    acc: dict[Signature, list[float]] = {}
    for i, rec in enumerate(records):
        have = set(rec.features) | set(rec.relations)
        missing = keep - have
        if missing:
            raise CompileError(f"record {i} lacks relevant attribute(s) {sorted(missing)}")
        try:
            sig = Signature.make(
                {k: v for k, v in rec.features.items() if k in keep},
                {k: v for k, v in rec.relations.items() if k in keep},
            )
        except ModelError as exc:
            raise CompileError(f"record {i}: {exc}") from exc
        acc.setdefault(sig, []).append(rec.weight)
    pop = Population(sites=sites)
    for n, sig in enumerate(sorted(acc, key=lambda s: s.key), start=1):
        pop.upsert(Group(sig, math.fsum(acc[sig]), f"g{n}"))
    return pop


def population_records(pop: Population) -> list[IndividualRecord]:
    """One weighted record per group (inverse view of :func:`compile_population`)."""
    return [
        IndividualRecord(dict(g.signature.features), dict(g.signature.relations), check_mass(g.mass))
        for g in pop.sorted_groups()
        if g.mass > 0
    ]


def uncompiled_population(records: Sequence[IndividualRecord], sites: Iterable[SiteRef] = ()) -> Population:
    """Population keeping every attribute; only exact duplicates merge."""
    pop = Population(sites=sites)
    for n, rec in enumerate(records, start=1):
        pop.upsert(Group(rec.signature(), rec.weight, f"r{n}"))
    return pop
