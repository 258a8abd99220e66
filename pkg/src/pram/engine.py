"""The redistribution cycle.

One iteration freezes the population, asks every rule for a distribution over
action bundles for every group, multiplies independent rules' distributions
together, and only then moves mass: groups that spawned potential groups are
emptied and every potential group either tops up the extant group with the
same signature or becomes a new group.

Contributions landing on one signature are added with ``math.fsum``, which is
correctly rounded and therefore independent of summation order. Rules are
visited in name order so joint probabilities are multiplied in a fixed order.
Together these make trajectories bit-identical under any permutation of rules,
groups or bundles.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from pram.core import Group, Population, Signature
from pram.dsl.evaluate import Distribution, evaluate
from pram.dsl.model import Action, Rule, apply_bundle
from pram.query import Predicate, RuleEvaluationError, Snapshot, mass_at, proportion_at

log = logging.getLogger(__name__)


class CompositionConflict(RuleEvaluationError):
    pass


class EngineError(RuntimeError):
    def __init__(self, msg: str, iteration: int | None = None, group: str | None = None):
        self.detail = msg
        self.iteration = iteration
        self.group = group
        where = []
        if iteration is not None:
            where.append(f"iteration {iteration}")
        if group is not None:
            where.append(f"group {group}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)


@dataclass
class EngineConfig:
    normalization: str = "strict"  # or "fill"
    conflicts: str = "error"  # or "last-writer-wins"
    compaction: float | None = None  # drop groups lighter than this after each iteration
    threads: int = 1


@dataclass(frozen=True)
class PotentialGroup:
    signature: Signature
    contribution: float
    parent: str
    outcome: tuple[tuple[str, int], ...]  # (rule name, bundle index) per firing rule


@dataclass(frozen=True)
class JointOutcome:
    probability: float
    actions: tuple[Action, ...]
    indices: tuple[int, ...]


def canonical_rules(rules: Iterable[Rule]) -> list[Rule]:
    return sorted(rules, key=lambda r: (r.name, str(r)))


def compose(
    distributions: Sequence[Distribution],
    names: Sequence[str] | None = None,
    conflicts: str = "error",
) -> list[JointOutcome]:
    """Cartesian product of independent rule distributions.

    Joint probabilities multiply in input order; bundles are concatenated in
    input order. Two rules writing the same attribute within one joint outcome
    is an error unless ``conflicts == "last-writer-wins"``.
    """
    names = list(names) if names is not None else [f"rule#{i}" for i in range(len(distributions))]
    out = [JointOutcome(1.0, (), ())]
    writers_of: list[dict[str, str]] = [{}]
    for dist, rname in zip(distributions, names):
        nxt, nxt_writers = [], []
        for joint, writers in zip(out, writers_of):
            for idx, (p, bundle) in enumerate(dist):
                w = dict(writers)
                for a in bundle.actions:
                    prev = w.get(a.target)
                    if prev is not None and prev != rname and conflicts == "error":
                        raise CompositionConflict(
                            f"rules {prev} and {rname} both write {a.target!r} in one joint outcome"
                        )
                    w[a.target] = rname
                nxt.append(JointOutcome(joint.probability * p, joint.actions + bundle.actions, joint.indices + (idx,)))
                nxt_writers.append(w)
        out, writers_of = nxt, nxt_writers
    return out


def generate_potential_groups(
    g: Group, rules: Sequence[Rule], snap: Snapshot, config: EngineConfig | None = None
) -> list[PotentialGroup]:
    """Split ``g`` according to every rule that fires on it.

    ``rules`` are used in the order given; :func:`redistribute` passes them in
    canonical order. An empty list means no rule fired and ``g`` is left alone.
    """
    config = config or EngineConfig()
    sig = g.signature
    dists, names = [], []
    try:
        for r in rules:
            d = evaluate(r, sig, snap, config.normalization)
            if d is not None:
                dists.append(d)
                names.append(r.name)
        if not dists:
            return []
        joint = compose(dists, names, config.conflicts)
        return [
            PotentialGroup(apply_bundle(sig, o.actions), g.mass * o.probability, g.key, tuple(zip(names, o.indices)))
            for o in joint
        ]
    except RuleEvaluationError as exc:
        raise EngineError(str(exc), group=g.name or g.key) from exc


def _child_name(parent: str, taken: set[str]) -> str:
    k = 1
    while f"{parent}_{k}" in taken:
        k += 1
    return f"{parent}_{k}"


def redistribute(pop: Population, rules: Sequence[Rule], config: EngineConfig | None = None) -> Population:
    """One full iteration; returns a new population and leaves ``pop`` intact."""
    config = config or EngineConfig()
    declared = {r.name: i for i, r in enumerate(rules)}
    rules = canonical_rules(rules)
    snap = Snapshot(pop)
    extant = pop.sorted_groups()

    def spawn(g):
        return generate_potential_groups(g, rules, snap, config)

    if config.threads > 1 and len(extant) > 1:
        with ThreadPoolExecutor(config.threads) as ex:
            potentials = list(ex.map(spawn, extant, chunksize=max(1, len(extant) // (4 * config.threads))))
    else:
        potentials = [spawn(g) for g in extant]

    incoming: dict[str, list[float]] = defaultdict(list)
    # New groups are named after their first source in declared rule order,
    # which is cosmetic and never feeds back into masses.
    first_source: dict[str, tuple] = {}
    sigs: dict[str, Signature] = {}
    spawners = set()
    for g, pgs in zip(extant, potentials):
        if pgs:
            spawners.add(g.key)
        for pg in pgs:
            k = pg.signature.key
            incoming[k].append(pg.contribution)
            src = (pg.parent, tuple(i for _, i in sorted(pg.outcome, key=lambda o: declared[o[0]])))
            if k not in first_source or src < first_source[k]:
                first_source[k] = src
                sigs[k] = pg.signature

    out = Population(sites=pop.sites.values())
    for g in pop:
        contribs = incoming.get(g.key, [])
        if g.key in spawners:
            mass = math.fsum(contribs)
        else:
            mass = math.fsum([g.mass, *contribs]) if contribs else g.mass
        out._groups[g.key] = Group(g.signature, mass, g.name)

    taken = {g.name for g in pop}
    fresh = sorted((k for k in incoming if k not in out._groups), key=lambda k: first_source[k])
    for k in fresh:
        parent_name = pop.get(first_source[k][0]).name or "g"
        name = _child_name(parent_name, taken)
        taken.add(name)
        out._groups[k] = Group(sigs[k], math.fsum(incoming[k]), name)

    if config.compaction is not None:
        dropped = out.drop_below(config.compaction)
        if dropped:
            log.debug("compaction dropped %d groups", dropped)
    return out


@dataclass(frozen=True)
class Probe:
    name: str
    site: str
    relation: str
    predicate: Predicate = Predicate()
    kind: str = "proportion"  # or "mass"

    def measure(self, snap: Snapshot) -> float:
        if self.kind == "mass":
            return mass_at(self.site, self.relation, self.predicate, snap)
        return proportion_at(self.site, self.relation, self.predicate, snap)


@dataclass
class Trajectory:
    """Per-iteration masses and probe values; iteration 0 is the initial state."""

    masses: list[tuple[int, str, float]] = field(default_factory=list)
    probes: list[tuple[int, str, float]] = field(default_factory=list)
    group_counts: list[tuple[int, int]] = field(default_factory=list)
    totals: list[tuple[int, float]] = field(default_factory=list)
    final: Population | None = None

    def record(self, it: int, pop: Population, probes: Sequence[Probe]) -> None:
        for g in pop.sorted_groups():
            self.masses.append((it, g.key, g.mass))
        if probes:
            snap = Snapshot(pop)
            for p in probes:
                self.probes.append((it, p.name, p.measure(snap)))
        self.group_counts.append((it, len(pop)))
        self.totals.append((it, pop.total_mass()))

    def at(self, it: int) -> dict[str, float]:
        return {k: m for i, k, m in self.masses if i == it}

    def probe_series(self, name: str) -> list[float]:
        return [v for _, n, v in self.probes if n == name]

    def write_masses(self, path) -> None:
        _write_csv(path, ("iter", "signature", "mass"), self.masses)

    def write_probes(self, path) -> None:
        _write_csv(path, ("iter", "probe_name", "value"), self.probes)

    def write_summary(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("iter\tgroups\ttotal_mass\n")
            for (it, nu), (_, total) in zip(self.group_counts, self.totals):
                fh.write(f"{it}\t{nu}\t{fmt(total)}\n")


def fmt(x: float) -> str:
    return "%.17g" % x


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for it, name, value in rows:
            w.writerow((it, name, fmt(value)))


def run(
    pop: Population,
    rules: Sequence[Rule],
    iterations: int,
    probes: Sequence[Probe] = (),
    config: EngineConfig | None = None,
) -> Trajectory:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    traj = Trajectory()
    traj.record(0, pop, probes)
    for it in range(1, iterations + 1):
        try:
            pop = redistribute(pop, rules, config)
        except EngineError as exc:
            raise EngineError(exc.detail, iteration=it, group=exc.group) from exc
        traj.record(it, pop, probes)
    traj.final = pop
    return traj
