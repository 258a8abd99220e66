"""Reference implementations used to cross-check the engine.

Neither path goes through the engine's composition or merge code: the Markov
oracle builds an explicit transition matrix over signatures and pushes a mass
vector through it, and the Monte Carlo oracle moves individual agents by
sampling. Both reuse only rule semantics (clause selection, probability
evaluation, applying actions).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from pram.core import Group, Population, Signature
from pram.dsl.evaluate import evaluate
from pram.dsl.model import Rule, apply_bundle
from pram.query import Snapshot

STATE_LIMIT = 10_000


class StationarityError(ValueError):
    pass


class StateSpaceError(ValueError):
    pass


def _joint(rules: Sequence[Rule], sig: Signature, snap, mode: str):
    """Outcome signatures and probabilities of all firing rules together, or None."""
    dists = [d for d in (evaluate(r, sig, snap, mode) for r in rules) if d is not None]
    if not dists:
        return None
    out = []
    for combo in itertools.product(*dists):
        p = math.prod(pb[0] for pb in combo)
        actions = tuple(a for _, b in combo for a in b.actions)
        out.append((apply_bundle(sig, actions), p))
    return out


@dataclass
class TransitionMatrix:
    matrix: np.ndarray
    states: list[Signature]

    def __post_init__(self):
        self.index = {s.key: i for i, s in enumerate(self.states)}

    def __len__(self) -> int:
        return len(self.states)

    def vector(self, pop: Population) -> np.ndarray:
        v = np.zeros(len(self.states))
        for g in pop:
            if g.key not in self.index:
                raise StateSpaceError(f"group {g.key} outside the signature space")
            v[self.index[g.key]] += g.mass
        return v

    def as_dict(self, v: np.ndarray) -> dict[str, float]:
        return {s.key: float(x) for s, x in zip(self.states, v)}


def signature_closure(rules: Sequence[Rule], start: Sequence[Signature], limit: int = STATE_LIMIT,
                      mode: str = "strict") -> list[Signature]:
    """All signatures reachable from ``start`` by repeatedly applying the rules."""
    _require_stationary(rules)
    seen = {s.key: s for s in start}
    frontier = list(seen.values())
    while frontier:
        nxt = []
        for sig in frontier:
            for target, _ in _joint(rules, sig, None, mode) or ():
                if target.key not in seen:
                    seen[target.key] = target
                    nxt.append(target)
                    if len(seen) > limit:
                        raise StateSpaceError(f"more than {limit} reachable signatures")
        frontier = nxt
    return sorted(seen.values(), key=lambda s: s.key)


def _require_stationary(rules):
    bad = [r.name for r in rules if not r.is_stationary()]
    if bad:
        raise StationarityError(f"rules with population-dependent probabilities: {bad}")


def build_transition_matrix(rules: Sequence[Rule], signature_space: Sequence[Signature],
                            mode: str = "strict") -> TransitionMatrix:
    """Row-stochastic matrix: entry (i, j) is the chance a unit of mass moves from i to j."""
    _require_stationary(rules)
    states = list(signature_space)
    index = {s.key: i for i, s in enumerate(states)}
    m = np.zeros((len(states), len(states)))
    for i, sig in enumerate(states):
        outcomes = _joint(rules, sig, None, mode)
        if outcomes is None:
            m[i, i] = 1.0
            continue
        for target, p in outcomes:
            j = index.get(target.key)
            if j is None:
                raise StateSpaceError(f"{sig.key} can move to {target.key}, which is not in the space")
            m[i, j] += p
    return TransitionMatrix(m, states)


def markov_expected_counts(tm: TransitionMatrix | np.ndarray, init, t: int) -> np.ndarray:
    """``init @ tm**t`` computed one step at a time."""
    m = tm.matrix if isinstance(tm, TransitionMatrix) else np.asarray(tm)
    v = np.asarray(init, dtype=float)
    if v.shape != (m.shape[0],):
        raise ValueError(f"init has shape {v.shape}, matrix is {m.shape}")
    for _ in range(t):
        v = v @ m
    return v


def markov_trajectory(pop: Population, rules: Sequence[Rule], t: int, mode: str = "strict"):
    """Expected masses per signature for iterations 0..t, starting from ``pop``."""
    space = signature_closure(rules, [g.signature for g in pop], mode=mode)
    tm = build_transition_matrix(rules, space, mode)
    v = tm.vector(pop)
    out = [tm.as_dict(v)]
    for _ in range(t):
        v = v @ tm.matrix
        out.append(tm.as_dict(v))
    return out


# --- Monte Carlo -----------------------------------------------------------


def allocate_agents(pop: Population, agents: int | None = None) -> dict[str, int]:
    """Integer agent counts per group, proportional to mass (largest remainder).

    Without ``agents`` the target is the rounded total mass.
    """
    total = pop.total_mass()
    n = round(total) if agents is None else agents
    if n <= 0 or total <= 0:
        raise ValueError("need a positive number of agents")
    groups = pop.sorted_groups()
    exact = [g.mass * n / total for g in groups]
    counts = [math.floor(x) for x in exact]
    short = n - sum(counts)
    order = sorted(range(len(groups)), key=lambda i: (-(exact[i] - counts[i]), groups[i].key))
    for i in order[:short]:
        counts[i] += 1
    return {g.key: c for g, c in zip(groups, counts)}


@dataclass
class MonteCarloResult:
    keys: list[str]
    samples: np.ndarray  # replicates x keys, final agent counts
    agents: int
    scale: float  # agents per unit of source mass

    @property
    def mean(self) -> dict[str, float]:
        return dict(zip(self.keys, self.samples.mean(axis=0)))

    @property
    def stderr(self) -> dict[str, float]:
        r = self.samples.shape[0]
        if r < 2:
            return dict.fromkeys(self.keys, float("nan"))
        return dict(zip(self.keys, self.samples.std(axis=0, ddof=1) / math.sqrt(r)))


def _one_replicate(start: dict[str, int], sigs: dict[str, Signature], sites, rules, t, rng, mode):
    states = list(sigs.values())
    index = {s.key: i for i, s in enumerate(states)}
    agents = np.concatenate([np.full(c, index[k], dtype=np.int64) for k, c in start.items() if c > 0])
    for _ in range(t):
        counts = np.bincount(agents, minlength=len(states))
        snap = Snapshot(Population(
            (Group(states[i], float(c)) for i, c in enumerate(counts) if c > 0), sites))
        nxt = agents.copy()
        for i in np.flatnonzero(counts):
            outcomes = _joint(rules, states[i], snap, mode)
            if outcomes is None:
                continue
            members = np.flatnonzero(agents == i)
            probs = np.array([p for _, p in outcomes])
            picks = rng.choice(len(outcomes), size=len(members), p=probs / probs.sum())
            for o, (target, _) in enumerate(outcomes):
                j = index.get(target.key)
                if j is None:
                    j = index[target.key] = len(states)
                    states.append(target)
                nxt[members[picks == o]] = j
        agents = nxt
    counts = np.bincount(agents, minlength=len(states))
    return {s.key: int(c) for s, c in zip(states, counts)}


def simulate_agents(pop: Population, rules: Sequence[Rule], t: int, seed: int = 0, replicates: int = 50,
                    agents: int | None = None, mode: str = "strict", threads: int = 1) -> MonteCarloResult:
    """Agent-level simulation: each agent samples one joint outcome per iteration.

    Aggregates are read from the agent population at the start of each
    iteration. Every replicate draws from its own stream spawned from ``seed``.
    """
    start = allocate_agents(pop, agents)
    n = sum(start.values())
    sigs = {g.key: g.signature for g in pop.sorted_groups()}
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(replicates)]
    rules = list(rules)
    sites = list(pop.sites.values())

    def rep(rng):
        return _one_replicate(start, sigs, sites, rules, t, rng, mode)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(rep, streams))
    else:
        results = [rep(rng) for rng in streams]
    keys = sorted(set().union(*results))
    samples = np.array([[r.get(k, 0) for k in keys] for r in results], dtype=float)
    return MonteCarloResult(keys, samples, n, n / pop.total_mass())


def comparison_rows(engine: dict[str, float], mc: MonteCarloResult, markov: dict[str, float] | None = None):
    """Rows of (signature, engine, oracle mean, std error, z[, markov]) with engine scaled to agents."""
    mean, se = mc.mean, mc.stderr
    rows = []
    for k in sorted(set(engine) | set(mean)):
        e = engine.get(k, 0.0) * mc.scale
        m = mean.get(k, 0.0)
        s = se.get(k, 0.0)
        z = (m - e) / s if s > 0 else (0.0 if math.isclose(m, e, abs_tol=1e-9) else math.inf)
        row = [k, e, m, s, z]
        if markov is not None:
            row.append(markov.get(k, 0.0) * mc.scale)
        rows.append(row)
    return rows
