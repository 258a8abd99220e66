"""Clause selection, probability evaluation and static rule checks."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from typing import Iterable, Mapping

from pram.core import Group, Signature
from pram.dsl.model import Bundle, Const, Rule
from pram.dsl.parser import RuleValidationError
from pram.query import RuleEvaluationError, Snapshot

SUM_TOL = 1e-9
RANGE_TOL = 1e-12
# Residual outcome added in fill mode; its own probability field is unused.
IDENTITY = Bundle(Const(1.0), ())

Distribution = list[tuple[float, Bundle]]

_OTHER = object()  # stands for "any value not mentioned" (or absent)


def select_clause(rule: Rule, sig: Signature):
    for c in rule.clauses:
        if c.condition.matches(sig):
            return c
    return None


def evaluate(rule: Rule, g: Group | Signature, snap: Snapshot, mode: str = "strict") -> Distribution | None:
    """Distribution over bundles for the first clause whose condition holds.

    Returns ``None`` when no clause matches. ``mode="fill"`` tops up a short
    distribution with an identity bundle carrying the residual probability.
    """
    sig = g.signature if isinstance(g, Group) else g
    clause = select_clause(rule, sig)
    if clause is None:
        return None
    dist = []
    for b in clause.bundles:
        p = b.probability.eval(sig, snap)
        if not (-RANGE_TOL <= p <= 1 + RANGE_TOL) or math.isnan(p):
            raise RuleEvaluationError(
                f"rule {rule.name}: probability {p!r} outside [0, 1] for group {sig.key}"
            )
        dist.append((min(max(p, 0.0), 1.0), b))
    total = math.fsum(p for p, _ in dist)
    if mode == "strict":
        if abs(total - 1.0) > SUM_TOL:
            raise RuleEvaluationError(
                f"rule {rule.name}: probabilities sum to {total!r}, not 1, for group {sig.key}"
            )
    elif mode == "fill":
        if total > 1.0 + SUM_TOL:
            raise RuleEvaluationError(
                f"rule {rule.name}: probabilities sum to {total!r} > 1 for group {sig.key}"
            )
        residual = 1.0 - total
        if residual > 0:
            dist.append((residual, IDENTITY))
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return dist


# --- static checks ---------------------------------------------------------


def condition_domains(rules: Iterable[Rule]) -> dict[str, set]:
    """Values each attribute is compared against in any condition."""
    dom: dict[str, set] = defaultdict(set)
    for r in rules:
        for c in r.clauses:
            for k, v in c.condition.tests:
                dom[k].add(v)
    return dom


def find_overlap(rule: Rule, domains: Mapping[str, Iterable] | None = None, limit: int = 1_000_000):
    """Search the attribute-domain product for a point matching two clauses.

    Domains cover every attribute tested by the rule's conditions. Each is the
    union of the supplied values, the values the conditions mention, and a
    catch-all standing for any other value (or absence). Returns
    ``(assignment, i, j)`` for the first overlap found or ``None``.
    """
    dom = condition_domains([rule])
    names = sorted(dom)
    axes = []
    for n in names:
        vals = set(dom[n]) | set((domains or {}).get(n, ()))
        axes.append(sorted(vals, key=repr) + [_OTHER])
    if math.prod(len(a) for a in axes) > limit:
        return _pairwise_overlap(rule)
    tests = [dict(c.condition.tests) if _consistent(c.condition.tests) else None for c in rule.clauses]
    for point in itertools.product(*axes):
        assign = dict(zip(names, point))
        hits = [
            i
            for i, t in enumerate(tests)
            if t is not None and all(assign[k] is not _OTHER and assign[k] == v for k, v in t.items())
        ]
        if len(hits) > 1:
            shown = {k: v for k, v in assign.items() if v is not _OTHER}
            return shown, hits[0], hits[1]
    return None


def _consistent(tests) -> bool:
    seen = {}
    for k, v in tests:
        if k in seen and seen[k] != v:
            return False
        seen[k] = v
    return True


def _pairwise_overlap(rule: Rule):
    # Two conjunctions can both hold iff they agree on every shared attribute.
    for (i, a), (j, b) in itertools.combinations(enumerate(rule.clauses), 2):
        if not (_consistent(a.condition.tests) and _consistent(b.condition.tests)):
            continue
        da, db = dict(a.condition.tests), dict(b.condition.tests)
        if all(da[k] == db[k] for k in da.keys() & db.keys()):
            return {**da, **db}, i, j
    return None


def check_exclusive(rule: Rule, domains: Mapping[str, Iterable] | None = None) -> None:
    for i, a in enumerate(rule.clauses):
        for j in range(i):
            if rule.clauses[j].condition == a.condition:
                raise RuleValidationError(
                    f"rule {rule.name}: clauses {j + 1} and {i + 1} have the same condition"
                )
    hit = find_overlap(rule, domains)
    if hit is not None:
        assign, i, j = hit
        raise RuleValidationError(
            f"rule {rule.name}: clauses {i + 1} and {j + 1} both match {assign}"
        )


def check_rule(rule: Rule, *, strict: bool = True, domains=None) -> None:
    """Static validation: exclusive clauses and sane constant probabilities."""
    check_exclusive(rule, domains)
    for n, c in enumerate(rule.clauses, 1):
        if not c.bundles:
            raise RuleValidationError(f"rule {rule.name}: clause {n} has no outcomes")
        consts = [b.probability for b in c.bundles if b.probability.is_constant() and not b.probability.names()]
        for e in consts:
            p = e.eval(Signature(), None)
            if not (-RANGE_TOL <= p <= 1 + RANGE_TOL):
                raise RuleValidationError(f"rule {rule.name}: clause {n} probability {p} outside [0, 1]")
        if len(consts) == len(c.bundles):
            total = math.fsum(e.eval(Signature(), None) for e in consts)
            if strict and abs(total - 1.0) > SUM_TOL:
                raise RuleValidationError(
                    f"rule {rule.name}: clause {n} probabilities sum to {total:.12g}, not 1"
                )
            if not strict and total > 1.0 + SUM_TOL:
                raise RuleValidationError(
                    f"rule {rule.name}: clause {n} probabilities sum to {total:.12g} > 1"
                )
