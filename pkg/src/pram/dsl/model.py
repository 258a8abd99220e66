"""Rule values: expressions, conditions, actions, bundles, clauses, rules."""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Union

from pram.core import AttrValue, Signature
from pram.query import Predicate, RuleEvaluationError, Snapshot, proportion_at

Condition = Predicate


# --- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float

    def eval(self, sig: Signature, snap: Snapshot) -> float:
        return self.value

    def is_constant(self) -> bool:
        return True

    def names(self) -> set[str]:
        return set()


@dataclass(frozen=True)
class FeatureRef:
    name: str

    def eval(self, sig: Signature, snap: Snapshot) -> float:
        v = sig.feature_map.get(self.name)
        if v is None:
            raise RuleEvaluationError(f"group {sig.key} has no feature {self.name!r}")
        if not isinstance(v, int):
            raise RuleEvaluationError(f"feature {self.name!r}={v!r} is not numeric")
        return float(v)

    def is_constant(self) -> bool:
        # depends on the group, never on the population
        return True

    def names(self) -> set[str]:
        return {self.name}


@dataclass(frozen=True)
class Proportion:
    """Share of mass at the group's ``relation`` target that satisfies ``where``."""

    relation: str
    where: Predicate = Predicate()

    def eval(self, sig: Signature, snap: Snapshot) -> float:
        site = sig.relation_map.get(self.relation)
        if site is None:
            raise RuleEvaluationError(f"group {sig.key} has no relation {self.relation!r}")
        return proportion_at(site, self.relation, self.where, snap)

    def is_constant(self) -> bool:
        return False

    def names(self) -> set[str]:
        return {self.relation} | {k for k, _ in self.where.tests}


_OPS = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": operator.truediv}


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expression
    right: Expression

    def eval(self, sig: Signature, snap: Snapshot) -> float:
        a = self.left.eval(sig, snap)
        b = self.right.eval(sig, snap)
        if self.op == "/" and b == 0:
            raise RuleEvaluationError("division by zero in probability expression")
        return _OPS[self.op](a, b)

    def is_constant(self) -> bool:
        return self.left.is_constant() and self.right.is_constant()

    def names(self) -> set[str]:
        return self.left.names() | self.right.names()


@dataclass(frozen=True)
class Neg:
    operand: Expression

    def eval(self, sig: Signature, snap: Snapshot) -> float:
        return -self.operand.eval(sig, snap)

    def is_constant(self) -> bool:
        return self.operand.is_constant()

    def names(self) -> set[str]:
        return self.operand.names()


Expression = Union[Const, FeatureRef, Proportion, BinOp, Neg]


def is_stationary(expr: Expression) -> bool:
    """True when ``expr`` never reads population aggregates."""
    return expr.is_constant()


# --- actions ---------------------------------------------------------------


@dataclass(frozen=True)
class SetFeature:
    name: str
    value: AttrValue

    @property
    def target(self) -> str:
        return self.name

    def names(self) -> set[str]:
        return {self.name}


@dataclass(frozen=True)
class MoveRelation:
    """Point relation ``name`` at a site.

    ``to`` is a site id when ``kind == "site"``, the name of another relation
    whose current target is copied when ``kind == "relation"``, and unused for
    ``kind == "current"`` (stay put).
    """

    name: str
    kind: str
    to: str = ""

    @property
    def target(self) -> str:
        return self.name

    def names(self) -> set[str]:
        return {self.name, self.to} if self.kind == "relation" else {self.name}

    def resolve(self, sig: Signature, pending: dict[str, str] | None = None) -> str:
        if self.kind == "site":
            return self.to
        ref = self.name if self.kind == "current" else self.to
        site = (pending or {}).get(ref) or sig.relation_map.get(ref)
        if site is None:
            raise RuleEvaluationError(f"group {sig.key} has no relation {ref!r}")
        return site


Action = Union[SetFeature, MoveRelation]


@dataclass(frozen=True)
class Bundle:
    probability: Expression
    actions: tuple[Action, ...] = ()


@dataclass(frozen=True)
class Clause:
    condition: Condition
    bundles: tuple[Bundle, ...]


@dataclass(frozen=True)
class Rule:
    name: str
    clauses: tuple[Clause, ...] = ()

    def is_stationary(self) -> bool:
        return all(is_stationary(b.probability) for c in self.clauses for b in c.bundles)

    def names(self) -> set[str]:
        """Every attribute this rule tests, reads or writes."""
        out: set[str] = set()
        for c in self.clauses:
            out |= {k for k, _ in c.condition.tests}
            for b in c.bundles:
                out |= b.probability.names()
                for a in b.actions:
                    out |= a.names()
        return out

    def __str__(self) -> str:
        from pram.dsl.parser import unparse_rule

        return unparse_rule(self)


def apply_bundle(sig: Signature, bundle: Bundle | tuple[Action, ...]) -> Signature:
    """Apply a bundle's actions in order; attributes not touched are kept."""
    actions = bundle.actions if isinstance(bundle, Bundle) else bundle
    if not actions:
        return sig
    feats: dict[str, AttrValue] = {}
    rels: dict[str, str] = {}
    for a in actions:
        if isinstance(a, SetFeature):
            feats[a.name] = a.value
        else:
            rels[a.name] = a.resolve(sig, rels)
    return sig.replace(feats, rels)
