"""Tree-shaped rule encoding used inside scenario files.

A structured rule is a mapping::

    name: flu_location
    clauses:
      - when: {flu: e, income: l}
        outcomes:
          - p: 0.1
            do: [{move: has_location, to: home}]
          - p: {sub: [1, 0.1]}
            do: [{move: has_location, to: current}]

Probabilities are numbers or single-key operator nodes: ``const``,
``feature``, ``proportion: {relation, where}``, ``add``/``sub``/``mul``/``div``
(two operands) and ``neg``. ``move ... to: {relation: r}`` copies the target
of relation ``r``. Both this form and DSL text become the same :class:`Rule`.
"""

from __future__ import annotations

import jsonschema

from pram.dsl.evaluate import check_rule
from pram.dsl.model import (
    BinOp,
    Bundle,
    Clause,
    Const,
    FeatureRef,
    MoveRelation,
    Neg,
    Proportion,
    Rule,
    SetFeature,
)
from pram.dsl.parser import RuleValidationError
from pram.query import Predicate

_SYMBOL = {"type": ["string", "integer"]}
_COND = {"type": "object", "additionalProperties": _SYMBOL}

RULE_SCHEMA = {
    "$defs": {
        "expr": {
            "oneOf": [
                {"type": "number"},
                {"type": "object", "required": ["const"], "additionalProperties": False,
                 "properties": {"const": {"type": "number"}}},
                {"type": "object", "required": ["feature"], "additionalProperties": False,
                 "properties": {"feature": {"type": "string"}}},
                {"type": "object", "required": ["proportion"], "additionalProperties": False,
                 "properties": {"proportion": {
                     "type": "object", "required": ["relation"], "additionalProperties": False,
                     "properties": {"relation": {"type": "string"}, "where": _COND}}}},
                {"type": "object", "required": ["neg"], "additionalProperties": False,
                 "properties": {"neg": {"$ref": "#/$defs/expr"}}},
                *[
                    {"type": "object", "required": [op], "additionalProperties": False,
                     "properties": {op: {"type": "array", "minItems": 2, "maxItems": 2,
                                         "items": {"$ref": "#/$defs/expr"}}}}
                    for op in ("add", "sub", "mul", "div")
                ],
            ]
        },
        "action": {
            "oneOf": [
                {"type": "object", "required": ["set", "to"], "additionalProperties": False,
                 "properties": {"set": {"type": "string"}, "to": _SYMBOL}},
                {"type": "object", "required": ["move", "to"], "additionalProperties": False,
                 "properties": {"move": {"type": "string"}, "to": {"oneOf": [
                     {"type": "string"},
                     {"type": "object", "required": ["relation"], "additionalProperties": False,
                      "properties": {"relation": {"type": "string"}}}]}}},
            ]
        },
    },
    "type": "object",
    "required": ["name", "clauses"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "clauses": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["when", "outcomes"],
                "additionalProperties": False,
                "properties": {
                    "when": {**_COND, "minProperties": 1},
                    "outcomes": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["p"],
                            "additionalProperties": False,
                            "properties": {
                                "p": {"$ref": "#/$defs/expr"},
                                "do": {"type": "array", "items": {"$ref": "#/$defs/action"}},
                            },
                        },
                    },
                },
            },
        },
    },
}

_BINOPS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _expr(node):
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return Neg(Const(float(-node))) if node < 0 else Const(float(node))
    (op, arg), = node.items()
    if op == "const":
        return _expr(arg)
    if op == "feature":
        return FeatureRef(arg)
    if op == "proportion":
        return Proportion(arg["relation"], Predicate.of(arg.get("where", {})))
    if op == "neg":
        return Neg(_expr(arg))
    return BinOp(_BINOPS[op], _expr(arg[0]), _expr(arg[1]))


def _action(node):
    if "set" in node:
        return SetFeature(node["set"], node["to"])
    to = node["to"]
    if isinstance(to, dict):
        return MoveRelation(node["move"], "relation", to["relation"])
    if to == "current":
        return MoveRelation(node["move"], "current")
    return MoveRelation(node["move"], "site", to)


def rule_from_tree(tree: dict, *, strict: bool = True) -> Rule:
    try:
        jsonschema.validate(tree, RULE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise RuleValidationError(f"structured rule invalid at {where}: {exc.message}") from None
    clauses = tuple(
        Clause(
            Predicate.of(c["when"]),
            tuple(Bundle(_expr(o["p"]), tuple(_action(a) for a in o.get("do", []))) for o in c["outcomes"]),
        )
        for c in tree["clauses"]
    )
    rule = Rule(tree["name"], clauses)
    check_rule(rule, strict=strict)
    return rule


def _expr_tree(e):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, FeatureRef):
        return {"feature": e.name}
    if isinstance(e, Proportion):
        inner = {"relation": e.relation}
        if e.where.tests:
            inner["where"] = dict(e.where.tests)
        return {"proportion": inner}
    if isinstance(e, Neg):
        return {"neg": _expr_tree(e.operand)}
    op = {v: k for k, v in _BINOPS.items()}[e.op]
    return {op: [_expr_tree(e.left), _expr_tree(e.right)]}


def _action_tree(a):
    if isinstance(a, SetFeature):
        return {"set": a.name, "to": a.value}
    if a.kind == "relation":
        return {"move": a.name, "to": {"relation": a.to}}
    return {"move": a.name, "to": "current" if a.kind == "current" else a.to}


def rule_to_tree(rule: Rule) -> dict:
    return {
        "name": rule.name,
        "clauses": [
            {
                "when": dict(c.condition.tests),
                "outcomes": [
                    {"p": _expr_tree(b.probability), "do": [_action_tree(a) for a in b.actions]}
                    for b in c.bundles
                ],
            }
            for c in rule.clauses
        ],
    }
