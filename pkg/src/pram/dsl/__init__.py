from pram.dsl.evaluate import Distribution, check_exclusive, check_rule, evaluate, find_overlap
from pram.dsl.model import (
    Action,
    BinOp,
    Bundle,
    Clause,
    Condition,
    Const,
    Expression,
    FeatureRef,
    MoveRelation,
    Neg,
    Proportion,
    Rule,
    SetFeature,
    apply_bundle,
)
from pram.dsl.parser import (
    RuleSyntaxError,
    RuleValidationError,
    parse_expression,
    parse_rule,
    parse_rules,
    unparse_rule,
)
from pram.dsl.structured import rule_from_tree, rule_to_tree

__all__ = [
    "Action",
    "BinOp",
    "Bundle",
    "Clause",
    "Condition",
    "Const",
    "Distribution",
    "Expression",
    "FeatureRef",
    "MoveRelation",
    "Neg",
    "Proportion",
    "Rule",
    "RuleSyntaxError",
    "RuleValidationError",
    "SetFeature",
    "apply_bundle",
    "check_exclusive",
    "check_rule",
    "evaluate",
    "find_overlap",
    "parse_expression",
    "parse_rule",
    "parse_rules",
    "rule_from_tree",
    "rule_to_tree",
    "unparse_rule",
]
