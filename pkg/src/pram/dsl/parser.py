"""Tokenizer, recursive-descent parser and printer for the rule language.

::

    rule flu_progression {
      when flu == s => {
        proportion(has_location, flu == e) : set flu = e, set mood = annoyed ;
        1 - proportion(has_location, flu == e) : set flu = s
      }
    }

``move rel -> site``, ``move rel -> current`` and ``move rel -> @other_rel``
(copy the target of another relation) change relations. ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from pram.dsl.model import (
    BinOp,
    Bundle,
    Clause,
    Const,
    Expression,
    FeatureRef,
    MoveRelation,
    Neg,
    Proportion,
    Rule,
    SetFeature,
)
from pram.query import Predicate

KEYWORDS = {"rule", "when", "and", "set", "move", "current", "proportion"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|=>|->|[{}(),;:=+\-*/@])
    """,
    re.VERBOSE,
)


class RuleSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


class RuleValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            word = m.group()
            if kind == "ident" and word in KEYWORDS:
                kind = "kw"
            out.append(Token(kind, word, line, m.start() - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = tok.text or "end of input"
        raise RuleSyntaxError(f"{msg} (found {found!r})", tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        self.i += 1
        return self.toks[self.i - 1]

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            self.error(f"expected {what}")
        self.i += 1
        return self.toks[self.i - 1].text

    def symbol(self):
        tok = self.tok
        sign = -1 if self.accept("-") else 1
        tok2 = self.tok
        if tok2.kind == "ident" and sign == 1:
            self.i += 1
            return tok2.text
        if tok2.kind == "number" and re.fullmatch(r"\d+", tok2.text):
            self.i += 1
            return sign * int(tok2.text)
        self.error("expected a symbol (identifier or integer)", tok)

    # rule := 'rule' ident '{' clause* '}'
    def rules(self) -> list[Rule]:
        out = []
        while self.tok.kind != "eof":
            out.append(self.rule())
        return out

    def rule(self) -> Rule:
        self.expect("rule")
        name = self.ident("rule name")
        self.expect("{")
        clauses = []
        while not self.accept("}"):
            clauses.append(self.clause())
        return Rule(name, tuple(clauses))

    def clause(self) -> Clause:
        self.expect("when")
        cond = self.cond()
        self.expect("=>")
        self.expect("{")
        bundles = [self.bundle()]
        while self.accept(";"):
            if self.at("}"):
                break
            bundles.append(self.bundle())
        self.expect("}")
        return Clause(cond, tuple(bundles))

    def cond(self) -> Predicate:
        atoms = [self.atom()]
        while self.accept("and"):
            atoms.append(self.atom())
        return Predicate.of(atoms)

    def atom(self):
        name = self.ident("attribute name")
        self.expect("==")
        return name, self.symbol()

    def bundle(self) -> Bundle:
        prob = self.expr()
        self.expect(":")
        actions = []
        if not (self.at(";") or self.at("}")):
            actions.append(self.action())
            while self.accept(","):
                actions.append(self.action())
        return Bundle(prob, tuple(actions))

    def action(self):
        if self.accept("set"):
            name = self.ident("feature name")
            self.expect("=")
            return SetFeature(name, self.symbol())
        if self.accept("move"):
            name = self.ident("relation name")
            self.expect("->")
            if self.accept("current"):
                return MoveRelation(name, "current")
            if self.accept("@"):
                return MoveRelation(name, "relation", self.ident("relation name"))
            return MoveRelation(name, "site", self.ident("site id"))
        self.error("unknown action kind; expected 'set' or 'move'")

    # expr := term (('+'|'-') term)* ; term := factor (('*'|'/') factor)*
    def expr(self) -> Expression:
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.at("*") or self.at("/"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        tok = self.tok
        if self.accept("-"):
            return Neg(self.factor())
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if self.accept("proportion"):
            self.expect("(")
            rel = self.ident("relation name")
            where = Predicate()
            if self.accept(","):
                where = self.cond()
            self.expect(")")
            return Proportion(rel, where)
        if tok.kind == "number":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            return FeatureRef(tok.text)
        self.error("expected a probability expression")


def parse_rules(text: str, *, strict: bool = True) -> list[Rule]:
    """Parse zero or more rules and run the static checks on each."""
    from pram.dsl.evaluate import check_rule

    rules = _Parser(text).rules()
    seen = set()
    for r in rules:
        if r.name in seen:
            raise RuleValidationError(f"duplicate rule name {r.name!r}")
        seen.add(r.name)
        check_rule(r, strict=strict)
    return rules


def parse_rule(text: str, *, strict: bool = True) -> Rule:
    rules = parse_rules(text, strict=strict)
    if len(rules) != 1:
        raise RuleValidationError(f"expected exactly one rule, found {len(rules)}")
    return rules[0]


def parse_expression(text: str) -> Expression:
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "eof":
        p.error("trailing input after expression")
    return node


# --- printing --------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def unparse_expr(e: Expression) -> str:
    if isinstance(e, Const):
        if e.value < 0:
            return f"-{_num(-e.value)}"
        return _num(e.value)
    if isinstance(e, FeatureRef):
        return e.name
    if isinstance(e, Proportion):
        if e.where.tests:
            return f"proportion({e.relation}, {unparse_cond(e.where)})"
        return f"proportion({e.relation})"
    if isinstance(e, Neg):
        return f"-({unparse_expr(e.operand)})"
    if isinstance(e, BinOp):
        def side(x):
            s = unparse_expr(x)
            return f"({s})" if isinstance(x, BinOp) else s

        return f"{side(e.left)} {e.op} {side(e.right)}"
    raise TypeError(e)


def unparse_cond(c: Predicate) -> str:
    return " and ".join(f"{k} == {v}" for k, v in c.tests)


def unparse_action(a) -> str:
    if isinstance(a, SetFeature):
        return f"set {a.name} = {a.value}"
    if a.kind == "current":
        return f"move {a.name} -> current"
    if a.kind == "relation":
        return f"move {a.name} -> @{a.to}"
    return f"move {a.name} -> {a.to}"


def unparse_rule(rule: Rule) -> str:
    lines = [f"rule {rule.name} {{"]
    for c in rule.clauses:
        lines.append(f"  when {unparse_cond(c.condition)} => {{")
        parts = []
        for b in c.bundles:
            acts = ", ".join(unparse_action(a) for a in b.actions)
            parts.append(f"    {unparse_expr(b.probability)} : {acts}".rstrip())
        lines.append(" ;\n".join(parts))
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
