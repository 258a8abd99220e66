"""Shared builders for the test-suite: the two-rule flu example and random scenarios."""

import numpy as np

from pram import Group, Population, Signature, SiteRef
from pram.dsl import parse_rules
from pram.scenario import load_scenario, scenario_from_dict

ACCEPTANCE: list[str] = []


def report(label: str, ok: bool, detail: str = "") -> None:
    line = f"{label}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)


FLU_RULES = load_scenario("flu-two-rules").rules


def flu_rules():
    return list(FLU_RULES)


def sig(features=None, relations=None):
    return Signature.make(features or {}, relations or {})


def flu_sig(flu, mood, loc="adams", income="m"):
    return sig({"flu": flu, "mood": mood, "income": income}, {"has_location": loc})


def flu_pop():
    return Population(
        [Group(flu_sig("s", "happy"), 900, "g1"), Group(flu_sig("e", "annoyed"), 100, "g2")],
        [SiteRef("adams"), SiteRef("home")],
    )


SIR_TEXT = """
rule progression {{
  when flu == s => {{ {p!r} : set flu = e ; 1 - {p!r} : set flu = s }}
  when flu == e => {{ {q!r} : set flu = r ; 1 - {q!r} : set flu = e }}
}}
"""


def sir_rules(p, q):
    return parse_rules(SIR_TEXT.format(p=p, q=q))


def sir_pop(n1, n2):
    return Population([Group(sig({"flu": "s"}), n1, "g1"), Group(sig({"flu": "e"}), n2, "g2")])


# --- random scenarios -------------------------------------------------------

A_VALUES = [0, 1, 2]
B_VALUES = ["x", "y"]
SITES = ["p", "q"]


def _dist(rng, k):
    w = rng.dirichlet(np.ones(k))
    vals = [float(x) for x in w[:-1]]
    return vals


def _clause_body(rng, actions, dynamic):
    """Bundles for a list of action strings; probabilities constant or aggregate-driven."""
    k = len(actions)
    if dynamic and k == 2:
        pr = f"proportion(loc, a == {int(rng.integers(0, 3))})"
        probs = [pr, f"1 - {pr}"]
    else:
        head = _dist(rng, k)
        probs = [repr(x) for x in head] + ["1 - " + " - ".join(repr(x) for x in head) if head else "1"]
    return " ; ".join(f"{p} : {a}" for p, a in zip(probs, actions))


def random_scenario_dict(seed: int, stationary: bool = True, iterations: int = 10) -> dict:
    """A small random scenario over a in {0,1,2}, b in {x,y}, loc in {p,q}.

    Each rule writes its own attribute so joint outcomes never conflict; clause
    conditions split on one attribute's values, so clauses are exclusive.
    """
    rng = np.random.default_rng(seed)
    rules = []
    writers = {
        "ra": (lambda v: f"set a = {v}", A_VALUES),
        "rb": (lambda v: f"set b = {v}", B_VALUES),
        "rl": (lambda v: f"move loc -> {v}", SITES + ["current"]),
    }
    chosen = [n for n in writers if rng.random() < 0.7] or ["ra"]
    for name in chosen:
        mk, values = writers[name]
        cond_attr = rng.choice(["a", "b", "loc"])
        cond_vals = {"a": A_VALUES, "b": B_VALUES, "loc": SITES}[cond_attr]
        clauses = []
        for v in cond_vals:
            if clauses and rng.random() < 0.25:
                continue
            k = int(rng.integers(1, len(values) + 1))
            picks = list(rng.choice(len(values), size=k, replace=False))
            acts = [mk(values[i]) for i in picks]
            dynamic = not stationary and rng.random() < 0.5
            clauses.append(f"  when {cond_attr} == {v} => {{ {_clause_body(rng, acts, dynamic)} }}")
        rules.append(f"rule {name} {{\n" + "\n".join(clauses) + "\n}\n")
    groups = []
    seen = set()
    for i in range(int(rng.integers(1, 7))):
        a = int(rng.choice(A_VALUES))
        b = str(rng.choice(B_VALUES))
        loc = str(rng.choice(SITES))
        if (a, b, loc) in seen:
            continue
        seen.add((a, b, loc))
        groups.append({"name": f"g{i + 1}", "features": {"a": a, "b": b}, "relations": {"loc": loc},
                       "mass": float(rng.uniform(1, 1000))})
    return {
        "name": f"random-{seed}",
        "iterations": iterations,
        "sites": SITES,
        "groups": groups,
        "rules": rules,
        "probes": [{"name": f"a1_{s}", "site": s, "relation": "loc", "where": {"a": 1}} for s in SITES],
    }


def random_scenario(seed: int, stationary: bool = True, iterations: int = 10):
    return scenario_from_dict(random_scenario_dict(seed, stationary, iterations))
