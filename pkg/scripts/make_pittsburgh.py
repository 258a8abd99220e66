"""Generate the pittsburgh-23 built-in scenario.

23 synthetic schools, each of one age band. Sick students go home with
probability 0.9 (pre-school), 0.5 (middle school) or 0.1 (high school).
School sizes are drawn from a seeded RNG; they are placeholders, not real
enrolments, so the fixture reproduces the structure of the model only.

    python3 scripts/make_pittsburgh.py > src/pram/scenarios/pittsburgh-23.yaml
"""

import argparse
import sys

import numpy as np
import yaml

GO_HOME = {"pre": 0.9, "middle": 0.5, "high": 0.1}


def build(n_schools=23, seed=2019, iterations=50):
    rng = np.random.default_rng(seed)
    bands = ["pre"] * 8 + ["middle"] * 7 + ["high"] * 8
    schools = [f"school_{i:02d}" for i in range(1, n_schools + 1)]
    sizes = rng.integers(200, 2000, size=n_schools)
    seeded = rng.integers(1, 20, size=n_schools)

    groups = []
    for sch, band, size, sick in zip(schools, bands, sizes, seeded):
        rel = {"has_school": sch, "has_location": sch}
        groups.append({"features": {"flu": "s", "band": band}, "relations": rel, "mass": int(size - sick)})
        groups.append({"features": {"flu": "e", "band": band}, "relations": rel, "mass": int(sick)})

    infect = "\n".join(
        f"  when flu == s and has_location == {sch} => {{\n"
        f"    proportion(has_location, flu == e) : set flu = e ;\n"
        f"    1 - proportion(has_location, flu == e) : set flu = s\n  }}"
        for sch in schools
    )
    progression = (
        "rule flu_progression {\n" + infect + "\n"
        "  when flu == e => { 0.2 : set flu = r ; 0.8 : set flu = e }\n"
        "  when flu == r => { 0.9 : set flu = r ; 0.1 : set flu = s }\n}\n"
    )
    sick_home = "\n".join(
        f"  when flu == e and band == {b} => {{ {p} : move has_location -> home ; "
        f"{round(1 - p, 10)} : move has_location -> current }}"
        for b, p in GO_HOME.items()
    )
    location = (
        "rule flu_location {\n" + sick_home + "\n"
        "  when flu == r => { 0.8 : move has_location -> @has_school ; 0.2 : move has_location -> current }\n"
        "  when flu == s and has_location == home => "
        "{ 0.8 : move has_location -> @has_school ; 0.2 : move has_location -> current }\n}\n"
    )
    return {
        "name": "pittsburgh-23",
        "description": "Structural reproduction with synthetic school sizes (seed "
        f"{seed}); not real enrolment data.",
        "iterations": iterations,
        "sites": [{"id": s} for s in schools] + [{"id": "home"}],
        "groups": groups,
        "rules": [progression, location],
        "probes": [
            {"name": f"exposed_{s}", "site": s, "relation": "has_school", "where": {"flu": "e"}, "kind": "proportion"}
            for s in schools
        ],
    }


class _Literal(str):
    pass


def _literal(dumper, data):
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style="|")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=2019)
    ap.add_argument("--iterations", type=int, default=50)
    args = ap.parse_args()
    doc = build(seed=args.seed, iterations=args.iterations)
    doc["rules"] = [_Literal(r) for r in doc["rules"]]
    yaml.SafeDumper.add_representer(_Literal, _literal)
    yaml.safe_dump(doc, sys.stdout, sort_keys=False, default_flow_style=None, width=120)
