import numpy as np
import pytest

from pram import Group, Population, run
from pram.dsl import parse_rules
from pram.oracle import (
    StateSpaceError,
    StationarityError,
    allocate_agents,
    build_transition_matrix,
    markov_expected_counts,
    markov_trajectory,
    signature_closure,
    simulate_agents,
)
from helpers import flu_pop, flu_rules, flu_sig, sig, sir_pop, sir_rules

SIR = [sig({"flu": v}) for v in "ser"]


def test_sir_matrix_rows():
    tm = build_transition_matrix(sir_rules(0.1, 0.2), SIR)
    np.testing.assert_allclose(tm.matrix, [[0.9, 0.1, 0], [0, 0.8, 0.2], [0, 0, 1]])


def test_identity_actions_give_identity_matrix():
    rules = parse_rules("rule r { when flu == s => { 1 : } when flu == e => { 1 : set flu = e } }")
    assert (build_transition_matrix(rules, SIR).matrix == np.eye(3)).all()


def test_expected_counts():
    tm = build_transition_matrix(sir_rules(0.1, 0.2), SIR)
    np.testing.assert_allclose(markov_expected_counts(tm, [900, 100, 0], 1), [810, 170, 20])
    assert list(markov_expected_counts(tm, [900, 100, 0], 0)) == [900, 100, 0]
    assert list(markov_expected_counts(np.eye(3), [1, 2, 3], 7)) == [1, 2, 3]
    with pytest.raises(ValueError):
        markov_expected_counts(tm, [1, 2], 1)


def test_rows_are_stochastic():
    rules = flu_rules()[1:]  # location rule alone is stationary
    space = signature_closure(rules, [flu_sig("e", "annoyed", income=i) for i in "lmh"])
    m = build_transition_matrix(rules, space).matrix
    np.testing.assert_allclose(m.sum(axis=1), 1, atol=1e-12)
    assert (m >= 0).all()


def test_constant_clause_pair_matches_potentials():
    prog = parse_rules("""
    rule flu_progression {
      when flu == e => {
        0.2 : set flu = r, set mood = happy ;
        0.5 : set flu = e, set mood = bored ;
        0.3 : set flu = e, set mood = annoyed
      }
    }""")
    rules = prog + flu_rules()[1:]
    start = flu_sig("e", "annoyed")
    tm = build_transition_matrix(rules, signature_closure(rules, [start]))
    row = tm.matrix[tm.index[start.key]]
    expected = {
        flu_sig("r", "happy", "home"): 0.12, flu_sig("r", "happy"): 0.08,
        flu_sig("e", "bored", "home"): 0.30, flu_sig("e", "bored"): 0.20,
        flu_sig("e", "annoyed", "home"): 0.18, flu_sig("e", "annoyed"): 0.12,
    }
    for s, p in expected.items():
        assert row[tm.index[s.key]] * 100 == pytest.approx(p * 100, abs=1e-12)


def test_non_stationary_rejected():
    with pytest.raises(StationarityError):
        build_transition_matrix(flu_rules(), [])


def test_closure_limit():
    rules = parse_rules("rule r { when flu == s => { 0.5 : set flu = e ; 0.5 : set flu = r } }")
    with pytest.raises(StateSpaceError):
        signature_closure(rules, [sig({"flu": "s"})], limit=2)


def test_markov_trajectory_matches_engine():
    rules = sir_rules(0.1, 0.2)
    traj = run(sir_pop(900, 100), rules, 20)
    mk = markov_trajectory(sir_pop(900, 100), rules, 20)
    for t in range(21):
        eng = traj.at(t)
        for k, v in mk[t].items():
            assert eng.get(k, 0.0) == pytest.approx(v, abs=1e-9)


def test_allocate_agents():
    pop = Population([Group(sig({"a": 1}), 1.0), Group(sig({"a": 2}), 1.0), Group(sig({"a": 3}), 1.0)])
    counts = allocate_agents(pop, 10)
    assert sum(counts.values()) == 10 and sorted(counts.values()) == [3, 3, 4]
    assert sum(allocate_agents(flu_pop()).values()) == 1000


def test_degenerate_rules_reproduce_engine():
    rules = sir_rules(1.0, 0.0)
    mc = simulate_agents(sir_pop(900, 100), rules, 3, seed=1, replicates=5)
    assert (mc.samples == mc.samples[0]).all()
    eng = run(sir_pop(900, 100), rules, 3).at(3)
    assert mc.mean == {k: pytest.approx(v) for k, v in eng.items()}


def test_sir_monte_carlo_within_band():
    rules = sir_rules(0.1, 0.2)
    mc = simulate_agents(sir_pop(9000, 1000), rules, 5, seed=3, replicates=50)
    mk = markov_trajectory(sir_pop(9000, 1000), rules, 5)[5]
    for k, v in mk.items():
        assert abs(mc.mean[k] - v) <= 4 * mc.stderr[k]


def test_seeded_reproducibility():
    a = simulate_agents(flu_pop(), flu_rules(), 2, seed=42, replicates=4)
    b = simulate_agents(flu_pop(), flu_rules(), 2, seed=42, replicates=4, threads=3)
    c = simulate_agents(flu_pop(), flu_rules(), 2, seed=43, replicates=4)
    assert (a.samples == b.samples).all()
    assert not (a.samples == c.samples).all()


@pytest.mark.slow
def test_monte_carlo_band_at_three_sizes():
    eng = run(flu_pop(), flu_rules(), 1).at(1)
    for n in (1_000, 10_000, 100_000):
        mc = simulate_agents(flu_pop(), flu_rules(), 1, seed=n, replicates=30, agents=n)
        for k, v in eng.items():
            assert abs(mc.mean[k] - v * mc.scale) <= 4 * mc.stderr[k] + 1e-9, (n, k)
