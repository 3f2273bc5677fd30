import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from valuespace.agents import AbstractBeing, Agent, ValueSpace
from valuespace.errors import DimensionMismatch, HypothesisViolated, ZeroVector
from valuespace.dynamics import (
    GoalUpdateRule,
    HullRole,
    ValuationUpdateRule,
    check_coordination,
    convex_hull_leadership_check,
    decay_update,
    identity_update,
    injection_update,
    run_lifecycle,
    run_valuation_convergence,
    track_motivational_convergence,
    update_goal,
)
from valuespace.network import Edge, InfluenceGraph, SimulationConfig

vec = arrays(float, 3, elements=st.floats(-3, 3))


def agent(x=(0.0, 0.0, 0.0), g=(0.0, 0.0, 0.0)):
    return Agent("a", ValueSpace(len(x)), current_state=x, goal_state=g)


def test_goal_update_examples():
    a = agent([0.4, 0.2, 0.5], [0.5, 0.3, 0.6])
    x = [0.9, 0.7, 0.4]
    assert np.allclose(update_goal(a, x, GoalUpdateRule.convex_blend(0.6)).goal_state, [0.74, 0.54, 0.48])
    assert np.array_equal(update_goal(a, x, GoalUpdateRule.convex_blend(0.0)).goal_state, a.goal_state)
    assert np.array_equal(update_goal(a, x, GoalUpdateRule.convex_blend(1.0)).goal_state, x)
    additive = update_goal(a, x, GoalUpdateRule.additive(lambda k: 2.0 * k), step=3)
    assert np.allclose(additive.goal_state, np.array([0.5, 0.3, 0.6]) + 6.0 * np.array(x))
    with pytest.raises(DimensionMismatch):
        update_goal(a, [1.0], GoalUpdateRule.convex_blend(0.5))
    with pytest.raises(ValueError):
        GoalUpdateRule.convex_blend(1.5)


@given(vec, vec, st.floats(0, 1))
def test_convex_blend_stays_on_segment(g, x, alpha):
    g2 = update_goal(agent(g=g), x, GoalUpdateRule.convex_blend(alpha)).goal_state
    lhs = np.linalg.norm(g2 - g) + np.linalg.norm(g2 - x)
    assert lhs == pytest.approx(np.linalg.norm(g - x), abs=1e-10)


def test_convergence_closed_form():
    limit = np.array([0.0, 1.0, 0.0])
    a = agent([0.2, 0.1, -0.3], [0.5, -0.2, 0.4])
    k = 1000
    cos = track_motivational_convergence(a, np.tile(limit, (k, 1)), limit, GoalUpdateRule.additive(float))
    m0 = a.goal_state - a.current_state
    steps = np.arange(1, k + 1)
    # oracle: M_k / beta_k = limit + M0 / k
    direction = limit[None, :] + m0[None, :] / steps[:, None]
    oracle = direction @ limit / np.linalg.norm(direction, axis=1)
    assert np.allclose(cos, oracle, atol=1e-12)
    assert np.all(np.diff(cos) >= -1e-15)
    assert cos[-1] >= 0.999


def test_convergence_zero_initial_gradient():
    a = agent([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
    limit = np.array([1.0, -2.0, 0.5])
    cos = track_motivational_convergence(a, np.tile(limit, (5, 1)), limit, GoalUpdateRule.additive(float))
    assert np.allclose(cos, 1.0)
    with pytest.raises(ZeroVector):
        track_motivational_convergence(a, np.tile(limit, (5, 1)), np.zeros(3), GoalUpdateRule.additive(float))


@given(st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_convergence_rate(n, seed):
    rng = np.random.default_rng(seed)
    limit = rng.normal(size=n)
    m0 = rng.normal(size=n)
    a = Agent("a", ValueSpace(n), current_state=np.zeros(n), goal_state=m0)
    k = 10_000
    cos = track_motivational_convergence(a, np.tile(limit, (k, 1)), limit, GoalUpdateRule.additive(float))
    # fitted constant: with beta_k = k, 1 - cos <= c / k for c = 2 ||M0|| / ||limit|| (any k where ||M0||/k < ||limit||)
    c = 2 * np.linalg.norm(m0) / np.linalg.norm(limit)
    steps = np.arange(1, k + 1)
    ok = steps > 2 * c
    assert np.all(1 - cos[ok] <= c / steps[ok] + 1e-12)
    assert cos[-1] >= 1 - 1e-3


def test_coordination_examples():
    x_l = np.array([0.9, 0.6, 0.3])
    assert check_coordination([("a", x_l), ("b", x_l.copy())], x_l, 1e-9, 1e-9).coordinated
    rep = check_coordination([("a", x_l), ("z", np.zeros(3))], x_l, 0.1, 0.1)
    assert not rep.coordinated
    assert [v.structural_ok for v in rep.verdicts] == [True, False]
    with pytest.raises(DimensionMismatch):
        check_coordination([("a", [1.0])], x_l, 0.1, 0.1)


def _chain(n, p=1.0):
    nodes = ("L",) + tuple(f"F{i}" for i in range(n))
    return InfluenceGraph(nodes, tuple(Edge(a, b, p) for a, b in zip(nodes, nodes[1:])))


def _scalar_oracle(init, leader, alpha, steps):
    """Synchronous chain recurrence: F_i moves toward F_{i-1} once F_{i-1} holds the being."""
    vals = [leader] + list(init)
    holds = [True] + [False] * len(init)
    rows = [list(init)]
    for _ in range(steps):
        snap, held = list(vals), list(holds)
        for i in range(1, len(vals)):
            if held[i - 1]:
                vals[i] = (1 - alpha) * vals[i] + alpha * snap[i - 1]
                holds[i] = True
        rows.append(vals[1:])
    return rows


def test_valuation_convergence_matches_recurrence():
    res = run_valuation_convergence({"F0": 0.2, "F1": 0.5}, 1.2, "L", _chain(2), ValuationUpdateRule(0.5),
                                    SimulationConfig(max_steps=40))
    table = res.runs[0].table
    oracle = _scalar_oracle([0.2, 0.5], 1.2, 0.5, 40)
    assert np.allclose([[row["F0"], row["F1"]] for row in table], oracle, atol=1e-14)
    assert abs(table[-1]["F1"] - 1.2) < 1e-6
    for f in ("F0",):
        d = [abs(r[f] - 1.2) for r in table]
        assert all(b <= a for a, b in zip(d, d[1:]))


def test_alpha_one_copies_influencer():
    res = run_valuation_convergence({"F0": 0.2}, 1.2, "L", _chain(1), ValuationUpdateRule(1.0),
                                    SimulationConfig(max_steps=1))
    assert res.runs[0].table[1]["F0"] == 1.2


def test_hypothesis_gate_warns():
    with pytest.warns(HypothesisViolated):
        res = run_valuation_convergence({"F0": 0.0, "F1": 1.0}, 0.5, "L", _chain(2), ValuationUpdateRule(0.5),
                                        SimulationConfig(max_steps=3))
    assert not res.hypothesis_holds


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=5), st.floats(0.01, 1), st.floats(0.05, 1),
       st.integers(0, 1000), st.booleans())
def test_chain_from_leader_is_monotone(init, gap, alpha, seed, above):
    # on a chain ordered by distance to the leader every follower approaches monotonically
    leader = (max(init) + gap) if above else (min(init) - gap)
    init = sorted(init, key=lambda v: abs(v - leader))
    ids = {f"F{i}": v for i, v in enumerate(init)}
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = run_valuation_convergence(ids, leader, "L", _chain(len(init), 0.6), ValuationUpdateRule(alpha),
                                        SimulationConfig(seed=seed, max_steps=20, replicates=3))
    assert res.monotone
    assert all(not r.envelope_violations for r in res.runs)


def test_hull_role_examples():
    group = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 1.0]]
    assert convex_hull_leadership_check(group, [0.6, 0.6, 1.0]) is HullRole.INNOVATOR
    assert convex_hull_leadership_check(group, group[0]) is HullRole.INTERPOLATOR
    assert convex_hull_leadership_check(group, np.mean(group, axis=0)) is HullRole.INTERPOLATOR


POP = [Agent(f"A{i}", ValueSpace(3)) for i in range(3)]


def test_lifecycle_identity_never_dies():
    x = AbstractBeing("x", {"A0": [0.9, 0.4, 0.1]})
    _, rec = run_lifecycle(x, POP, identity_update, 50)
    assert rec.birth_step == 0 and rec.death_step is None


def test_lifecycle_decay_death_step():
    x = AbstractBeing("x", {"A0": [1.0, 0.0, 0.0]})
    _, rec = run_lifecycle(x, POP, decay_update(0.5), 40, threshold=1e-6)
    # oracle: smallest k with 0.5^k <= 1e-6
    k = next(k for k in range(100) if 0.5 ** k <= 1e-6)
    assert k == 20
    assert rec.death_step == k


def test_lifecycle_injection_birth():
    x = AbstractBeing("x", {})
    _, rec = run_lifecycle(x, POP, injection_update(3, "A1", [0.0, 1.0, 0.0]), 6)
    assert rec.birth_step == 3 and rec.death_step is None


@given(st.floats(0.05, 0.95), st.floats(0.1, 10), st.sampled_from([1e-3, 1e-6, 1e-9]))
def test_death_step_is_minimal(factor, start, thr):
    x = AbstractBeing("x", {"A2": [start, 0.0, 0.0]})
    _, rec = run_lifecycle(x, POP, decay_update(factor), 500, threshold=thr)
    norms = dict(rec.norms)
    assert rec.death_step is not None and rec.death_step > rec.birth_step
    assert max(norms[rec.death_step].values()) <= thr
    assert max(norms[rec.death_step - 1].values()) > thr
    assert all(max(norms[s].values()) <= thr for s in norms if s >= rec.death_step)
