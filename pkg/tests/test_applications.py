import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from valuespace.agents import Agent, ValuationFunction, ValueSpace
from valuespace.applications import (
    Emotion,
    EmotionInput,
    GroupContext,
    classify_emotion,
    deviance_report,
    elect_leader,
    group_score,
    marketing_intervention,
    outgroup_contrast,
    reachable_within,
)
from valuespace.errors import DimensionMismatch, DuplicateAxisLabel, MissingMap, NoCandidates
from valuespace.interpretation import InterpretationMap

small = st.floats(-3, 3)
vec2 = arrays(float, 2, elements=small)
VALS = {"F1": ValuationFunction.linear([2.0, 0.5]), "F2": ValuationFunction.linear([2.0, 1.0])}


def test_group_score_with_cross_maps():
    maps = {("A", "F1"): InterpretationMap("A", "F1", np.diag([1.0, 0.0])),
            ("A", "F2"): InterpretationMap("A", "F2", np.eye(2))}
    # F1 sees (1, 0) -> 2.0, F2 sees (1, 0.2) -> 2.2
    assert group_score("A", [1.0, 0.2], ["F1", "F2"], maps, VALS) == pytest.approx(2.1)
    with pytest.raises(MissingMap):
        group_score("B", [1.0, 0.2], ["F1", "F2"], maps, VALS)
    with pytest.raises(MissingMap):
        group_score("A", [1.0, 0.2], ["F1", "F3"], None, VALS)
    with pytest.raises(ValueError):
        group_score("A", [1.0, 0.2], [], None, VALS)


def test_election_edge_cases():
    with pytest.raises(NoCandidates):
        elect_leader([], ["F1"], None, VALS)
    tie = [("zed", [1.0, 0.0]), ("amy", [1.0, 0.0])]
    assert elect_leader(tie, ["F1", "F2"], None, VALS) == "amy"


@given(vec2, vec2, small, small)
def test_group_score_is_linear(u, w, a, b):
    f = ["F1", "F2"]
    lhs = group_score("A", a * u + b * w, f, None, VALS)
    rhs = a * group_score("A", u, f, None, VALS) + b * group_score("A", w, f, None, VALS)
    assert lhs == pytest.approx(rhs, abs=1e-10 * max(1.0, abs(lhs)))


@given(st.lists(vec2, min_size=1, max_size=5), st.floats(0.01, 100))
def test_election_is_scale_invariant(stances, s):
    cands = [(f"c{i}", x) for i, x in enumerate(stances)]
    scaled = {k: ValuationFunction.linear(s * v.weights) for k, v in VALS.items()}
    # exact ties can break differently after rounding; require a clear winner
    scores = sorted(group_score(c, x, ["F1", "F2"], None, VALS) for c, x in cands)
    assume(len(scores) == 1 or scores[-1] - scores[-2] > 1e-9 * max(1.0, abs(scores[-1])))
    assert elect_leader(cands, ["F1", "F2"], None, VALS) == elect_leader(cands, ["F1", "F2"], None, scaled)


def test_group_context_validation():
    with pytest.raises(ValueError):
        GroupContext(("F1",), prototype=None)
    with pytest.raises(MissingMap):
        GroupContext(("F1",), np.zeros(2), group_map={})
    with pytest.raises(DimensionMismatch):
        GroupContext(("F1",), np.zeros(2), group_map={"F1": InterpretationMap("F1", "G", np.eye(3))})
    ctx = GroupContext(("F1",), np.array([1.0, 0.0]), group_map={"F1": InterpretationMap("F1", "G", np.eye(2))})
    with pytest.raises(MissingMap):
        deviance_report("K", [1.0, 0.0], ctx)
    assert deviance_report("F1", [1.0, 0.0], ctx).distance == 0.0


@given(vec2, vec2)
def test_reward_decreases_punishment_increases(a, b):
    ctx = GroupContext(("F1",), np.array([1.0, 0.2]))
    ra, rb = deviance_report("x", a, ctx), deviance_report("x", b, ctx)
    if ra.distance < rb.distance:
        assert ra.reward >= rb.reward and ra.punishment <= rb.punishment


def test_outgroup_with_zero_in_value():
    oc = outgroup_contrast("F1", [0.0, 0.0], [1.0, 0.0], None, VALS["F1"])
    assert oc.ratio == float("inf") and not oc.out_group


def consumer(weights=(1.0, 0.5)):
    return Agent("c", ValueSpace(2, ("taste", "price")), ValuationFunction.weighted_sum(list(weights)),
                 current_state=[0.2, 0.4], goal_state=[0.8, 0.5])


def test_marketing_examples():
    a = consumer()
    res = marketing_intervention(a, "healthy", 0.0, 0.0, [0.6, 0.3, 0.9])
    assert res.value_after == pytest.approx(res.value_before)
    assert np.array_equal(res.gradient_after[:2], res.gradient_before)
    res = marketing_intervention(a, "healthy", 0.5, 0.3, [0.6, 0.3, 0.8])
    assert res.value_after - res.value_before == pytest.approx(0.4)
    assert res.agent.space.basis_labels == ("taste", "price", "healthy")
    with pytest.raises(DuplicateAxisLabel):
        marketing_intervention(a, "taste", 0.5, 0.3, [0.6, 0.3, 0.8])
    with pytest.raises(DimensionMismatch):
        marketing_intervention(a, "healthy", 0.5, 0.3, [0.6, 0.3])
    with pytest.raises(ValueError):
        marketing_intervention(Agent("n", ValueSpace(2), ValuationFunction.norm()), "h", 0.5, 0.3, [0, 0, 1])


@given(arrays(float, 2, elements=small), arrays(float, 2, elements=small), arrays(float, 2, elements=small),
       st.floats(0.01, 2), st.floats(0.01, 2), st.floats(0.01, 2))
def test_marketing_cosine_oracle(x, g, p_old, h, eta, w):
    assume(np.linalg.norm(g - x) > 1e-3 and np.linalg.norm(p_old) > 1e-3)
    a = Agent("c", ValueSpace(2), ValuationFunction.linear([1.0, 1.0]), current_state=x, goal_state=g)
    product = np.append(p_old, h)
    res = marketing_intervention(a, "new", w, eta, product)
    # coordinate faithfulness
    assert np.array_equal(res.agent.current_state[:2], x) and res.agent.current_state[2] == 0.0
    assert np.array_equal(res.agent.goal_state[:2], g) and res.agent.goal_state[2] == eta
    assert np.array_equal(res.product[:2], p_old)
    # componentwise cosine oracle
    u = g - x
    dot, nu, np_ = u @ p_old, np.linalg.norm(u), np.linalg.norm(product)
    before = dot / (nu * np_)
    after = (dot + eta * h) / (np.sqrt(nu ** 2 + eta ** 2) * np_)
    assert res.cosine_before == pytest.approx(before, abs=1e-12)
    assert res.cosine_after == pytest.approx(after, abs=1e-12)
    # for a > 0 the cosine rises exactly when 2 a h |u|^2 > eta (a^2 - h^2 |u|^2); for a <= 0 it always rises
    margin = 2 * dot * h * nu ** 2 - eta * (dot ** 2 - h ** 2 * nu ** 2)
    if dot > 0 and abs(margin) > 1e-9:
        assert (res.cosine_after > res.cosine_before) == (margin > 0)
    if dot <= 0:
        assert res.cosine_after > res.cosine_before


def emotion(x, g=(1.0, 1.0), actions=(), depth=4):
    return EmotionInput(np.array(x, float), np.array(g, float), actions, np.array([1.0, 0.0]), depth)


def test_emotion_examples():
    v = classify_emotion(emotion([1.0, 1.0], actions=(np.eye(2),)))
    assert v.emotion is Emotion.NOT_ACTIVATED and v.reason == "REACHABLE"
    sad = classify_emotion(emotion([0.5, -2.0], g=(0.5, 3.0)))
    assert sad.emotion is Emotion.SADNESS
    assert np.linalg.norm(sad.gradient) == pytest.approx(0.01 * sad.distance)
    rage = classify_emotion(emotion([-0.5, -2.0], g=(-0.5, 3.0)))
    assert rage.emotion is Emotion.RAGE
    assert np.linalg.norm(rage.gradient) == pytest.approx(rage.distance)
    assert classify_emotion(emotion([0.0, -2.0], g=(0.0, 3.0))).emotion is Emotion.AMBIVALENT
    small_d = classify_emotion(emotion([1.0, 0.95]))
    assert small_d.emotion is Emotion.NOT_ACTIVATED and small_d.reason == "SMALL_D"


def test_emotion_input_validation():
    with pytest.raises(DimensionMismatch):
        emotion([1.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        emotion([1.0, 0.0], actions=(np.eye(3),))
    with pytest.raises(ValueError):
        EmotionInput(np.ones(2), np.ones(2), (), np.zeros(2))
    with pytest.raises(ValueError):
        emotion([1.0, 0.0], depth=0)


def test_reachability_depth():
    double = 2 * np.eye(2)
    x, g = np.array([1.0, 0.0]), np.array([8.0, 0.0])
    assert reachable_within(x, g, (double,), 3, 1e-9)
    assert not reachable_within(x, g, (double,), 2, 1e-9)


@st.composite
def emotion_cases(draw):
    n = draw(st.integers(1, 3))
    x = draw(arrays(float, n, elements=st.integers(-3, 3).map(float)))
    acts = tuple(draw(arrays(float, (n, n), elements=st.integers(-2, 2).map(float)))
                 for _ in range(draw(st.integers(1, 3))))
    path = draw(st.lists(st.integers(0, len(acts) - 1), min_size=1, max_size=3))
    g = x
    for i in path:
        g = acts[i] @ g
    b = draw(arrays(float, n, elements=st.integers(-1, 1).map(float)))
    assume(b.any())
    return EmotionInput(x, g, acts, b, 4)


@given(emotion_cases())
def test_reachable_goal_never_activates(inp):
    v = classify_emotion(inp)
    assert v.emotion is Emotion.NOT_ACTIVATED and v.reason == "REACHABLE"
