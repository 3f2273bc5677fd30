"""
Case studies: group leadership by prototypicality, marketing as a change
of value-space structure, and the rage/sadness classifier.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .agents import Agent, ValuationFunction, ValuationKind, motivational_gradient
from .errors import DimensionMismatch, DuplicateAxisLabel, MissingMap, NoCandidates
from .geometry import as_mat, as_vec, cosine_similarity
from .interpretation import InterpretationMap, apply


def _cross_map(cross_maps, src: str, dst: str):
    if cross_maps is None:
        return None  # shared space
    try:
        return cross_maps[(src, dst)]
    except KeyError:
        raise MissingMap(f"no interpretation map {src} -> {dst}") from None


def _view(tmap, v):
    return v if tmap is None else apply(tmap, v)


def _valuation(valuations, follower):
    try:
        return valuations[follower]
    except KeyError:
        raise MissingMap(f"no valuation for follower {follower}") from None


def group_score(candidate: str, stance, followers: Sequence[str],
                cross_maps: Mapping[tuple[str, str], InterpretationMap] | None,
                valuations: Mapping[str, ValuationFunction]) -> float:
    """Mean follower valuation of a candidate's stance.

    ``cross_maps=None`` means every agent shares one space; otherwise a map
    keyed ``(candidate, follower)`` must exist for each follower.
    """
    if not followers:
        raise ValueError("a group needs at least one follower")
    stance = as_vec(stance, "stance")
    total = 0.0
    for f in followers:
        tmap = _cross_map(cross_maps, candidate, f)
        total += _valuation(valuations, f)(_view(tmap, stance))
    return total / len(followers)


def elect_leader(candidates: Sequence[tuple[str, object]], followers, cross_maps, valuations) -> str:
    """Highest group score wins; ties go to the lexicographically smallest id."""
    if not candidates:
        raise NoCandidates("no candidates to elect from")
    scored = [(group_score(cid, x, followers, cross_maps, valuations), cid) for cid, x in candidates]
    best = max(s for s, _ in scored)
    return min(cid for s, cid in scored if s == best)


@dataclass(frozen=True, eq=False)
class GroupContext:
    followers: tuple[str, ...]
    prototype: np.ndarray
    group_map: Mapping[str, InterpretationMap] | None = None  # None: members already in group space
    cross_maps: Mapping[tuple[str, str], InterpretationMap] | None = None
    reward: Callable[[float], float] = field(default=lambda d: float(np.exp(-d)))
    punishment: Callable[[float], float] = field(default=lambda d: float(d))

    def __post_init__(self):
        if self.prototype is None:
            raise ValueError("group prototype must be specified explicitly")
        p = as_vec(self.prototype, "prototype")
        object.__setattr__(self, "prototype", p)
        object.__setattr__(self, "followers", tuple(self.followers))
        if self.group_map is not None:
            for f in self.followers:
                if f not in self.group_map:
                    raise MissingMap(f"follower {f} has no group map")
                if self.group_map[f].target_dim != p.shape[0]:
                    raise DimensionMismatch(f"group map of {f} does not land in the group space")


@dataclass(frozen=True)
class DevianceReport:
    distance: float
    reward: float
    punishment: float


def deviance_report(member: str, stance, ctx: GroupContext) -> DevianceReport:
    stance = as_vec(stance, "stance")
    if ctx.group_map is None:
        projected = stance
    else:
        if member not in ctx.group_map:
            raise MissingMap(f"member {member} has no group map")
        projected = apply(ctx.group_map[member], stance)
    if projected.shape != ctx.prototype.shape:
        raise DimensionMismatch("stance does not live in the group space")
    d = float(np.linalg.norm(projected - ctx.prototype))
    return DevianceReport(d, float(ctx.reward(d)), float(ctx.punishment(d)))


@dataclass(frozen=True)
class OutgroupContrast:
    in_val: float
    out_val: float
    ratio: float
    out_group: bool


def outgroup_contrast(follower: str, in_leader_stance, out_leader_stance, maps, valuation: ValuationFunction,
                      in_leader: str = "in_leader", out_leader: str = "out_leader",
                      threshold: float = 0.5) -> OutgroupContrast:
    """Compare a follower's valuation of the in-group and out-group leaders' stances.

    ``maps`` is keyed ``(leader_id, follower)`` or is None for a shared space.
    """
    x_in = _view(_cross_map(maps, in_leader, follower), as_vec(in_leader_stance))
    y_out = _view(_cross_map(maps, out_leader, follower), as_vec(out_leader_stance))
    vin, vout = valuation(x_in), valuation(y_out)
    ratio = vout / vin if vin != 0 else float("inf")
    return OutgroupContrast(float(vin), float(vout), float(ratio), bool(ratio < threshold))


@dataclass(frozen=True, eq=False)
class MarketingResult:
    agent: Agent
    product: np.ndarray
    value_before: float
    value_after: float
    gradient_before: np.ndarray
    gradient_after: np.ndarray
    cosine_before: float
    cosine_after: float


def marketing_intervention(agent: Agent, new_axis_label: str, weight: float, eta: float, product
                           ) -> MarketingResult:
    """Add a valued axis to an agent's space and a matching goal component.

    Old states embed with a zero on the new axis; ``product`` already has
    the new coordinate. Only weighted-sum and linear valuations can gain a
    weight; a norm valuation has no per-axis weight to extend.
    """
    if weight < 0 or eta < 0:
        raise ValueError("weight and eta must be nonnegative")
    if new_axis_label in agent.space.basis_labels:
        raise DuplicateAxisLabel(f"axis {new_axis_label!r} already exists")
    if agent.valuation.kind is ValuationKind.NORM:
        raise ValueError("marketing intervention needs a weighted-sum or linear valuation")
    product = as_vec(product, "product")
    if product.shape[0] != agent.dim + 1:
        raise DimensionMismatch("product must carry the new coordinate as its last entry")
    space = agent.space.extended(new_axis_label)
    weights = np.append(agent.valuation.weights, weight)
    valuation = ValuationFunction(agent.valuation.kind, weights=weights)
    goal = np.append(agent.goal_state, eta)
    new_agent = Agent(agent.id, space, valuation, np.append(agent.current_state, 0.0), goal)

    m_old = motivational_gradient(agent)
    m_new = motivational_gradient(new_agent)
    old_product = product[:-1]
    val_before = agent.valuation(old_product)
    val_after = valuation(product)
    cos_before = _safe_cos(np.append(m_old, 0.0), product)
    cos_after = _safe_cos(m_new, product)
    return MarketingResult(new_agent, product, val_before, val_after, m_old, m_new, cos_before, cos_after)


def _safe_cos(u, v) -> float:
    if np.linalg.norm(u) == 0 or np.linalg.norm(v) == 0:
        return float("nan")
    return cosine_similarity(u, v)


class Emotion(str, Enum):
    RAGE = "RAGE"
    SADNESS = "SADNESS"
    AMBIVALENT = "AMBIVALENT"
    NOT_ACTIVATED = "NOT_ACTIVATED"


@dataclass(frozen=True, eq=False)
class EmotionInput:
    x: np.ndarray
    g: np.ndarray
    actions: tuple = ()
    acceptance_axis: np.ndarray | None = None
    search_depth: int = 4

    def __post_init__(self):
        x, g = as_vec(self.x, "x"), as_vec(self.g, "g")
        if x.shape != g.shape:
            raise DimensionMismatch("x and g must share a dimension")
        acts = tuple(as_mat(a, "action") for a in self.actions)
        for a in acts:
            if a.shape != (x.shape[0], x.shape[0]):
                raise DimensionMismatch("actions must be square on the state space")
        b = as_vec(self.acceptance_axis, "acceptance_axis")
        if b.shape != x.shape:
            raise DimensionMismatch("acceptance axis must live in the state space")
        if not np.any(b):
            raise ValueError("acceptance axis must be nonzero")
        if self.search_depth < 1:
            raise ValueError("search depth must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "actions", acts)
        object.__setattr__(self, "acceptance_axis", b)


@dataclass(frozen=True, eq=False)
class EmotionVerdict:
    emotion: Emotion
    reason: str | None
    distance: float
    acceptance: float
    gradient: np.ndarray
    search_depth: int


def reachable_within(x, g, actions, depth: int, tol: float) -> bool:
    """Does any composition of at most ``depth`` actions carry ``x`` to ``g``?"""
    frontier = [x]
    for _ in range(depth):
        nxt = []
        for v in frontier:
            for a in actions:
                w = a @ v
                if np.linalg.norm(w - g) <= tol:
                    return True
                nxt.append(w)
        # drop near-duplicates so identity-like actions do not blow up the frontier
        uniq: list[np.ndarray] = []
        for w in nxt:
            if not any(np.linalg.norm(w - u) <= tol for u in uniq):
                uniq.append(w)
        frontier = uniq
    return False


def classify_emotion(inp: EmotionInput, tol: float = 1e-9, activation: float = 0.1,
                     gamma: float = 0.01, beta: float = 1.0) -> EmotionVerdict:
    diff = inp.g - inp.x
    d = float(np.linalg.norm(diff))
    a = float(inp.x @ inp.acceptance_axis)
    if reachable_within(inp.x, inp.g, inp.actions, inp.search_depth, tol):
        return EmotionVerdict(Emotion.NOT_ACTIVATED, "REACHABLE", d, a, diff, inp.search_depth)
    if d <= activation * np.linalg.norm(inp.g):
        return EmotionVerdict(Emotion.NOT_ACTIVATED, "SMALL_D", d, a, diff, inp.search_depth)
    if a < -tol:
        return EmotionVerdict(Emotion.RAGE, None, d, a, beta * diff, inp.search_depth)
    if a > tol:
        return EmotionVerdict(Emotion.SADNESS, None, d, a, gamma * diff, inp.search_depth)
    return EmotionVerdict(Emotion.AMBIVALENT, None, d, a, diff, inp.search_depth)
