"""Goal updates, motivational convergence, coordination and the life cycle of beings."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .agents import AbstractBeing, Agent
from .errors import DimensionMismatch, HypothesisViolated, ZeroVector
from .geometry import DEFAULT_TOL, TolerancePolicy, as_vec, convex_hull_membership, same_dim
from .network import InfluenceGraph, SimulationConfig, attempt_coins


class GoalRuleKind(str, Enum):
    CONVEX_BLEND = "convex_blend"
    ADDITIVE = "additive"


@dataclass(frozen=True)
class GoalUpdateRule:
    kind: GoalRuleKind
    alpha: float | None = None
    beta: Callable[[int], float] | None = None

    def __post_init__(self):
        kind = GoalRuleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is GoalRuleKind.CONVEX_BLEND:
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise ValueError("convex blend needs alpha in [0, 1]")
        elif self.beta is None:
            raise ValueError("additive rule needs a beta schedule")

    @classmethod
    def convex_blend(cls, alpha: float) -> "GoalUpdateRule":
        return cls(GoalRuleKind.CONVEX_BLEND, alpha=alpha)

    @classmethod
    def additive(cls, beta: Callable[[int], float]) -> "GoalUpdateRule":
        return cls(GoalRuleKind.ADDITIVE, beta=beta)

    def beta_at(self, step: int) -> float:
        b = float(self.beta(step))
        if not b > 0:
            raise ValueError(f"beta schedule must be positive, got {b} at step {step}")
        return b


def update_goal(agent: Agent, adopted, rule: GoalUpdateRule, step: int = 1) -> Agent:
    adopted = as_vec(adopted, "adopted")
    if adopted.shape[0] != agent.dim:
        raise DimensionMismatch(f"adopted vector has dimension {adopted.shape[0]}, agent has {agent.dim}")
    g = agent.goal_state
    if rule.kind is GoalRuleKind.CONVEX_BLEND:
        new_goal = rule.alpha * adopted + (1 - rule.alpha) * g
    else:
        new_goal = g + rule.beta_at(step) * adopted
    return agent.replace(goal_state=new_goal)


def track_motivational_convergence(agent: Agent, adopted_sequence, limit_vector,
                                   rule: GoalUpdateRule) -> np.ndarray:
    """Cosine between ``M^(k) = (g + beta_k X^(k)) - x`` and ``limit_vector`` for k = 1, 2, ...

    The goal is always rebuilt from the baseline ``g`` (not accumulated),
    matching ``g^(k) = g + beta_k X^(k)``.
    """
    if rule.kind is not GoalRuleKind.ADDITIVE:
        raise ValueError("motivational convergence is stated for the additive rule")
    limit = as_vec(limit_vector, "limit_vector")
    nl = np.linalg.norm(limit)
    if nl == 0:
        raise ZeroVector("limit vector must be nonzero")
    seq = np.atleast_2d(np.asarray(adopted_sequence, dtype=float))
    if seq.shape[1] != agent.dim or limit.shape[0] != agent.dim:
        raise DimensionMismatch("adopted vectors and limit must live in the agent's space")
    m0 = agent.goal_state - agent.current_state
    betas = np.array([rule.beta_at(k) for k in range(1, seq.shape[0] + 1)])
    grads = m0[None, :] + betas[:, None] * seq
    norms = np.linalg.norm(grads, axis=1)
    if np.any(norms == 0):
        raise ZeroVector("motivational gradient vanished")
    return np.clip(grads @ limit / (norms * nl), -1.0, 1.0)


@dataclass(frozen=True)
class CoordinationVerdict:
    agent: str
    distance: float
    norm_gap: float
    structural_ok: bool
    valuation_ok: bool


@dataclass(frozen=True)
class CoordinationReport:
    verdicts: tuple[CoordinationVerdict, ...]

    @property
    def coordinated(self) -> bool:
        return all(v.structural_ok and v.valuation_ok for v in self.verdicts)


def check_coordination(followers: Sequence[tuple[str, object]], x_leader, eps: float, delta: float
                       ) -> CoordinationReport:
    """Group coordination: every interpreted vector within ``eps`` of the leader's and
    every norm within ``delta`` of the leader's norm (strict inequalities)."""
    xl = as_vec(x_leader, "x_leader")
    nl = np.linalg.norm(xl)
    out = []
    for aid, vec in followers:
        v = as_vec(vec, f"interpreted vector of {aid}")
        same_dim(v, xl)
        dist = float(np.linalg.norm(v - xl))
        gap = float(abs(np.linalg.norm(v) - nl))
        out.append(CoordinationVerdict(aid, dist, gap, dist < eps, gap < delta))
    return CoordinationReport(tuple(out))


@dataclass(frozen=True)
class ValuationUpdateRule:
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")


@dataclass(frozen=True)
class ValuationEvent:
    step: int
    source: str
    target: str
    before: float
    after: float
    source_value: float
    leader_lineage: bool


@dataclass(eq=False)
class ValuationRun:
    replicate: int
    table: list[dict[str, float]]  # table[k][agent] after step k; table[0] is the initial state
    events: list[ValuationEvent]
    nonincreasing_violations: list[tuple[str, int]]  # (follower, step)
    nonstrict_lineage_events: list[ValuationEvent]
    envelope_violations: list[int]  # steps where the farthest follower moved away


@dataclass(eq=False)
class ValuationConvergenceResult:
    runs: list[ValuationRun]
    hypothesis_holds: bool
    val_leader: float

    @property
    def monotone(self) -> bool:
        return all(not r.nonincreasing_violations for r in self.runs)

    @property
    def violation_count(self) -> int:
        return sum(len(r.nonincreasing_violations) for r in self.runs)


def _outside_interval(value: float, values) -> bool:
    values = list(values)
    return value < min(values) or value > max(values)


def run_valuation_convergence(initial_vals: Mapping[str, float], val_leader: float, leader: str,
                              graph: InfluenceGraph, rule: ValuationUpdateRule, cfg: SimulationConfig,
                              slack: float = 1e-12) -> ValuationConvergenceResult:
    """Scalar valuation dynamics driven by the influence process.

    The leader holds the being from the start; a follower holds it from the
    step after it is first successfully influenced. At each step every edge
    whose source holds the being fires with its probability (same
    counter-based coins as :func:`run_influence_process`), and the target
    moves to ``(1 - alpha) Val_i + alpha Val_j`` using the source's value
    at the start of the step. Several events hitting one target in a step
    are applied in edge order.

    The report records every step at which a follower's distance to
    ``val_leader`` grows, every leader-lineage event that fails to shrink
    it strictly, and every step at which the largest follower distance grows.
    """
    followers = [n for n in graph.nodes if n != leader]
    missing = [f for f in followers if f not in initial_vals]
    if missing:
        raise ValueError(f"no initial valuation for {missing}")
    if leader not in graph.nodes:
        raise ValueError(f"leader {leader} is not a graph node")
    hypothesis = _outside_interval(val_leader, [initial_vals[f] for f in followers]) if followers else True
    if not hypothesis:
        warnings.warn("leader valuation lies inside the hull of follower valuations; "
                      "monotonicity is not guaranteed", HypothesisViolated, stacklevel=2)
    edges = graph.edges
    probs = np.array([e.infl for e in edges])
    runs = []
    for rep in range(cfg.replicates):
        coins = attempt_coins(cfg.seed, rep, cfg.max_steps, len(edges))
        vals = {f: float(initial_vals[f]) for f in followers}
        vals[leader] = float(val_leader)
        lineage = {leader}
        holders = {leader}
        table = [{f: vals[f] for f in followers}]
        events, bad_steps, nonstrict, envelope_bad = [], [], [], []
        for step in range(1, cfg.max_steps + 1):
            snapshot = dict(vals)
            senders = set(holders)
            lineage_start = set(lineage)
            prev_dist = {f: abs(vals[f] - val_leader) for f in followers}
            fired = coins[step - 1] < probs
            for idx, e in enumerate(edges):
                if e.source not in senders or not fired[idx] or e.target == leader:
                    continue
                before = vals[e.target]
                src_val = snapshot[e.source]
                after = (1 - rule.alpha) * before + rule.alpha * src_val
                vals[e.target] = after
                is_lineage = e.source in lineage_start
                ev = ValuationEvent(step, e.source, e.target, before, after, src_val, is_lineage)
                events.append(ev)
                if is_lineage and not abs(after - val_leader) < abs(before - val_leader):
                    nonstrict.append(ev)
                holders.add(e.target)
                if is_lineage:
                    lineage.add(e.target)
            for f in followers:
                if abs(vals[f] - val_leader) > prev_dist[f] + slack:
                    bad_steps.append((f, step))
            if followers and max(abs(vals[f] - val_leader) for f in followers) > max(prev_dist.values()) + slack:
                envelope_bad.append(step)
            table.append({f: vals[f] for f in followers})
        runs.append(ValuationRun(rep, table, events, bad_steps, nonstrict, envelope_bad))
    return ValuationConvergenceResult(runs, hypothesis, float(val_leader))


class HullRole(str, Enum):
    INTERPOLATOR = "INTERPOLATOR"
    INNOVATOR = "INNOVATOR"


def convex_hull_leadership_check(group_vectors, x_leader, tol: TolerancePolicy = DEFAULT_TOL) -> HullRole:
    membership = convex_hull_membership(x_leader, list(group_vectors), tol)
    return HullRole.INTERPOLATOR if membership.inside else HullRole.INNOVATOR


# ----------------------------------------------------------------------------
# life cycle

LifecycleUpdate = Callable[[str, "np.ndarray | None", int], "np.ndarray | None"]


def identity_update(agent_id, rep, step):
    return rep


def decay_update(factor: float) -> LifecycleUpdate:
    def update(agent_id, rep, step):
        return None if rep is None else factor * rep
    return update


def received_update(received: Mapping[int, Mapping[str, np.ndarray]]) -> LifecycleUpdate:
    """Replace a representation with the image received at that step, if any."""
    def update(agent_id, rep, step):
        got = received.get(step, {}).get(agent_id)
        return rep if got is None else np.asarray(got, dtype=float)
    return update


def injection_update(at_step: int, agent_id: str, vector, then: LifecycleUpdate = identity_update
                     ) -> LifecycleUpdate:
    vector = as_vec(vector)

    def update(aid, rep, step):
        if step == at_step and aid == agent_id:
            return vector.copy()
        return then(aid, rep, step)
    return update


@dataclass(frozen=True)
class LifecycleRecord:
    being_id: str
    birth_step: int | None = None
    death_step: int | None = None
    norms: tuple[tuple[int, dict], ...] = ()  # (step, {agent: norm})

    def observe(self, being: AbstractBeing, population: Sequence[str], step: int, threshold: float
                ) -> "LifecycleRecord":
        norms = {a: float(np.linalg.norm(being.get(a))) if being.get(a) is not None else 0.0
                 for a in population}
        alive = any(v > threshold for v in norms.values())
        birth, death = self.birth_step, self.death_step
        if birth is None and alive:
            birth = step
        elif birth is not None and death is None and not alive:
            death = step
        return LifecycleRecord(self.being_id, birth, death, self.norms + ((step, norms),))


def step_lifecycle(being: AbstractBeing, population: Sequence[Agent], update: LifecycleUpdate,
                   step: int, record: LifecycleRecord | None = None, threshold=DEFAULT_TOL
                   ) -> tuple[AbstractBeing, LifecycleRecord]:
    """Apply one evolution step ``X_i <- f_i(X_i)`` and update the life-cycle record.

    Birth is the first observed step with some norm above ``threshold``;
    death is the first later step at which the being is dead for the whole
    population.
    """
    thr = threshold.zero_tol if isinstance(threshold, TolerancePolicy) else float(threshold)
    ids = [a.id for a in population]
    dims = {a.id: a.dim for a in population}
    reps = {}
    for aid in ids:
        new = update(aid, being.get(aid), step)
        if new is not None:
            new = as_vec(new)
            if new.shape[0] != dims[aid]:
                raise DimensionMismatch(f"update for {aid} returned dimension {new.shape[0]}")
            reps[aid] = new
    record = record or LifecycleRecord(being.id)
    new_being = being.with_representations(reps)
    record = record.observe(new_being, ids, step, thr)
    if record.birth_step is not None and new_being.birth_step is None:
        new_being = new_being.with_representations(reps, birth_step=record.birth_step)
    return new_being, record


def run_lifecycle(being: AbstractBeing, population: Sequence[Agent], update: LifecycleUpdate,
                  steps: int, threshold=DEFAULT_TOL, start_step: int = 0):
    """Observe the being at ``start_step`` and then evolve it for ``steps`` steps."""
    thr = threshold.zero_tol if isinstance(threshold, TolerancePolicy) else float(threshold)
    record = LifecycleRecord(being.id).observe(being, [a.id for a in population], start_step, thr)
    for step in range(start_step + 1, start_step + steps + 1):
        being, record = step_lifecycle(being, population, update, step, record, thr)
    return being, record
