"""
Directed influence graphs and the repeated independent influence process.

Randomness is counter-based: the coin for an attempt is fixed by
``(seed, replicate, step, edge index)`` alone. Each replicate owns a
Philox stream keyed by ``(replicate, seed)``; position ``step * n_edges +
edge`` in that stream is the coin. Replicates therefore do not depend on
each other or on the order in which edges are visited.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .agents import AbstractBeing
from .errors import BadProbability, DimensionMismatch, OriginHoldsNothing, UnknownLeader, UnknownOrigin
from .geometry import DEFAULT_TOL, TolerancePolicy, as_vec, orth_basis
from .interpretation import InterpretationMap

MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    infl: float
    map: InterpretationMap | None = None  # None means identity

    def __post_init__(self):
        if not (0.0 < self.infl <= 1.0):
            raise BadProbability(f"edge {self.source}->{self.target}: probability {self.infl} not in (0, 1]")
        if self.map is not None and (self.map.source, self.map.target) != (self.source, self.target):
            raise ValueError(
                f"edge {self.source}->{self.target} carries a map for {self.map.source}->{self.map.target}")

    def transmit(self, v: np.ndarray) -> np.ndarray:
        if self.map is None:
            return v.copy()
        if v.shape[0] != self.map.source_dim:
            raise DimensionMismatch(f"edge {self.source}->{self.target}: vector of dimension {v.shape[0]}")
        return self.map.matrix @ v


@dataclass(frozen=True)
class InfluenceGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node ids")
        known = set(nodes)
        for e in self.edges:
            if e.source not in known or e.target not in known:
                raise ValueError(f"edge {e.source}->{e.target} references an unknown node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(self.edges))

    def out_edges(self, node: str) -> list[tuple[int, Edge]]:
        return [(i, e) for i, e in enumerate(self.edges) if e.source == node]

    def with_edge(self, edge: Edge) -> "InfluenceGraph":
        return InfluenceGraph(self.nodes, self.edges + (edge,))


@dataclass(frozen=True)
class SimulationConfig:
    seed: int = 0
    max_steps: int = 10
    replicates: int = 1
    adoption_threshold: float = DEFAULT_TOL.zero_tol

    def __post_init__(self):
        if not (0 <= self.seed < MAX_SEED):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.adoption_threshold < 0:
            raise ValueError("adoption_threshold must be nonnegative")


@dataclass(frozen=True, eq=False)
class InfluenceEvent:
    step: int
    edge_index: int
    source: str
    target: str
    success: bool
    transmitted: np.ndarray | None  # None when the attempt failed
    adopted: bool


@dataclass(eq=False)
class SimulationTrace:
    replicate: int
    events: list[InfluenceEvent] = field(default_factory=list)
    final_representations: dict[str, np.ndarray] = field(default_factory=dict)
    adoption_step: dict[str, int] = field(default_factory=dict)


def attempt_coins(seed: int, replicate: int, max_steps: int, n_edges: int) -> np.ndarray:
    """Uniform draws ``u[step - 1, edge]`` for one replicate."""
    key = (int(replicate) << 64) | int(seed)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random((max_steps, max(n_edges, 1)))[:, :n_edges]


def run_influence_process(graph: InfluenceGraph, being: AbstractBeing, origin: str,
                          cfg: SimulationConfig, record_events: bool = True) -> list[SimulationTrace]:
    """Run ``cfg.replicates`` independent replicates of the influence process.

    Steps are synchronous: the holders at the start of a step are the only
    senders during that step, and adoptions take effect from the next step.
    A node adopts the first received vector whose norm exceeds
    ``cfg.adoption_threshold`` and keeps it; later receptions are logged
    only. With ``record_events=False`` the event log is skipped and a
    replicate stops early once no further adoption is possible, which
    leaves ``final_representations`` unchanged.
    """
    if origin not in graph.nodes:
        raise UnknownOrigin(origin)
    start = being.get(origin)
    if start is None or np.linalg.norm(start) <= cfg.adoption_threshold:
        raise OriginHoldsNothing(f"{origin} holds no representation of {being.id}")
    start = np.array(start, dtype=float)
    edges = graph.edges
    probs = np.array([e.infl for e in edges])
    traces = []
    for rep in range(cfg.replicates):
        coins = attempt_coins(cfg.seed, rep, cfg.max_steps, len(edges))
        holding = {origin: start}
        adoption_step = {origin: 0}
        events: list[InfluenceEvent] = []
        for step in range(1, cfg.max_steps + 1):
            senders = dict(holding)
            if not record_events and all(e.target in holding for e in edges if e.source in senders):
                break
            success = coins[step - 1] < probs
            for idx, e in enumerate(edges):
                if e.source not in senders:
                    continue
                if not success[idx]:
                    if record_events:
                        events.append(InfluenceEvent(step, idx, e.source, e.target, False, None, False))
                    continue
                if not record_events and e.target in holding:
                    continue
                sent = e.transmit(senders[e.source])
                adopted = e.target not in holding and np.linalg.norm(sent) > cfg.adoption_threshold
                if adopted:
                    holding[e.target] = sent
                    adoption_step[e.target] = step
                if record_events:
                    events.append(InfluenceEvent(step, idx, e.source, e.target, True, sent, bool(adopted)))
        final = {n: holding[n] for n in graph.nodes if n in holding}
        traces.append(SimulationTrace(rep, events, final, adoption_step))
    return traces


@dataclass(frozen=True, eq=False)
class SubspacePropagation:
    bases: dict[str, np.ndarray]  # node -> orthonormal columns spanning reachable images
    sweeps: int

    def dims(self) -> dict[str, int]:
        return {n: b.shape[1] for n, b in self.bases.items()}


def _node_dims(graph: InfluenceGraph, leader: str, x_dim: int) -> dict[str, int]:
    dims: dict[str, int] = {leader: x_dim}
    for e in graph.edges:
        if e.map is not None:
            for node, d in ((e.source, e.map.source_dim), (e.target, e.map.target_dim)):
                if dims.setdefault(node, d) != d:
                    raise DimensionMismatch(f"inconsistent dimension for node {node}")
    changed = True
    while changed:  # identity edges inherit dimensions
        changed = False
        for e in graph.edges:
            if e.map is None:
                for a, b in ((e.source, e.target), (e.target, e.source)):
                    if a in dims and b not in dims:
                        dims[b] = dims[a]
                        changed = True
                    elif a in dims and dims[b] != dims[a]:
                        raise DimensionMismatch(f"identity edge {e.source}->{e.target} joins different dimensions")
    return dims


def propagate_subspaces(graph: InfluenceGraph, leader: str, x_leader,
                        tol: TolerancePolicy = DEFAULT_TOL) -> SubspacePropagation:
    """Least fixed point of ``S_to <- S_to + T_edge(S_from)`` starting from ``span{x_leader}``.

    Every sweep visits all edges in order; the loop ends after the first
    sweep that grows no subspace.
    """
    if leader not in graph.nodes:
        raise UnknownLeader(leader)
    x = as_vec(x_leader, "x_leader")
    if np.linalg.norm(x) <= tol.zero_tol:
        raise ValueError("leader vector must be nonzero")
    dims = _node_dims(graph, leader, x.shape[0])
    bases = {n: np.zeros((dims.get(n, 0), 0)) for n in graph.nodes}
    bases[leader] = (x / np.linalg.norm(x)).reshape(-1, 1)
    sweeps = 0
    while True:
        sweeps += 1
        grew = False
        for e in graph.edges:
            src = bases[e.source]
            if src.shape[1] == 0:
                continue
            if e.map is None:
                image_basis = src
            else:
                image_basis = orth_basis(e.map.matrix @ src, tol.rank_threshold(e.map.matrix))
            if image_basis.shape[1] == 0:
                continue
            cur = bases[e.target]
            stacked = np.hstack([cur, image_basis])
            merged = orth_basis(stacked, tol.rank_threshold(stacked))
            if merged.shape[1] > cur.shape[1]:
                bases[e.target] = merged
                grew = True
        if not grew:
            break
    return SubspacePropagation(bases, sweeps)


def leadership_component(graph: InfluenceGraph, leader: str, x_leader,
                         tol: TolerancePolicy = DEFAULT_TOL) -> set[str]:
    prop = propagate_subspaces(graph, leader, x_leader, tol)
    return {n for n, b in prop.bases.items() if b.shape[1] > 0}


def simple_path_images(graph: InfluenceGraph, leader: str, x_leader, limit: int = 10000):
    """Enumerate simple paths from the leader with the composite image of ``x_leader``.

    Yields ``(path_nodes, image)``; intended for small graphs and for
    cross-checking :func:`leadership_component`.
    """
    x = as_vec(x_leader)
    count = 0
    stack = [((leader,), x)]
    while stack:
        path, vec = stack.pop()
        yield path, vec
        count += 1
        if count >= limit:
            return
        for _, e in reversed(graph.out_edges(path[-1])):
            if e.target not in path:
                stack.append((path + (e.target,), e.transmit(vec)))


class LeadVerdict(str, Enum):
    IN_COMPONENT_ADOPTS = "IN_COMPONENT_ADOPTS"
    IN_COMPONENT_NOT_LED = "IN_COMPONENT_NOT_LED"
    OUT_OF_COMPONENT_NEVER = "OUT_OF_COMPONENT_NEVER"
    OUT_OF_COMPONENT_ADOPTED = "OUT_OF_COMPONENT_ADOPTED"


@dataclass(frozen=True)
class LeadershipReport:
    component: frozenset[str]
    verdicts: dict[str, LeadVerdict]
    adoption_counts: dict[str, int]
    replicates: int
    max_steps: int

    @property
    def led(self) -> set[str]:
        return {n for n, v in self.verdicts.items() if v is LeadVerdict.IN_COMPONENT_ADOPTS}

    @property
    def consistent(self) -> bool:
        """No agent outside the component ever adopted."""
        return all(v is not LeadVerdict.OUT_OF_COMPONENT_ADOPTED for v in self.verdicts.values())

    @property
    def fully_leads(self) -> bool:
        return set(self.verdicts) == self.led


def steps_for_failure_bound(p_min: float, path_len: int, failure: float = 1e-6) -> int:
    """Smallest ``T`` with ``P(Binomial(T, p_min) < path_len) < failure``.

    A path of ``path_len`` edges, each attempted once per step with success
    probability at least ``p_min``, is fully traversed by step ``T`` unless
    fewer than ``path_len`` of ``T`` Bernoulli trials succeed.
    """
    expected_activation_time(p_min)
    if path_len <= 0:
        return 1
    t = path_len
    while binom.cdf(path_len - 1, t, p_min) >= failure:
        t += max(1, t // 8)
    lo, hi = path_len, t
    while lo < hi:
        mid = (lo + hi) // 2
        if binom.cdf(path_len - 1, mid, p_min) < failure:
            hi = mid
        else:
            lo = mid + 1
    return lo


def verify_no_null_space_condition(graph: InfluenceGraph, leader: str, x_leader, cfg: SimulationConfig,
                                   tol: TolerancePolicy = DEFAULT_TOL, failure: float = 1e-6
                                   ) -> LeadershipReport:
    """Cross-check the structural component against Monte Carlo adoption.

    ``max_steps`` is raised, if needed, so that a path through every node
    completes with probability at least ``1 - failure``.
    """
    component = leadership_component(graph, leader, x_leader, tol)
    p_min = min((e.infl for e in graph.edges), default=1.0)
    steps = max(cfg.max_steps, steps_for_failure_bound(p_min, len(graph.nodes) - 1, failure))
    run_cfg = SimulationConfig(cfg.seed, steps, cfg.replicates, cfg.adoption_threshold)
    being = AbstractBeing("_lead", {leader: x_leader})
    traces = run_influence_process(graph, being, leader, run_cfg, record_events=False)
    counts = {n: sum(n in t.final_representations for t in traces) for n in graph.nodes}
    verdicts = {}
    for n in graph.nodes:
        if n in component:
            verdicts[n] = LeadVerdict.IN_COMPONENT_ADOPTS if counts[n] > 0 else LeadVerdict.IN_COMPONENT_NOT_LED
        else:
            verdicts[n] = LeadVerdict.OUT_OF_COMPONENT_NEVER if counts[n] == 0 else LeadVerdict.OUT_OF_COMPONENT_ADOPTED
    return LeadershipReport(frozenset(component), verdicts, counts, cfg.replicates, steps)


def expected_activation_time(p: float) -> float:
    """Mean number of attempts until an edge with success probability ``p`` fires."""
    if not (0.0 < p <= 1.0):
        raise BadProbability(f"probability {p} not in (0, 1]")
    return 1.0 / p


def activation_tail(p: float, steps: int) -> float:
    """Probability that an edge has not fired after ``steps`` attempts."""
    expected_activation_time(p)
    return (1.0 - p) ** steps


def graph_from_maps(nodes: Sequence[str], maps: Sequence[InterpretationMap], infl: float = 1.0) -> InfluenceGraph:
    return InfluenceGraph(tuple(nodes), tuple(Edge(m.source, m.target, infl, m) for m in maps))
