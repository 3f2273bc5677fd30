"""Agents, their value spaces and valuations, and abstract beings."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionMismatch
from .geometry import DEFAULT_TOL, TolerancePolicy, as_mat, as_vec, cholesky, same_dim


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ValueSpace:
    dim: int
    basis_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("value space dimension must be at least 1")
        labels = tuple(self.basis_labels) or tuple(f"b{i + 1}" for i in range(self.dim))
        if len(labels) != self.dim:
            raise DimensionMismatch(f"{len(labels)} basis labels for a {self.dim}-dimensional space")
        if len(set(labels)) != len(labels):
            raise ValueError("basis labels must be unique")
        object.__setattr__(self, "basis_labels", labels)

    def extended(self, label: str) -> "ValueSpace":
        return ValueSpace(self.dim + 1, self.basis_labels + (label,))


class ValuationKind(str, Enum):
    WEIGHTED_SUM = "weighted_sum"
    NORM = "norm"
    LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class ValuationFunction:
    """One of the closed set of valuation forms.

    ``WEIGHTED_SUM`` and ``LINEAR`` both evaluate ``w . v``; they are kept
    apart because scenarios describe them differently (component weights
    versus an arbitrary functional). ``NORM`` evaluates ``sqrt(v^T G v)``
    with ``G`` the identity when no metric is given.
    """

    kind: ValuationKind
    weights: np.ndarray | None = None
    metric: np.ndarray | None = None

    def __post_init__(self):
        kind = ValuationKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is ValuationKind.NORM:
            if self.weights is not None:
                raise ValueError("NORM valuation takes no weights")
            if self.metric is not None:
                g = as_mat(self.metric, "metric")
                cholesky(g, "metric")
                object.__setattr__(self, "metric", _frozen(g))
        else:
            if self.weights is None:
                raise ValueError(f"{kind.value} valuation needs weights")
            if self.metric is not None:
                raise ValueError(f"{kind.value} valuation takes no metric")
            object.__setattr__(self, "weights", _frozen(as_vec(self.weights, "weights")))

    @classmethod
    def weighted_sum(cls, weights) -> "ValuationFunction":
        return cls(ValuationKind.WEIGHTED_SUM, weights=weights)

    @classmethod
    def linear(cls, functional) -> "ValuationFunction":
        return cls(ValuationKind.LINEAR, weights=functional)

    @classmethod
    def norm(cls, metric=None) -> "ValuationFunction":
        return cls(ValuationKind.NORM, metric=metric)

    @classmethod
    def component_sum(cls, dim: int) -> "ValuationFunction":
        return cls.weighted_sum(np.ones(dim))

    @property
    def dim(self) -> int | None:
        if self.weights is not None:
            return self.weights.shape[0]
        if self.metric is not None:
            return self.metric.shape[0]
        return None

    def __call__(self, v) -> float:
        v = as_vec(v)
        if self.dim is not None and self.dim != v.shape[0]:
            raise DimensionMismatch(f"valuation expects dimension {self.dim}, got {v.shape[0]}")
        if self.kind is ValuationKind.NORM:
            if self.metric is None:
                return float(np.linalg.norm(v))
            return float(np.sqrt(max(v @ self.metric @ v, 0.0)))
        return float(self.weights @ v)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        if self.metric is not None:
            out["metric"] = self.metric.tolist()
        return out


@dataclass(frozen=True, eq=False)
class Agent:
    id: str
    space: ValueSpace
    valuation: ValuationFunction = field(default_factory=ValuationFunction.norm)
    current_state: np.ndarray | None = None
    goal_state: np.ndarray | None = None

    def __post_init__(self):
        dim = self.space.dim
        x = np.zeros(dim) if self.current_state is None else as_vec(self.current_state, "current_state")
        g = np.zeros(dim) if self.goal_state is None else as_vec(self.goal_state, "goal_state")
        if x.shape[0] != dim or g.shape[0] != dim:
            raise DimensionMismatch(f"agent {self.id}: state and goal must have dimension {dim}")
        if self.valuation.dim is not None and self.valuation.dim != dim:
            raise DimensionMismatch(f"agent {self.id}: valuation has dimension {self.valuation.dim}, space has {dim}")
        object.__setattr__(self, "current_state", _frozen(x))
        object.__setattr__(self, "goal_state", _frozen(g))

    @property
    def dim(self) -> int:
        return self.space.dim

    def replace(self, **changes) -> "Agent":
        fields = dict(id=self.id, space=self.space, valuation=self.valuation,
                      current_state=self.current_state, goal_state=self.goal_state)
        fields.update(changes)
        return Agent(**fields)


@dataclass(frozen=True, eq=False)
class AbstractBeing:
    id: str
    representations: Mapping[str, np.ndarray] = field(default_factory=dict)
    birth_step: int | None = None

    def __post_init__(self):
        reps = {k: _frozen(as_vec(v, f"representation of {self.id} for {k}"))
                for k, v in dict(self.representations).items()}
        object.__setattr__(self, "representations", MappingProxyType(reps))
        if self.birth_step is not None and self.birth_step < 0:
            raise ValueError("birth_step must be nonnegative")

    def get(self, agent_id: str) -> np.ndarray | None:
        return self.representations.get(agent_id)

    def with_representations(self, reps: Mapping[str, np.ndarray], birth_step=None) -> "AbstractBeing":
        return AbstractBeing(self.id, reps, self.birth_step if birth_step is None else birth_step)

    def check_dims(self, agents: Mapping[str, Agent]):
        for aid, rep in self.representations.items():
            if aid in agents and agents[aid].dim != rep.shape[0]:
                raise DimensionMismatch(
                    f"being {self.id}: representation for {aid} has dimension {rep.shape[0]}, "
                    f"agent space has {agents[aid].dim}")


def motivational_gradient(agent: Agent) -> np.ndarray:
    return agent.goal_state - agent.current_state


def valuate(agent: Agent, v) -> float:
    v = as_vec(v)
    if v.shape[0] != agent.dim:
        raise DimensionMismatch(f"agent {agent.id} has dimension {agent.dim}, vector has {v.shape[0]}")
    return agent.valuation(v)


def belief_alignment(b, m) -> float:
    """Dot product of a belief with a motivational gradient."""
    b, m = as_vec(b, "belief"), as_vec(m, "gradient")
    same_dim(b, m)
    return float(b @ m)


def _threshold(tol) -> float:
    if isinstance(tol, TolerancePolicy):
        return tol.zero_tol
    return float(tol)


def exists_for(being: AbstractBeing, agent_id: str, tol=DEFAULT_TOL) -> bool:
    """True when ``agent_id`` holds a representation whose norm exceeds the threshold.

    ``tol`` is either a :class:`TolerancePolicy` (its ``zero_tol`` is used)
    or an explicit absolute norm threshold.
    """
    rep = being.get(agent_id)
    return rep is not None and float(np.linalg.norm(rep)) > _threshold(tol)


def is_dead(being: AbstractBeing, population: Iterable[str], tol=DEFAULT_TOL) -> bool:
    return not any(exists_for(being, aid, tol) for aid in population)
