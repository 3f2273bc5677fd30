"""
Counterfactuals as displacements from the actual state.

Also finds pairs of hypothetical states that two agents rank in opposite
order once one of them reads the other's states through a linear map.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import BadIndex, DimensionMismatch, NotInjective
from .geometry import DEFAULT_TOL, TolerancePolicy, as_mat, as_vec, cholesky, generalized_eigenpairs, rank, same_dim
from .interpretation import InterpretationMap, apply


def displacement(x, c) -> np.ndarray:
    x, c = as_vec(x, "x"), as_vec(c, "c")
    same_dim(x, c)
    return x - c


def perspective_displacement(tmap: InterpretationMap, x, c) -> np.ndarray:
    return apply(tmap, x) - apply(tmap, c)


@dataclass(frozen=True, eq=False)
class AffineSubspace:
    offset: np.ndarray
    basis: np.ndarray  # rows are orthonormal free directions

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def point(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float).reshape(-1)
        if coords.shape[0] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} coordinates")
        return self.offset + coords @ self.basis

    def contains(self, x, atol: float = 1e-12) -> bool:
        d = as_vec(x) - self.offset
        resid = d - (self.basis.T @ (self.basis @ d)) if self.dim else d
        return bool(np.linalg.norm(resid) <= atol)


def constrain_subspace(space_dim: int, fixed: Mapping[int, float]) -> AffineSubspace:
    """Hold some coordinates at given values and let the rest vary."""
    if space_dim < 1:
        raise ValueError("space dimension must be positive")
    offset = np.zeros(space_dim)
    for idx, value in fixed.items():
        if not isinstance(idx, (int, np.integer)) or not 0 <= idx < space_dim:
            raise BadIndex(f"coordinate index {idx!r} outside 0..{space_dim - 1}")
        offset[idx] = float(value)
    free = [i for i in range(space_dim) if i not in fixed]
    return AffineSubspace(offset, np.eye(space_dim)[free])


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    metric: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        w = as_mat(self.metric, "metric")
        cholesky(w, "metric")
        c = as_vec(self.center, "center")
        if w.shape[0] != c.shape[0]:
            raise DimensionMismatch("metric and center dimensions differ")
        object.__setattr__(self, "metric", w)
        object.__setattr__(self, "center", c)


def cost(qc: QuadraticCost, x) -> float:
    d = displacement(x, qc.center)
    return float(d @ qc.metric @ d)


def perspective_cost(tmap_matrix, metric_j, c, x) -> float:
    """``||T (x - c)||_j^2``: the cost agent j assigns after reading through ``T``."""
    d = as_mat(tmap_matrix) @ displacement(x, c)
    return float(d @ as_mat(metric_j) @ d)


@dataclass(frozen=True, eq=False)
class ReversalWitness:
    x: np.ndarray
    y: np.ndarray
    costs: tuple[float, float, float, float]  # C_i(x), C_i(y), C_j(x), C_j(y)
    eigenvalues: np.ndarray

    verdict = "REVERSAL"


@dataclass(frozen=True, eq=False)
class Proportional:
    eigenvalues: np.ndarray

    verdict = "PROPORTIONAL"


WITNESS_MARGIN = 1e-9


def find_preference_reversal(metric_i, map_ij, metric_j, c, tol: float = 1e-8,
                             rank_tol: TolerancePolicy = DEFAULT_TOL):
    """Find hypothetical states ordered oppositely by agents i and j.

    Agent i's cost form is ``A = W_i``; agent j's, pulled back through
    ``T``, is ``B = T^T W_j T``. With ``B e = lam A e`` and eigenvalues
    ``lam_min <= lam_max``, the direction ``u = e_max`` has ``(Q_i, Q_j) =
    (1, lam_max)`` and ``w = (1 + d) e_min`` has ``((1+d)^2, (1+d)^2
    lam_min)``; any ``1 < (1+d)^2 < lam_max / lam_min`` reverses the order.
    When the relative spread ``(lam_max - lam_min) / lam_max`` is at most
    ``tol`` the forms are treated as proportional and no reversal exists.

    Returns a :class:`ReversalWitness` or :class:`Proportional`.
    """
    w_i = as_mat(metric_i, "metric_i")
    t = as_mat(map_ij, "map")
    w_j = as_mat(metric_j, "metric_j")
    c = as_vec(c, "c")
    if t.shape[1] != w_i.shape[0] or t.shape[0] != w_j.shape[0] or c.shape[0] != w_i.shape[0]:
        raise DimensionMismatch("metric_i, map, metric_j and c do not fit together")
    if rank(t, rank_tol) < t.shape[1]:
        raise NotInjective("the interpretation map has a nontrivial null space")
    cholesky(w_j, "metric_j")
    b = t.T @ w_j @ t
    b = 0.5 * (b + b.T)
    lam, vecs = generalized_eigenpairs(w_i, b)
    lo, hi = lam[0], lam[-1]
    if (hi - lo) <= tol * hi:
        return Proportional(lam)
    ratio = hi / lo
    delta = min(0.5 * (np.sqrt(ratio) - 1.0), 0.25)
    grow = (1.0 + delta) ** 2
    # scale so that both strict inequalities clear the witness margin comfortably
    margin = min(grow - 1.0, hi - grow * lo)
    scale = max(1.0, np.sqrt(1e3 * WITNESS_MARGIN / margin))
    u = scale * vecs[:, -1]
    w = scale * (1.0 + delta) * vecs[:, 0]
    x, y = c + u, c + w
    qi = QuadraticCost(w_i, c)
    costs = (cost(qi, x), cost(qi, y), perspective_cost(t, w_j, c, x), perspective_cost(t, w_j, c, y))
    if not (costs[1] - costs[0] > WITNESS_MARGIN and costs[2] - costs[3] > WITNESS_MARGIN):
        raise ArithmeticError(f"witness failed direct cost verification: {costs}")  # pragma: no cover
    return ReversalWitness(x, y, costs, lam)
