"""
Interpretation maps between agents' value spaces.

A map carries the ids of its source and target agents next to the matrix
so that path composition can check that a chain actually connects.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .agents import ValuationFunction, ValuationKind
from .errors import BrokenChain, DimensionMismatch, ZeroImage
from .geometry import (
    DEFAULT_TOL,
    TolerancePolicy,
    as_mat,
    as_vec,
    fit_map_least_squares,
    null_space_basis,
)


@dataclass(frozen=True, eq=False)
class InterpretationMap:
    source: str
    target: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(as_mat(self.matrix), dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, source: str, target: str, dim: int) -> "InterpretationMap":
        return cls(source, target, np.eye(dim))

    def __call__(self, v) -> np.ndarray:
        return apply(self, v)

    def __repr__(self):
        return f"InterpretationMap({self.source!r} -> {self.target!r}, {self.target_dim}x{self.source_dim})"


def apply(tmap: InterpretationMap, v) -> np.ndarray:
    v = as_vec(v)
    if v.shape[0] != tmap.source_dim:
        raise DimensionMismatch(
            f"map {tmap.source}->{tmap.target} expects dimension {tmap.source_dim}, got {v.shape[0]}")
    return tmap.matrix @ v


def compose_path(maps: Sequence[InterpretationMap]) -> InterpretationMap:
    """Compose maps given in application order (first map is applied first)."""
    maps = list(maps)
    if not maps:
        raise BrokenChain("cannot compose an empty path")
    total = maps[0].matrix
    for prev, nxt in zip(maps, maps[1:]):
        if prev.target != nxt.source:
            raise BrokenChain(f"path breaks between {prev.target!r} and {nxt.source!r}")
        if prev.target_dim != nxt.source_dim:
            raise BrokenChain(
                f"dimension break at {prev.target!r}: {prev.target_dim} vs {nxt.source_dim}")
        total = nxt.matrix @ total
    return InterpretationMap(maps[0].source, maps[-1].target, total)


def is_blind_to(tmap: InterpretationMap, v, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    """True when a nonzero ``v`` is annihilated by the map.

    The image is compared against the map's rank threshold scaled by
    ``||v||``, so the test is invariant under rescaling ``v``.
    """
    v = as_vec(v)
    image = apply(tmap, v)
    nv = np.linalg.norm(v)
    if nv <= tol.zero_tol:
        return False
    return bool(np.linalg.norm(image) <= tol.rank_threshold(tmap.matrix) * nv)


def blind_spot(tmap: InterpretationMap, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    return null_space_basis(tmap.matrix, tol)


@dataclass(frozen=True)
class ConsistencyReport:
    forward_ok: bool
    backward_ok: bool
    valuation_ok: bool
    forward_eps: float
    backward_eps: float
    valuation_gap: float

    @property
    def ok(self) -> bool:
        return self.forward_ok and self.backward_ok and self.valuation_ok


def check_consistency(
    map_ab: InterpretationMap,
    map_ba: InterpretationMap,
    x,
    eps: float,
    delta: float,
    val_a: ValuationFunction,
    val_b: ValuationFunction,
    x_b_new=None,
    embedding=None,
) -> ConsistencyReport:
    """Check forward, backward and valuation consistency of an exchange.

    Forward consistency has two readings. With ``x_b_new`` supplied it is
    the adoption check ``||T_ab x - x_b_new|| <= eps ||x_b_new||``. Without
    it, it is the round-trip premise ``||T_ab x - x|| <= eps ||x||``, which
    needs both spaces to share a dimension unless ``embedding`` (a matrix
    from A's space into B's) says how to compare them.

    Backward consistency uses ``x_b_new`` when given, ``T_ab x`` otherwise,
    and always compares against ``x`` relative to ``||x||``.
    """
    x = as_vec(x, "x")
    nx = np.linalg.norm(x)
    if nx == 0:
        raise ValueError("consistency is undefined for the zero vector")
    image = apply(map_ab, x)
    if x_b_new is not None:
        reference = as_vec(x_b_new, "x_b_new")
        if reference.shape != image.shape:
            raise DimensionMismatch("x_b_new does not live in the target space")
    elif embedding is not None:
        reference = as_mat(embedding, "embedding") @ x
        if reference.shape != image.shape:
            raise DimensionMismatch("embedding does not map into the target space")
    else:
        if image.shape != x.shape:
            raise DimensionMismatch(
                "forward consistency against x needs equal dimensions; supply x_b_new or an embedding")
        reference = x
    ref_norm = np.linalg.norm(reference)
    forward_eps = float(np.linalg.norm(image - reference) / ref_norm) if ref_norm > 0 else float("inf")

    received = reference if x_b_new is not None else image
    back = apply(map_ba, received)
    if back.shape != x.shape:
        raise DimensionMismatch("backward map does not return to the source space")
    backward_eps = float(np.linalg.norm(back - x) / nx)
    gap = abs(val_b(received) - val_a(x))
    return ConsistencyReport(
        forward_ok=forward_eps <= eps,
        backward_ok=backward_eps <= eps,
        valuation_ok=gap <= delta,
        forward_eps=forward_eps,
        backward_eps=backward_eps,
        valuation_gap=float(gap),
    )


@dataclass(frozen=True)
class RoundTripResult:
    applicable: bool
    observed_deviation: float
    one_step_bound: float
    k_step_bound: float
    holds: bool
    k: int

    @property
    def status(self) -> str:
        if not self.applicable:
            return "NOT_APPLICABLE"
        return "HOLDS" if self.holds else "VIOLATED"


_PREMISE_SLACK = 1e-12


def round_trip_bound(map_ab: InterpretationMap, map_ba: InterpretationMap, x, eps: float, k: int = 1
                     ) -> RoundTripResult:
    """Compare the k-fold round trip ``R^k x`` with the local-coherence bound.

    The premises (forward and backward deviation at most ``eps`` relative)
    are checked at ``x`` and at every intermediate iterate ``R^s x`` for
    ``s < k``; these are exactly the points at which the telescoping
    argument for the k-step bound uses them. If any premise fails the
    result is NOT_APPLICABLE rather than a violation.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = as_vec(x, "x")
    if map_ab.source_dim != x.shape[0] or map_ab.target_dim != x.shape[0] or map_ba.matrix.shape != map_ab.matrix.shape[::-1]:
        raise DimensionMismatch("round-trip bound needs both maps to act on x's space")
    nx = float(np.linalg.norm(x))
    c = 2 * eps + eps ** 2
    one_step = c * nx
    k_step = ((1 + c) ** k - 1) * nx

    applicable = True
    current = x
    for _ in range(k):
        y = map_ab.matrix @ current
        z = map_ba.matrix @ y
        ncur, ny = np.linalg.norm(current), np.linalg.norm(y)
        if np.linalg.norm(y - current) > eps * ncur * (1 + _PREMISE_SLACK) + _PREMISE_SLACK * ncur:
            applicable = False
        if np.linalg.norm(z - y) > eps * ny * (1 + _PREMISE_SLACK) + _PREMISE_SLACK * ny:
            applicable = False
        current = z
    observed = float(np.linalg.norm(current - x))
    holds = applicable and observed <= k_step + 1e-12
    return RoundTripResult(applicable, observed, one_step, k_step, holds, k)


def persuasion_matrix(map_a: InterpretationMap, x, target_val: float,
                      val: ValuationFunction | None = None, pattern=None,
                      tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Matrix ``M`` with ``Val(M T_A x) = target_val``.

    Any matrix with the right image norm works; the canonical answer is the
    scalar matrix ``c I``. Passing ``pattern`` (a vector of diagonal weights)
    returns ``c diag(pattern)`` instead, with ``c`` chosen to hit the target.
    """
    val = val or ValuationFunction.norm()
    if val.kind is not ValuationKind.NORM:
        raise ValueError("persuasion matrices are defined for NORM valuations")
    if target_val < 0:
        raise ValueError("target valuation must be nonnegative")
    image = apply(map_a, x)
    shape = np.eye(map_a.target_dim) if pattern is None else np.diag(as_vec(pattern, "pattern"))
    if shape.shape[0] != map_a.target_dim:
        raise DimensionMismatch("pattern length must equal the map's target dimension")
    current = val(shape @ image)
    if current <= tol.zero_tol * max(1.0, np.linalg.norm(image)):
        raise ZeroImage("the map (or pattern) annihilates x; no rescaling can restore its value")
    return (target_val / current) * shape


def fit_interpretation_map(pairs, source: str, target: str) -> InterpretationMap:
    return InterpretationMap(source, target, fit_map_least_squares(pairs))
