"""
Small dense linear algebra used throughout the engine.

Every routine here works on tiny real matrices (dimensions in the tens at
most), so clarity wins over speed. Vectors are 1-D ``numpy`` arrays and
matrices 2-D arrays; inputs are validated to be finite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionMismatch,
    NonFinite,
    NotPositiveDefinite,
    NotSymmetric,
    ZeroVector,
)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TolerancePolicy:
    """Numerical thresholds.

    ``rank_tol_factor`` multiplies machine epsilon, the largest singular value
    and ``max(rows, cols)`` to give the singular-value cut-off used for rank,
    null spaces and pseudoinverses.
    """

    rank_tol_factor: float = 1e2
    hull_tol: float = 1e-9
    example_tol: float = 5e-3

    def __post_init__(self):
        for name in ("rank_tol_factor", "hull_tol", "example_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    def rank_threshold(self, m) -> float:
        m = as_mat(m)
        if m.size == 0:
            return 0.0
        smax = np.linalg.norm(m, 2)
        return self.rank_tol_factor * EPS * smax * max(m.shape)

    @property
    def zero_tol(self) -> float:
        """Absolute norm below which a unit-scale vector counts as zero."""
        return self.rank_tol_factor * EPS


DEFAULT_TOL = TolerancePolicy()


def as_vec(v, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} has non-finite entries")
    return arr


def as_mat(m, name="matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1 and arr.size == 1:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} has non-finite entries")
    return arr


def same_dim(u: np.ndarray, v: np.ndarray, what="vectors"):
    if u.shape != v.shape:
        raise DimensionMismatch(f"{what} differ in dimension: {u.shape[0]} vs {v.shape[0]}")


def rank(m, tol: TolerancePolicy = DEFAULT_TOL) -> int:
    m = as_mat(m)
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol.rank_threshold(m)))


def null_space_basis(m, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the null space, one basis vector per row.

    The result has shape ``(cols - rank, cols)``; an empty ``(0, cols)``
    array means the map is injective.
    """
    m = as_mat(m)
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    r = int(np.sum(s > tol.rank_threshold(m)))
    return vh[r:].copy()


def orth_basis(m, threshold: float) -> np.ndarray:
    """Orthonormal basis (as columns) of the column space, cutting at ``threshold``."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return np.zeros((m.shape[0], 0))
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, s > threshold]


def pseudo_inverse(m, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    m = as_mat(m)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    keep = s > tol.rank_threshold(m)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vh.T * inv) @ u.T


def cosine_similarity(u, v, tol: TolerancePolicy = DEFAULT_TOL) -> float:
    u, v = as_vec(u, "u"), as_vec(v, "v")
    same_dim(u, v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu <= tol.zero_tol or nv <= tol.zero_tol:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class HullMembership:
    inside: bool
    coefficients: np.ndarray | None
    residual: float  # Euclidean distance ||sum(a_i v_i) - x|| of the returned combination
    l1_distance: float  # LP optimum: L1 distance from x to the hull

    @property
    def verdict(self) -> str:
        return "INSIDE" if self.inside else "OUTSIDE"


def _polish_coefficients(vt: np.ndarray, x: np.ndarray, alpha: np.ndarray):
    """Re-solve the equality system on the LP support; keep it if it is a valid convex combination."""
    alpha = np.clip(alpha, 0.0, None)
    alpha = alpha / alpha.sum()
    best = alpha
    best_res = np.linalg.norm(vt @ alpha - x)
    support = alpha > 1e-12
    aug = np.vstack([vt[:, support], np.ones((1, int(support.sum())))])
    rhs = np.append(x, 1.0)
    sol, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    if np.all(sol >= 0):
        cand = np.zeros_like(alpha)
        cand[support] = sol
        cand = cand / cand.sum()
        res = np.linalg.norm(vt @ cand - x)
        if res < best_res:
            best, best_res = cand, res
    return best, float(best_res)


def convex_hull_membership(x, vertices, tol: TolerancePolicy = DEFAULT_TOL) -> HullMembership:
    """Decide whether ``x`` is a convex combination of ``vertices``.

    Solved as a phase-one linear program: minimise the L1 residual
    ``||V^T a - x||_1`` subject to ``a >= 0`` and ``sum(a) = 1``. The
    problem is always feasible; its optimum is zero exactly when ``x`` lies
    in the hull, so an optimum above ``hull_tol`` certifies OUTSIDE.
    """
    x = as_vec(x, "x")
    verts = [as_vec(v, f"vertex {i}") for i, v in enumerate(vertices)]
    if not verts:
        raise ValueError("vertex list is empty")
    for i, v in enumerate(verts):
        if v.shape != x.shape:
            raise DimensionMismatch(f"vertex {i} has dimension {v.shape[0]}, x has {x.shape[0]}")
    vt = np.column_stack(verts)  # n x m
    n, m = vt.shape
    # variables: [a (m), r_plus (n), r_minus (n)]
    c = np.concatenate([np.zeros(m), np.ones(2 * n)])
    a_eq = np.zeros((n + 1, m + 2 * n))
    a_eq[:n, :m] = vt
    a_eq[:n, m:m + n] = np.eye(n)
    a_eq[:n, m + n:] = -np.eye(n)
    a_eq[n, :m] = 1.0
    b_eq = np.append(x, 1.0)
    res = linprog(
        c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:  # pragma: no cover - the LP is feasible and bounded by construction
        raise RuntimeError(f"hull LP failed: {res.message}")
    alpha, residual = _polish_coefficients(vt, x, res.x[:m])
    l1 = float(res.fun)
    if residual <= tol.hull_tol:
        return HullMembership(True, alpha, residual, l1)
    return HullMembership(False, None, residual, l1)


def fit_map_least_squares(pairs) -> np.ndarray:
    """Matrix ``T`` minimising ``sum ||T s_i - t_i||^2`` over (source, target) pairs.

    When the sources do not pin ``T`` down, the minimum Frobenius-norm
    solution is returned.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one (source, target) pair")
    src = [as_vec(s, "source") for s, _ in pairs]
    tgt = [as_vec(t, "target") for _, t in pairs]
    if len({s.shape for s in src}) != 1:
        raise DimensionMismatch("source vectors have inconsistent dimensions")
    if len({t.shape for t in tgt}) != 1:
        raise DimensionMismatch("target vectors have inconsistent dimensions")
    s_mat, t_mat = np.vstack(src), np.vstack(tgt)
    x, *_ = np.linalg.lstsq(s_mat, t_mat, rcond=None)
    return x.T


def _check_symmetric(m: np.ndarray, name: str):
    if m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"{name} is not square")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > 1e-10 * scale:
        raise NotSymmetric(f"{name} is not symmetric")


def cholesky(m, name="matrix") -> np.ndarray:
    m = as_mat(m, name)
    _check_symmetric(m, name)
    try:
        return np.linalg.cholesky(0.5 * (m + m.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive-definite") from exc


def generalized_eigenpairs(a, b):
    """Solve ``B e = lam A e`` for symmetric positive-definite ``A`` and ``B``.

    Reduces through the Cholesky factor ``A = L L^T`` to the ordinary
    symmetric problem ``L^-1 B L^-T y = lam y`` and maps back with
    ``e = L^-T y``.

    Returns
    -------
    eigenvalues : ndarray, ascending
    eigenvectors : ndarray
        Columns are A-orthonormal: ``E^T A E = I``.
    """
    a = as_mat(a, "A")
    b = as_mat(b, "B")
    if a.shape != b.shape:
        raise DimensionMismatch(f"A is {a.shape}, B is {b.shape}")
    low = cholesky(a, "A")
    cholesky(b, "B")  # validates B
    b = 0.5 * (b + b.T)
    # C = L^-1 B L^-T, formed with triangular solves
    tmp = np.linalg.solve(low, b)
    c = np.linalg.solve(low, tmp.T).T
    c = 0.5 * (c + c.T)
    lam, y = np.linalg.eigh(c)
    e = np.linalg.solve(low.T, y)
    return lam, e
