import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import eigh

from valuespace.errors import DimensionMismatch, NonFinite, NotPositiveDefinite, NotSymmetric, ZeroVector
from valuespace.geometry import (
    DEFAULT_TOL,
    TolerancePolicy,
    as_vec,
    convex_hull_membership,
    cosine_similarity,
    fit_map_least_squares,
    generalized_eigenpairs,
    null_space_basis,
    pseudo_inverse,
    rank,
)

# tiny magnitudes are flushed to zero so conditioning stays representable
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False).map(lambda v: 0.0 if abs(v) < 1e-6 else v)


@st.composite
def matrices(draw, max_dim=8):
    r = draw(st.integers(1, max_dim))
    c = draw(st.integers(1, max_dim))
    m = draw(arrays(float, (r, c), elements=finite))
    # knock out rows/cols now and then so rank deficiency actually occurs
    if draw(st.booleans()):
        m[:, draw(st.integers(0, c - 1))] = 0.0
    if draw(st.booleans()):
        m[draw(st.integers(0, r - 1))] = 0.0
    return m


@st.composite
def spd(draw, n):
    m = draw(arrays(float, (n, n), elements=st.floats(-2, 2)))
    return m @ m.T + 0.5 * np.eye(n)


# ------------------------------------------------------------------ rank, null space

def test_rank_examples():
    assert rank(np.eye(3)) == 3
    assert rank(np.diag([0.0, 1.0, 1.0])) == 2
    assert rank(np.zeros((2, 2))) == 0


def test_null_space_examples():
    ns = null_space_basis(np.diag([0.0, 1.0, 1.0]))
    assert ns.shape == (1, 3) and np.allclose(np.abs(ns[0]), [1, 0, 0])
    assert null_space_basis(np.eye(4)).shape == (0, 4)
    # hand-solved: [[0,1],[0,0]] v = 0 forces v2 = 0
    ns = null_space_basis([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(np.abs(ns[0]), [1.0, 0.0])


@given(matrices())
def test_rank_nullity(m):
    ns = null_space_basis(m)
    assert rank(m) + ns.shape[0] == m.shape[1]
    assert np.allclose(ns @ ns.T, np.eye(ns.shape[0]), atol=1e-10)
    thr = DEFAULT_TOL.rank_threshold(m)
    for v in ns:
        assert np.linalg.norm(m @ v) <= thr + 1e-300


@given(matrices())
def test_rank_matches_numpy_default(m):
    # numpy's default cut-off is smaller than ours; agreement holds whenever no
    # singular value sits between the two thresholds
    s = np.linalg.svd(m, compute_uv=False)
    ours = DEFAULT_TOL.rank_threshold(m)
    theirs = s.max(initial=0) * max(m.shape) * np.finfo(float).eps
    if not np.any((s > theirs) & (s <= ours)):
        assert rank(m) == np.linalg.matrix_rank(m)


# ------------------------------------------------------------------ pseudoinverse

def test_pseudo_inverse_examples():
    assert np.allclose(pseudo_inverse(np.eye(3)), np.eye(3))
    assert np.allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))


@given(matrices())
def test_moore_penrose_identities(m):
    p = pseudo_inverse(m)
    scale = max(1.0, np.abs(m).max(), np.abs(p).max()) ** 3
    assert np.max(np.abs(m @ p @ m - m)) <= 1e-8 * scale
    assert np.max(np.abs(p @ m @ p - p)) <= 1e-8 * scale
    assert np.max(np.abs((m @ p).T - m @ p)) <= 1e-8 * scale
    assert np.max(np.abs((p @ m).T - p @ m)) <= 1e-8 * scale


# ------------------------------------------------------------------ cosine

def test_cosine_examples():
    assert cosine_similarity([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    with pytest.raises(ZeroVector):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(DimensionMismatch):
        cosine_similarity([1.0], [1.0, 0.0])


@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite), st.floats(0.1, 10))
def test_cosine_bounded_and_scale_invariant(u, v, s):
    if np.linalg.norm(u) < 1e-6 or np.linalg.norm(v) < 1e-6:
        return
    c = cosine_similarity(u, v)
    assert -1.0 <= c <= 1.0
    assert cosine_similarity(s * u, v) == pytest.approx(c, abs=1e-12)


def test_vectors_must_be_finite():
    with pytest.raises(NonFinite):
        as_vec([1.0, float("nan")])
    with pytest.raises(DimensionMismatch):
        as_vec([])


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError):
        TolerancePolicy(hull_tol=0.0)


# ------------------------------------------------------------------ convex hull

def test_hull_examples():
    verts = [[1, 0, 0], [0, 1, 0], [0, 0.5, 1]]
    assert not convex_hull_membership([0.6, 0.6, 1.0], verts).inside
    res = convex_hull_membership(verts[1], verts)
    assert res.inside and res.coefficients[1] == pytest.approx(1.0)
    mid = convex_hull_membership([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
    assert mid.inside and np.allclose(mid.coefficients, [0.5, 0.5])
    with pytest.raises(DimensionMismatch):
        convex_hull_membership([1.0, 0.0], [[1.0, 0.0, 0.0]])


def _grid_oracle(x, verts, step=50, slack=1e-12):
    """Minimum distance from x to convex combinations on a simplex grid of resolution 1/step."""
    m = len(verts)
    v = np.asarray(verts)
    best = np.inf
    for comp in itertools.combinations_with_replacement(range(m), step):
        a = np.bincount(comp, minlength=m) / step
        best = min(best, np.linalg.norm(a @ v - x))
        if best <= slack:
            break
    return best


@st.composite
def hull_case(draw):
    dim = draw(st.integers(1, 3))
    m = draw(st.integers(1, 4))
    verts = draw(arrays(float, (m, dim), elements=st.floats(-1, 1)))
    if draw(st.booleans()):
        w = draw(arrays(float, m, elements=st.floats(0.01, 1)))
        x = (w / w.sum()) @ verts
    else:
        x = draw(arrays(float, dim, elements=st.floats(-1.5, 1.5)))
    return x, verts


@given(hull_case())
def test_hull_agrees_with_grid_oracle(case):
    x, verts = case
    res = convex_hull_membership(x, list(verts))
    # the grid is at most diam/step from any hull point; exact distance comes from the LP
    diam = max(np.linalg.norm(a - b) for a in verts for b in verts)
    grid = _grid_oracle(x, verts, step=20 if len(verts) > 3 else 50)
    if res.inside:
        assert grid <= diam / 20 + 1e-9
        assert np.all(res.coefficients >= 0) and res.coefficients.sum() == pytest.approx(1.0)
        assert np.linalg.norm(res.coefficients @ verts - x) <= DEFAULT_TOL.hull_tol
    else:
        # OUTSIDE must mean the grid never gets close; the L1 distance bounds the Euclidean one
        assert res.l1_distance > DEFAULT_TOL.hull_tol
        assert grid >= res.l1_distance / np.sqrt(len(x)) - 1e-9


@given(hull_case())
def test_hull_verdict_matches_scipy_oracle(case):
    from scipy.optimize import nnls

    x, verts = case
    # independent route: nonnegative least squares on the augmented system
    big = 1e3
    a = np.vstack([verts.T, big * np.ones(len(verts))])
    b = np.append(x, big)
    coef, resid = nnls(a, b)
    dist = np.linalg.norm(coef @ verts - x)
    res = convex_hull_membership(x, list(verts))
    if dist > 1e-6 and abs(coef.sum() - 1) < 1e-6:
        assert not res.inside
    if res.inside:
        assert resid < 1e-6


# ------------------------------------------------------------------ least squares

def test_fit_examples():
    assert np.allclose(fit_map_least_squares([([1, 0], [1, 0]), ([0, 1], [0, 1])]), np.eye(2))
    assert np.allclose(fit_map_least_squares([([1.0], [2.0])]), [[2.0]])
    with pytest.raises(DimensionMismatch):
        fit_map_least_squares([([1.0], [2.0]), ([1.0, 0.0], [1.0])])


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 3), st.integers(0, 2 ** 32 - 1))
def test_fit_recovers_exact_map(n_src, n_tgt, extra, seed):
    rng = np.random.default_rng(seed)
    t0 = rng.normal(size=(n_tgt, n_src))
    sources = rng.normal(size=(n_src + extra, n_src))
    t = fit_map_least_squares([(s, t0 @ s) for s in sources])
    assert np.allclose(t, t0, atol=1e-8)


@given(st.integers(0, 2 ** 32 - 1))
def test_fit_is_locally_optimal(seed):
    rng = np.random.default_rng(seed)
    src, tgt = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
    t = fit_map_least_squares(list(zip(src, tgt)))

    def loss(m):
        return np.sum((src @ m.T - tgt) ** 2)

    base = loss(t)
    for _ in range(1000):
        assert loss(t + 1e-3 * rng.normal(size=t.shape)) >= base - 1e-12


def test_fit_underdetermined_is_minimum_norm():
    # one pair in 2-D: T e1 = (1, 1); minimum-norm answer leaves the e2 column at zero
    t = fit_map_least_squares([([1.0, 0.0], [1.0, 1.0])])
    assert np.allclose(t, [[1.0, 0.0], [1.0, 0.0]])


# ------------------------------------------------------------------ generalized eigenproblem

def test_generalized_examples():
    lam, e = generalized_eigenpairs(np.eye(2), np.eye(2))
    assert np.allclose(lam, [1, 1])
    lam, e = generalized_eigenpairs(np.eye(2), np.diag([0.36, 1.96]))
    assert np.allclose(lam, [0.36, 1.96])
    assert np.allclose(np.abs(e), np.eye(2))
    lam, _ = generalized_eigenpairs(np.eye(3), 2 * np.eye(3))
    assert np.allclose(lam, 2.0)


def test_generalized_rejects_bad_input():
    with pytest.raises(NotSymmetric):
        generalized_eigenpairs([[1.0, 0.5], [0.0, 1.0]], np.eye(2))
    with pytest.raises(NotPositiveDefinite):
        generalized_eigenpairs(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(NotPositiveDefinite):
        generalized_eigenpairs(np.eye(2), np.diag([1.0, 0.0]))


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(spd(n), spd(n))))
def test_generalized_reconstruction(pair):
    a, b = pair
    lam, e = generalized_eigenpairs(a, b)
    assert np.all(np.diff(lam) >= 0)
    assert np.allclose(e.T @ a @ e, np.eye(len(lam)), atol=1e-8)
    recon = a @ e @ np.diag(lam) @ e.T @ a
    assert np.max(np.abs(recon - b)) <= 1e-6 * max(1.0, np.abs(b).max())
    # independent route: LAPACK's generalized symmetric solver
    assert np.allclose(lam, eigh(b, a, eigvals_only=True), rtol=1e-8, atol=1e-10)
