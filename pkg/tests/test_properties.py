"""Property tests of invariants that hold for every input."""
import math

import numpy as np
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import carleson_brute, lipschitz_ok
from unirect import kernels
from unirect.carleson import (carleson_sum, tree_decompose, tree_packing_check,
                              validate_decomposition)
from unirect.cubes import build_cubes, finest_generation, verify_cube_axioms
from unirect.flatness import bbeta, beta_m
from unirect.geometry import Ball
from unirect.measure import DiscreteMeasure, ball_mass, blowdown
from unirect.riesz import riesz_truncated

coord = st.floats(-1, 1, allow_nan=False, width=64)


@st.composite
def clouds(draw, min_size=2, max_size=60, d=None):
    d = draw(st.integers(1, 3)) if d is None else d
    rows = draw(st.lists(st.tuples(*[coord] * d), min_size=min_size,
                         max_size=max_size, unique=True))
    P = np.array(rows, dtype=np.float64)
    k = P.shape[0]
    w = draw(arrays(np.float64, k, elements=st.floats(0.1, 5)))
    n = draw(st.integers(1, d))
    return DiscreteMeasure(P, w, n)


@st.composite
def forests(draw):
    mu = draw(clouds(max_size=40))
    depth = draw(st.integers(0, min(4, finest_generation(mu, 0))))
    return mu, build_cubes(mu, 0, depth)


@given(clouds(), coord, st.floats(0.01, 2))
def test_ball_mass_monotone_and_bounded(mu, t, r):
    x = np.full(mu.d, t)
    a = ball_mass(mu, Ball(x, r))
    b = ball_mass(mu, Ball(x, 2 * r))
    assert 0 <= a <= b <= mu.total_mass * (1 + 1e-15)


@given(clouds(), st.floats(0.1, 10))
def test_blowdown_scales_density(mu, r):
    x = mu.points[0]
    nu = blowdown(mu, x, r)
    R = 0.7
    a = ball_mass(mu, Ball(x, R * r)) / (R * r) ** mu.n
    b = ball_mass(nu, Ball(np.zeros(mu.d), R)) / R ** mu.n
    # boundary points may flip under rounding; compare only clean cases
    dist = np.linalg.norm(mu.points - x, axis=1)
    assume(np.all(np.abs(dist - R * r) > 1e-9 * r))
    assert math.isclose(a, b, rel_tol=1e-9)


@given(forests())
def test_cubes_partition_and_nest(data):
    mu, forest = data
    rep = verify_cube_axioms(forest, mu)
    assert rep["partition_ok"] and rep["nesting_ok"]
    assert rep["diam_const"] <= 1.0


@given(forests(), st.data())
def test_carleson_sum_equals_brute_force(data, draw):
    mu, forest = data
    ids = forest.ids()
    fam = draw.draw(st.sets(st.sampled_from(ids)))
    R = draw.draw(st.sampled_from(ids))
    assert math.isclose(carleson_sum(forest, fam, R),
                        carleson_brute(forest, fam, R), rel_tol=1e-14)


@given(forests(), st.data())
def test_tree_decomposition_valid_and_proven_bound(data, draw):
    mu, forest = data
    ids = forest.ids()
    flags = draw.draw(st.sets(st.sampled_from(ids)))
    R = draw.draw(st.sampled_from(ids))
    trees = tree_decompose(forest, flags, R)
    assert validate_decomposition(forest, flags, R, trees) == []
    pack = tree_packing_check(trees, forest, R, flags=flags)
    assert pack["valid"] and pack["proven_ok"]


@given(clouds(d=3, min_size=5), st.floats(0.2, 2), st.floats(0.2, 3))
def test_riesz_additive_and_antisymmetric(mu, a, b):
    z0 = mu.points[0]
    r, s, t = 0.1, 0.1 + a, 0.1 + a + b
    lo = riesz_truncated(mu, z0, r, s).vector
    hi = riesz_truncated(mu, z0, s, t).vector
    whole = riesz_truncated(mu, z0, r, t).vector
    scale = max(1.0, np.abs(whole).max(), np.abs(lo).max(), np.abs(hi).max())
    assert np.abs(lo + hi - whole).max() <= 1e-12 * scale
    refl = DiscreteMeasure(2 * z0 - mu.points, mu.weights, mu.n)
    back = riesz_truncated(refl, z0, r, t).vector
    assert np.abs(back + whole).max() <= 1e-12 * scale


@given(clouds(d=2, min_size=3, max_size=25), st.floats(0.5, 4),
       st.floats(0, 2 * math.pi))
def test_beta_invariant_under_similarity(mu, scale, angle):
    R = 3.0
    B = Ball(mu.points[0], R)
    b0 = beta_m(mu, B, 1).value
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    nu = DiscreteMeasure(scale * mu.points @ rot.T, mu.weights, 1)
    b1 = beta_m(nu, Ball(nu.points[0], scale * R), 1).value
    assert abs(b0 - b1) <= 1e-6 * max(1.0, b0)
    assert 0 <= b0 <= 1


@given(clouds(d=2, min_size=3, max_size=25))
def test_bilateral_dominates_unilateral(mu):
    B = Ball(mu.points[0], 2.5)
    one = beta_m(mu, B, 1)
    two = bbeta(DiscreteMeasure(mu.points, mu.weights, 1), B, budget=10,
                grid_divisions=16)
    assert two.value >= one.value - 1e-9
    assert two.certified >= two.value


@given(arrays(np.float64, (30, 2), elements=coord),
       arrays(np.float64, (30, 1), elements=coord),
       st.floats(0.1, 3))
def test_greedy_lipschitz_backends_agree(u, w, slope):
    order = np.arange(30)
    a = kernels._lipschitz_greedy_numpy(u, w, order, slope, 1e-9)
    b = kernels.NUMBA_KERNELS["lipschitz_greedy"](u, w, order, slope, 1e-9)
    assert np.array_equal(a, b)
    acc = np.flatnonzero(a)
    assert lipschitz_ok(u[acc], w[acc], slope, tol=1e-9)
