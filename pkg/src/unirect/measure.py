"""Discrete measures and the basic queries on them.

A :class:`DiscreteMeasure` is a weighted point cloud; its point set stands in
for the support.  Every quantifier over ``x in supp mu`` ranges over the
sample points.
"""
import math
import warnings
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import (EmptyMeasureError, EmptyRestrictionError, ParameterError,
                     UndefinedDistanceError)
from .geometry import Ball, Plane

# exact-spacing estimate is done on a subsample above this size
_SPACING_SUBSAMPLE = 20000


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


class DiscreteMeasure:
    """Weighted point cloud in R^d carrying an intrinsic dimension ``n``.

    Instances are immutable; derived data (KD-tree, spacing) is computed
    lazily and cached.  ``region`` is a ``(center, radius)`` pair describing
    where the cloud faithfully represents the continuous target (generators
    set it; ingested clouds fall back to the bounding sphere).
    """

    def __init__(self, points, weights, n, provenance=None, region=None):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.size == 0 or pts.shape[0] == 0:
            raise EmptyMeasureError("a measure needs at least one point")
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise ParameterError("points and weights differ in length")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("point coordinates must be finite")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ParameterError("weights must be positive and finite")
        d = pts.shape[1]
        if not (0 < int(n) <= d):
            raise ParameterError(f"intrinsic dimension {n} not in (0, {d}]")
        self.points = _frozen(pts)
        self.weights = _frozen(w)
        self.n = int(n)
        self.provenance = dict(provenance or {})
        if region is not None:
            c, r = region
            region = (_frozen(np.asarray(c, dtype=np.float64).reshape(d)),
                      float(r))
        self._region = region

    def __repr__(self):
        return (f"DiscreteMeasure(d={self.d}, n={self.n}, size={self.size}, "
                f"mass={self.total_mass:.6g})")

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]

    @cached_property
    def total_mass(self):
        return math.fsum(self.weights)

    @cached_property
    def tree(self):
        return cKDTree(self.points)

    @cached_property
    def region(self):
        if self._region is not None:
            return self._region
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        c = 0.5 * (lo + hi)
        r = float(np.sqrt(((self.points - c) ** 2).sum(axis=1)).max())
        return (_frozen(c), max(r, np.finfo(float).tiny))

    @cached_property
    def spacing(self):
        """Median nearest-neighbour distance ``h`` (0 for a single point)."""
        if self.size < 2:
            return 0.0
        if self.size > _SPACING_SUBSAMPLE:
            rng = np.random.default_rng(12345)
            idx = np.sort(rng.choice(self.size, _SPACING_SUBSAMPLE,
                                     replace=False))
            q = self.points[idx]
        else:
            q = self.points
        dist, _ = self.tree.query(q, k=2)
        return float(np.median(dist[:, 1]))

    @cached_property
    def diameter_bound(self):
        """Exact diameter for small clouds, bounding-box diagonal otherwise."""
        if self.size <= 4000:
            return kernels.diameter(self.points)
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.sqrt(((hi - lo) ** 2).sum()))

    # -- queries -------------------------------------------------------

    def ball_indices(self, center, radius):
        """Sorted indices of points with ``|p - center| < radius``."""
        c = np.asarray(center, dtype=np.float64).reshape(self.d)
        if radius <= 0:
            return np.zeros(0, dtype=np.int64)
        cand = self.tree.query_ball_point(c, radius * (1 + 1e-9),
                                          return_sorted=True)
        cand = np.asarray(cand, dtype=np.int64)
        if cand.size == 0:
            return cand
        diff = self.points[cand] - c
        dist = np.sqrt((diff * diff).sum(axis=1))
        return cand[dist < radius]

    def mass_of(self, idx):
        return math.fsum(self.weights[idx]) if len(idx) else 0.0

    def nearest(self, query):
        """Distance from each query point to the support, and the index."""
        q = np.atleast_2d(np.asarray(query, dtype=np.float64))
        dist, idx = self.tree.query(q, k=1)
        # recompute with the same formula as everywhere else
        diff = self.points[idx] - q
        return np.sqrt((diff * diff).sum(axis=1)), idx

    def inner_indices(self, fraction=0.5):
        c, r = self.region
        dist = np.sqrt(((self.points - c) ** 2).sum(axis=1))
        return np.flatnonzero(dist <= fraction * r)

    def contains_ball(self, ball, slack=1e-9):
        c, r = self.region
        return (np.linalg.norm(ball.center - c) + ball.radius
                <= r * (1 + slack))

    def with_weights(self, weights):
        return DiscreteMeasure(self.points, weights, self.n, self.provenance,
                               self._region)


def ball_mass(mu, B):
    """``mu(B)`` for the open ball ``B``."""
    return mu.mass_of(mu.ball_indices(B.center, B.radius))


def restrict(mu, B):
    """``mu`` restricted to the open ball ``B``."""
    idx = mu.ball_indices(B.center, B.radius)
    if idx.size == 0:
        raise EmptyRestrictionError("ball does not meet the support")
    prov = dict(mu.provenance, restricted_to=[B.center.tolist(), B.radius])
    region = (B.center, B.radius) if mu.contains_ball(B) else None
    return DiscreteMeasure(mu.points[idx], mu.weights[idx], mu.n, prov, region)


def project_pushforward(mu, L):
    """Image of ``mu`` under the orthogonal projection onto ``L``."""
    if not isinstance(L, Plane):
        L = Plane(*L)
    if L.d != mu.d:
        raise ParameterError("plane and measure live in different dimensions")
    if not (mu.n <= L.m <= mu.d):
        raise ParameterError(f"plane dimension {L.m} outside [{mu.n}, {mu.d}]")
    prov = dict(mu.provenance, projected_onto=L.to_dict())
    return DiscreteMeasure(L.project(mu.points), mu.weights, mu.n, prov,
                           mu._region)


def blowdown(mu, x, r):
    """Push forward by ``y -> (y - x)/r`` and scale weights by ``r**-n``."""
    if not r > 0:
        raise ParameterError(f"blow-down radius must be positive, got {r}")
    x = np.asarray(x, dtype=np.float64).reshape(mu.d)
    region = None
    if mu._region is not None:
        c, R = mu._region
        region = ((c - x) / r, R / r)
    prov = dict(mu.provenance, blowdown=[x.tolist(), float(r)])
    return DiscreteMeasure((mu.points - x) / r, mu.weights * r ** (-mu.n),
                           mu.n, prov, region)


def _scan_samples(mu, samples, r_min, r_max, seed, inner_fraction=0.5):
    if not (0 < r_min <= r_max):
        raise ParameterError("need 0 < r_min <= r_max")
    rng = np.random.default_rng(seed)
    inner = mu.inner_indices(inner_fraction)
    if inner.size == 0:
        inner = np.arange(mu.size)
    xi = rng.choice(inner, size=samples, replace=inner.size < samples)
    if r_min == r_max:
        radii = np.full(samples, float(r_min))
    else:
        radii = np.exp(rng.uniform(np.log(r_min), np.log(r_max), samples))
    return xi, radii


def _boundary_warning(mu, r_max):
    if mu.size > 1 and r_max > mu.diameter_bound / 4:
        msg = (f"r_max={r_max:.4g} exceeds diam/4={mu.diameter_bound / 4:.4g}; "
               "boundary effects likely")
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        return msg
    return None


def ad_check(mu, c1, r_min, r_max, sample_count, seed=0):
    """Extremal ratios ``mu(B(x,r))/r^n`` over sampled support points and
    log-uniform radii, compared against the AD constant ``c1``."""
    if sample_count < 1:
        raise ParameterError("sample_count must be >= 1")
    warn = _boundary_warning(mu, r_max)
    xi, radii = _scan_samples(mu, sample_count, r_min, r_max, seed)
    ratios = np.array([
        mu.mass_of(mu.ball_indices(mu.points[i], r)) / r ** mu.n
        for i, r in zip(xi, radii)])
    lo, hi = int(np.argmin(ratios)), int(np.argmax(ratios))
    c1_measured = float(max(ratios[hi], 1.0 / ratios[lo]) if ratios[lo] > 0
                        else np.inf)
    worst = lo if (ratios[lo] == 0 or 1.0 / ratios[lo] >= ratios[hi]) else hi
    return {
        "c1_lower": float(ratios[lo]),
        "c1_upper": float(ratios[hi]),
        "c1_measured": c1_measured,
        "pass": bool(c1_measured <= c1),
        "worst": {"x": mu.points[xi[worst]].tolist(),
                  "r": float(radii[worst]), "ratio": float(ratios[worst])},
        "resolution_floor": mu.n * mu.spacing / r_min,
        "spacing": mu.spacing,
        "warning": warn,
    }


def uniformity_scan(mu, samples, scales, seed=0):
    """Densities ``mu(B(x,r))/r^n`` for random support points and radii.

    ``spread`` is the largest relative deviation from the mean density.
    """
    if samples < 2:
        raise ParameterError("uniformity scan needs at least 2 samples")
    r_min, r_max = scales
    warn = _boundary_warning(mu, r_max)
    xi, radii = _scan_samples(mu, samples, r_min, r_max, seed)
    dens = np.array([
        mu.mass_of(mu.ball_indices(mu.points[i], r)) / r ** mu.n
        for i, r in zip(xi, radii)])
    mean = math.fsum(dens) / dens.size
    spread = float(np.abs(dens - mean).max() / mean) if mean > 0 else np.inf
    table = [{"x": mu.points[i].tolist(), "r": float(r), "density": float(v)}
             for i, r, v in zip(xi, radii, dens)]
    return {
        "mean_density": mean,
        "spread": spread,
        "table": table,
        "resolution_floor": mu.n * mu.spacing / r_min,
        "spacing": mu.spacing,
        "warning": warn,
    }


def support_distance(nu, sigma, B):
    """Two-sided supremum of nearest-support distances inside ``B``."""
    a = nu.ball_indices(B.center, B.radius)
    b = sigma.ball_indices(B.center, B.radius)
    if a.size == 0 or b.size == 0:
        raise UndefinedDistanceError("both supports must meet the ball")
    da, _ = sigma.nearest(nu.points[a])
    db, _ = nu.nearest(sigma.points[b])
    return float(da.max() + db.max())
