"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code: each oracle is a direct,
slow evaluation of a definition.
"""
import math

import numpy as np
from scipy.optimize import minimize_scalar

# mass of the 3-dimensional Hausdorff measure of the light cone in B(x, r)
# divided by r^3: both sheets of {(v, +-|v|)} over |v| < r/sqrt(2), with
# area factor sqrt(2), give 2 sqrt(2) (4 pi / 3) (r / sqrt(2))^3 = (4 pi / 3) r^3
CONE_DENSITY = 4 * math.pi / 3


def line_width_oracle(points, grid=20000):
    """Half the minimal strip width of a planar point set: exhaustive angle
    grid plus every pair direction, then bounded Brent refinement around the
    best grid cells."""
    P = np.asarray(points, dtype=float)

    def half_width(theta):
        nrm = np.array([-math.sin(theta), math.cos(theta)])
        p = P @ nrm
        return 0.5 * (p.max() - p.min())

    thetas = np.linspace(0, math.pi, grid, endpoint=False)
    vals = np.array([half_width(t) for t in thetas])
    best = float(vals.min())
    for i in range(len(P)):
        for j in range(i + 1, len(P)):
            dx, dy = P[j] - P[i]
            if dx or dy:
                best = min(best, half_width(math.atan2(dy, dx)))
    step = math.pi / grid
    for k in np.argsort(vals)[:8]:
        res = minimize_scalar(half_width, bounds=(thetas[k] - step, thetas[k] + step),
                              method="bounded", options={"xatol": 1e-13})
        best = min(best, float(res.fun))
    return best


def riesz_direct(points, weights, z0, r, s, n):
    """Plain-Python sum of ``w (z0-y)/|z0-y|^(n+1)`` over ``r < |z0-y| <= s``."""
    out = [0.0] * len(z0)
    for y, w in zip(points, weights):
        diff = [a - b for a, b in zip(z0, y)]
        dist = math.sqrt(sum(c * c for c in diff))
        if r < dist <= s:
            f = w / dist ** (n + 1)
            for i, c in enumerate(diff):
                out[i] += f * c
    return np.array(out)


def ball_mass_direct(points, weights, x, r):
    return math.fsum(w for p, w in zip(points, weights)
                     if math.dist(p, x) < r)


def carleson_brute(forest, family, R):
    """Sum of mu(Q) over family cubes Q inside R, by scanning every cube and
    checking containment through member sets."""
    Rm = set(forest[R].members.tolist())
    total = []
    for q in family:
        cube = forest[q]
        if set(cube.members.tolist()) <= Rm and cube.generation >= R[0]:
            total.extend(forest.weights[cube.members].tolist())
    return math.fsum(total)


def lipschitz_ok(u, w, slope, tol=1e-9):
    """Exhaustive pairwise check of |w_i - w_j| <= slope |u_i - u_j| + tol."""
    u = np.atleast_2d(u)
    w = np.atleast_2d(w)
    for i in range(u.shape[0]):
        du = np.sqrt(((u - u[i]) ** 2).sum(axis=1))
        dw = np.sqrt(((w - w[i]) ** 2).sum(axis=1))
        if np.any(dw > slope * du + tol):
            return False
    return True


def point_mass_wcd(r, steps, n):
    """Best ``max_t |lam - t^n| / r^n`` for a unit point mass over the grid
    ``t = r k / steps``: lam sits midway between the extreme values."""
    t = r * np.arange(1, steps) / steps
    lo, hi = (t ** n).min(), (t ** n).max()
    return 0.5 * (hi - lo) / r ** n
