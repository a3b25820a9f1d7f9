"""Flatness coefficients from minimax plane fits.

``beta_m`` reports the sup-distance of the support to a fitted m-plane,
normalised by the radius; since the plane is found by search the value is an
upper bound for the infimum over all planes.  ``bbeta`` adds the reverse
term (plane points far from the support) evaluated on a grid and reports the
grid error alongside, so ``value + grid_error`` is a certified bound.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import EmptyRestrictionError, ParameterError
from .geometry import Plane

_REL_TOL = 1e-13


@dataclass(frozen=True)
class BetaResult:
    value: float
    plane: Plane
    achieving_point: np.ndarray
    achieving_plane_point: np.ndarray = None
    below_resolution: bool = False
    first_term: float = None
    second_term: float = None
    grid_error: float = 0.0

    @property
    def certified(self):
        """Upper bound for the coefficient of ``plane``: value plus grid error."""
        return self.value + self.grid_error

    def to_dict(self):
        out = {"value": self.value, "plane": self.plane.to_dict(),
               "achieving_point": np.asarray(self.achieving_point).tolist(),
               "below_resolution": self.below_resolution}
        if self.achieving_plane_point is not None:
            out["achieving_plane_point"] = np.asarray(
                self.achieving_plane_point).tolist()
            out.update(first_term=self.first_term,
                       second_term=self.second_term,
                       grid_error=self.grid_error,
                       certified=self.certified)
        return out


# -- minimum enclosing ball (inner problem for codimension >= 2) ----------

def _circumball(R):
    R = np.asarray(R)
    if len(R) == 1:
        return R[0].copy(), 0.0
    A = R[1:] - R[0]
    rhs = 0.5 * (A * A).sum(axis=1)
    lam, *_ = np.linalg.lstsq(A @ A.T, rhs, rcond=None)
    c = R[0] + lam @ A
    return c, float(((R - c) ** 2).sum(axis=1).max())


def _welzl(P, npts, R, k):
    if R:
        c, r2 = _circumball(R)
    else:
        c, r2 = P[0].copy(), 0.0
    if len(R) == k + 1:
        return c, r2
    i = 0
    while i < npts:
        d2 = ((P[i:npts] - c) ** 2).sum(axis=1)
        out = np.flatnonzero(d2 > r2 * (1 + 1e-12) + 1e-300)
        if out.size == 0:
            break
        i += int(out[0])
        c, r2 = _welzl(P, i, R + [P[i]], k)
        i += 1
    return c, r2


def min_enclosing_ball(P, seed=0):
    """Centre and radius of the smallest ball containing the rows of ``P``."""
    P = np.asarray(P, dtype=np.float64)
    k = P.shape[1]
    if k == 1:
        lo, hi = P[:, 0].min(), P[:, 0].max()
        return np.array([0.5 * (lo + hi)]), 0.5 * (hi - lo)
    if P.shape[0] > 4 * (k + 1):
        try:
            P = P[ConvexHull(P).vertices]
        except (QhullError, ValueError):
            pass
    P = P[np.random.default_rng(seed).permutation(P.shape[0])]
    c, _ = _welzl(P, P.shape[0], [], k)
    return c, float(np.sqrt(((P - c) ** 2).sum(axis=1).max()))


# -- orientation search --------------------------------------------------

def _frame_from_plane(plane):
    """Orthogonal frame whose first m rows span the plane."""
    return np.vstack([plane.basis, plane.complement()])


def _pca_frame(P):
    c = P.mean(axis=0)
    cov = (P - c).T @ (P - c)
    _, vecs = np.linalg.eigh(cov)
    # descending variance
    return vecs[:, ::-1].T.copy()


def _residual(P, frame, m, seed=0):
    """Optimal offset and sup-distance for the orientation ``frame``."""
    V = frame[m:]
    proj = P @ V.T
    if V.shape[0] == 1:
        lo, hi = proj[:, 0].min(), proj[:, 0].max()
        return np.array([0.5 * (lo + hi)]), 0.5 * (hi - lo)
    return min_enclosing_ball(proj, seed)


def _rotate(frame, i, j, angle):
    f = frame.copy()
    c, s = np.cos(angle), np.sin(angle)
    f[i] = c * frame[i] + s * frame[j]
    f[j] = -s * frame[i] + c * frame[j]
    return f


def _local_search(P, frame, m, budget, value=None, step=0.1, min_step=1e-10):
    d = P.shape[1]
    if value is None:
        value = _residual(P, frame, m)[1]
    pairs = [(i, j) for i in range(m) for j in range(m, d)]
    evals = 0
    while pairs and step > min_step and evals < budget:
        improved = False
        for i, j in pairs:
            for sgn in (1.0, -1.0):
                cand = _rotate(frame, i, j, sgn * step)
                v = _residual(P, cand, m)[1]
                evals += 1
                if v < value - _REL_TOL * max(value, 1e-300):
                    frame, value, improved = cand, v, True
                    break
            if improved or evals >= budget:
                break
        if not improved:
            step *= 0.5
    return frame, value


def _normal_frame(normal):
    """Frame whose last row is ``normal`` (hyperplane case)."""
    nrm = normal / np.linalg.norm(normal)
    q, _ = np.linalg.qr(np.column_stack([nrm, np.eye(nrm.size)]))
    basis = q[:, 1:nrm.size].T
    return np.vstack([basis, nrm])


def _hull_normals(P):
    try:
        hull = ConvexHull(P)
    except (QhullError, ValueError):
        return np.zeros((0, P.shape[1])), None
    return hull.equations[:, :-1], hull.vertices


def _caliper_widths(V):
    """Half-widths of a counter-clockwise convex polygon across each edge
    normal, by rotating calipers."""
    h = V.shape[0]
    E = np.roll(V, -1, axis=0) - V
    N = np.stack([E[:, 1], -E[:, 0]], axis=1)
    N /= np.linalg.norm(N, axis=1)[:, None]
    widths = np.empty(h)
    j = 1
    for i in range(h):
        # depth of vertex j below edge i grows until the antipodal vertex
        cur = (V[i] - V[j % h]) @ N[i]
        while True:
            nxt = (V[i] - V[(j + 1) % h]) @ N[i]
            if nxt >= cur:
                j += 1
                cur = nxt
            else:
                break
        widths[i] = 0.5 * cur
    return N, widths


def _hull_widths(P, budget=50_000_000):
    """Facet normals of the convex hull and the half-width of ``P`` across
    each.  In 3D at most ``budget`` vertex-facet products are formed."""
    normals, verts = _hull_normals(P)
    if normals.shape[0] == 0:
        return normals, np.zeros(0)
    if P.shape[1] == 2:
        return _caliper_widths(P[verts])
    Ph = P[verts]
    stride = max(1, int(np.ceil(normals.shape[0] * Ph.shape[0] / budget)))
    normals = normals[::stride]
    widths = np.empty(normals.shape[0])
    for a in range(0, normals.shape[0], 256):
        proj = Ph @ normals[a:a + 256].T
        widths[a:a + 256] = 0.5 * (proj.max(axis=0) - proj.min(axis=0))
    return normals, widths


def _fit(P, m, budget=200, candidates=(), seed=0):
    """Return (frame, offset, value) minimising the sup-distance to an m-plane
    through search; never worse than PCA or any candidate frame."""
    npts, d = P.shape
    pca = _pca_frame(P)
    starts = [pca] + [np.asarray(c) for c in candidates]
    if npts <= m + 1:
        # an m-plane through m+1 points fits exactly
        c0 = P.mean(axis=0)
        if npts > 1:
            u, s, vt = np.linalg.svd(P - c0)
            basis = vt[:m] if m <= vt.shape[0] else vt
            frame = _frame_from_plane(Plane(c0, basis[:m]))
            off, val = _residual(P, frame, m, seed)
            return frame, off, val
        frame = np.eye(d)
        off, val = _residual(P, frame, m, seed)
        return frame, off, val

    scored = []
    for f in starts:
        off, v = _residual(P, f, m, seed)
        scored.append((v, len(scored), f))
    extra = []
    if m == d - 1 and d <= 3 and npts >= d + 1:
        normals, widths = _hull_widths(P)
        if normals.shape[0]:
            order = np.argsort(widths, kind="stable")
            extra = [(float(widths[q]), q, _normal_frame(normals[q]))
                     for q in order[:6]]
    elif m == d - 1:
        # each principal axis as a trial normal
        extra = []
        for q in range(d):
            f = _normal_frame(pca[q])
            extra.append((_residual(P, f, m)[1], q, f))
    pool = sorted(scored + extra, key=lambda t: (t[0], t[1]))
    if d == 2 and m == 1 and extra:
        # hull-edge normals are globally optimal for the width in the plane;
        # equal widths are resolved towards the smallest rotation from PCA
        best_v = pool[0][0]
        ties = [t for t in pool if t[0] <= best_v * (1 + 1e-12) + 1e-300]
        pca_n = pca[1]
        frame = max(ties, key=lambda t: abs(t[2][1] @ pca_n))[2]
        off, val = _residual(P, frame, m, seed)
        return frame, off, val

    best = None
    tried = 0
    for v, _, f in pool:
        if tried >= 4:
            break
        tried += 1
        f2, v2 = _local_search(P, f, m, budget, value=v)
        if best is None or v2 < best[1] - _REL_TOL * max(best[1], 1e-300):
            best = (f2, v2)
    frame = best[0]
    off, val = _residual(P, frame, m, seed)
    return frame, off, val


def _plane_from_frame(frame, offset, m, shift=None, scale=1.0):
    V = frame[m:]
    base = V.T @ offset
    basis = frame[:m]
    if shift is not None:
        base = shift + scale * base
    # re-orthonormalise against drift from repeated rotations
    if m:
        q, _ = np.linalg.qr(basis.T)
        basis = q.T
    return Plane(base, basis)


def minimax_fit(points, m, budget=200, candidates=(), seed=0):
    """m-plane approximately minimising the largest point-to-plane distance.

    Starts from the principal-component plane (and any ``candidates``) and
    refines by pattern search over rotations; the result is never worse than
    any starting plane.
    """
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d = P.shape[1]
    if not (0 <= m < d):
        raise ParameterError(f"plane dimension {m} must be in [0, {d})")
    frames = [_frame_from_plane(c) for c in candidates]
    frame, off, _ = _fit(P, m, budget, frames, seed)
    return _plane_from_frame(frame, off, m)


def _normalised(mu, B):
    idx = mu.ball_indices(B.center, B.radius)
    if idx.size == 0:
        raise EmptyRestrictionError("ball does not meet the support")
    return idx, (mu.points[idx] - B.center) / B.radius


def _to_unit(plane, B):
    return Plane((plane.base - B.center) / B.radius, plane.basis)


def _from_unit(plane, B):
    return Plane(B.center + B.radius * plane.base, plane.basis)


def beta_m(mu, B, m=None, budget=200, candidates=(), seed=0):
    """``beta^(m)`` of ``mu`` in the ball ``B`` (default ``m = mu.n``)."""
    m = mu.n if m is None else int(m)
    idx, P = _normalised(mu, B)
    d = mu.d
    if m >= d:
        plane = Plane(B.center, np.eye(d))
        return BetaResult(0.0, plane, mu.points[idx[0]], below_resolution=False)
    frames = [_frame_from_plane(_to_unit(c, B)) for c in candidates]
    frame, off, _ = _fit(P, m, budget, frames, seed)
    unit_plane = _plane_from_frame(frame, off, m)
    dist = unit_plane.distances(P)
    k = int(np.argmax(dist))
    value = float(dist[k])
    floor = 2 * mu.spacing / B.radius
    return BetaResult(value, _from_unit(unit_plane, B), mu.points[idx[k]],
                      below_resolution=bool(value < floor))


# -- bilateral coefficient ----------------------------------------------

def _disk_grid(m, rho, spacing, with_index=False):
    """Lattice points of spacing ``spacing`` covering the closed m-disk of
    radius ``rho``, clamped radially into the disk."""
    if m == 0:
        g = np.zeros((1, 0))
        return (g, np.zeros((1, 0), dtype=np.int64)) if with_index else g
    half = spacing * np.sqrt(m) / 2
    k = int(np.ceil((rho + half) / spacing))
    ax = np.arange(-k, k + 1)
    idx = np.stack(np.meshgrid(*([ax] * m), indexing="ij"), -1).reshape(-1, m)
    g = spacing * idx
    nrm = np.sqrt((g * g).sum(axis=1))
    keep = nrm <= rho + half
    g, idx, nrm = g[keep], idx[keep], nrm[keep]
    over = nrm > rho
    g[over] *= (rho / nrm[over])[:, None]
    return (g, idx) if with_index else g


def _support_dist(mu, X, chunk=200000):
    out = np.empty(X.shape[0])
    for a in range(0, X.shape[0], chunk):
        out[a:a + chunk] = mu.nearest(X[a:a + chunk])[0]
    return out


def plane_gap(mu, B, plane, spacing, levels=3):
    """Grid estimate of ``sup_{x in L cap B} dist(x, supp mu)``.

    Returns ``(grid_max, argmax_point, grid_error)``; ``grid_max +
    grid_error`` bounds the true supremum from above.

    The maximum over the grid is exact but not every grid point is queried:
    the distance to the support is 1-Lipschitz, so points whose bound from an
    already evaluated neighbour cannot beat the running maximum are skipped.
    Evaluation proceeds on sublattices of step ``2^levels`` down to 1.
    """
    m = plane.m
    p0 = plane.project(B.center)[0]
    delta = float(np.linalg.norm(B.center - p0))
    if delta >= B.radius:
        return 0.0, None, 0.0
    rho = np.sqrt(B.radius ** 2 - delta ** 2)
    g, lat = _disk_grid(m, rho, spacing, with_index=True)
    X = p0 + g @ plane.basis
    if m == 0 or g.shape[0] < 4096:
        dist = _support_dist(mu, X)
        k = int(np.argmax(dist))
        return float(dist[k]), X[k], spacing * np.sqrt(m) / 2
    f = np.full(g.shape[0], np.nan)
    cand = np.ones(g.shape[0], dtype=bool)
    best = -np.inf
    for lev in range(levels, -1, -1):
        step = 2 ** lev
        new = cand & np.isnan(f) & np.all(lat % step == 0, axis=1)
        if lev == 0:
            new = cand & np.isnan(f)
        sel = np.flatnonzero(new)
        if sel.size:
            f[sel] = _support_dist(mu, X[sel])
            best = max(best, float(f[sel].max()))
        done = np.flatnonzero(~np.isnan(f))
        rest = np.flatnonzero(cand & np.isnan(f))
        if rest.size == 0:
            break
        gap, near = cKDTree(g[done]).query(g[rest])
        bound = f[done[near]] + gap
        # keep anything that might reach the maximum, with rounding slack
        cand[rest[bound < best - 1e-12 * (1.0 + abs(best))]] = False
    done = np.flatnonzero(~np.isnan(f))
    k = done[int(np.argmax(f[done]))]
    return float(f[k]), X[k], spacing * np.sqrt(m) / 2


def _two_term(mu, B, plane, P_unit, spacing):
    first = float(_to_unit(plane, B).distances(P_unit).max())
    gap, _, err = plane_gap(mu, B, plane, spacing)
    return first + (gap + err) / B.radius


def bbeta(mu, B, budget=40, grid_divisions=64, candidates=(), seed=0):
    """Bilateral flatness coefficient of ``mu`` in ``B`` (n-planes).

    The plane is optimised for the two-term objective on a coarse grid
    (spacing r/16).  ``value`` uses the grid maximum at spacing
    ``r/grid_divisions``; ``certified`` adds the grid error and bounds the
    continuum coefficient of the returned plane from above.
    """
    n = mu.n
    idx, P = _normalised(mu, B)
    one = beta_m(mu, B, n, candidates=candidates, seed=seed)
    coarse = B.radius / 16
    pool = [one.plane] + list(candidates)
    c0 = B.center + B.radius * P.mean(axis=0)
    if n < mu.d:
        pool.append(Plane(c0, _pca_frame(P)[:n]))
    scored = sorted(((_two_term(mu, B, pl, P, coarse), q, pl)
                     for q, pl in enumerate(pool)), key=lambda t: (t[0], t[1]))
    value, _, plane = scored[0]

    # pattern search over rotation and offset of the plane
    if n < mu.d:
        frame = _frame_from_plane(plane)
        off = frame[n:] @ plane.base
        d = mu.d
        ang, sh = 0.05, 0.05 * B.radius
        evals = 0
        pairs = [(i, j) for i in range(n) for j in range(n, d)]
        while evals < budget and ang > 1e-4:
            improved = False
            moves = [("r", i, j, s) for i, j in pairs for s in (1, -1)]
            moves += [("t", j, None, s) for j in range(d - n) for s in (1, -1)]
            for kind, i, j, s in moves:
                if kind == "r":
                    f2 = _rotate(frame, i, j, s * ang)
                    # keep the plane through the same foot point
                    foot = plane.project(B.center)[0]
                    o2 = f2[n:] @ foot
                else:
                    f2 = frame
                    o2 = off.copy()
                    o2[i] += s * sh
                cand = Plane(f2[n:].T @ o2, f2[:n])
                v = _two_term(mu, B, cand, P, coarse)
                evals += 1
                if v < value - 1e-12:
                    frame, off, plane, value, improved = f2, o2, cand, v, True
                    break
                if evals >= budget:
                    break
            if not improved:
                ang *= 0.5
                sh *= 0.5
        pool_final = [one.plane, plane]
    else:
        pool_final = [one.plane]

    fine = B.radius / grid_divisions
    best = None
    for pl in pool_final:
        unit = _to_unit(pl, B)
        dist = unit.distances(P)
        k = int(np.argmax(dist))
        first = float(dist[k])
        gap, gp, err = plane_gap(mu, B, pl, fine)
        second = gap / B.radius
        total = first + second
        if best is None or total < best[0] - 1e-15:
            best = (total, pl, mu.points[idx[k]], gp, first, second,
                    err / B.radius)
    total, pl, ap, gp, first, second, gerr = best
    floor = 2 * mu.spacing / B.radius
    return BetaResult(float(total), pl, ap, gp,
                      below_resolution=bool(total < floor),
                      first_term=first, second_term=second, grid_error=gerr)


def beta_profile(mu, x, radii, bilateral=True, grid_divisions=64, seed=0):
    """beta and bbeta on ``B(x, r)`` for ascending radii, warm-starting each
    fit with the previous plane."""
    from .geometry import Ball

    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or radii != sorted(radii):
        raise ParameterError("radii must be positive and ascending")
    x = np.asarray(x, dtype=np.float64)
    out = []
    prev = ()
    for r in radii:
        B = Ball(x, r)
        b = beta_m(mu, B, candidates=prev, seed=seed)
        bb = (bbeta(mu, B, grid_divisions=grid_divisions,
                    candidates=(b.plane,), seed=seed) if bilateral else None)
        out.append({"r": r, "beta": b, "bbeta": bb})
        prev = (b.plane,)
    return out


def profile_csv(profile):
    """CSV text with columns ``r,beta,bbeta,below_resolution``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "beta", "bbeta", "below_resolution"])
    for row in profile:
        bb = row["bbeta"]
        w.writerow([repr(row["r"]), repr(row["beta"].value),
                    repr(bb.value) if bb is not None else "",
                    int(row["beta"].below_resolution)])
    return buf.getvalue()


def cube_beta(mu, forest, cube, bilateral=False, **kw):
    """beta (or bbeta) of a cube, i.e. of its ball ``B(z_Q, 3 l(Q))``."""
    B = forest.cube_ball(cube)
    return bbeta(mu, B, **kw) if bilateral else beta_m(mu, B, **kw)
