"""Inner loops with a numba path and a pure-numpy path.

Each kernel ``foo`` has a plain-Python loop body ``_foo_loop`` (compiled by
numba when available) and a vectorised ``_foo_numpy``.  The public name is
bound to whichever backend :mod:`unirect._accel` selected.
"""
import numpy as np

from ._accel import HAVE_NUMBA, maybe_njit


# -- truncated Riesz sum ---------------------------------------------------

def _riesz_annulus_loop(points, weights, z0, r, s, n):
    d = points.shape[1]
    out = np.zeros(d)
    tmp = np.empty(d)
    for i in range(points.shape[0]):
        d2 = 0.0
        for k in range(d):
            tmp[k] = z0[k] - points[i, k]
            d2 += tmp[k] * tmp[k]
        dist = np.sqrt(d2)
        if dist > r and dist <= s:
            c = weights[i] / dist ** (n + 1)
            for k in range(d):
                out[k] += c * tmp[k]
    return out


def _riesz_annulus_numpy(points, weights, z0, r, s, n):
    diff = z0[None, :] - points
    dist = np.sqrt((diff * diff).sum(axis=1))
    mask = (dist > r) & (dist <= s)
    if not mask.any():
        return np.zeros(points.shape[1])
    c = weights[mask] / dist[mask] ** (n + 1)
    return (c[:, None] * diff[mask]).sum(axis=0)


def _riesz_shells_loop(points, weights, z0, edges, n):
    d = points.shape[1]
    k = edges.shape[0] - 1
    out = np.zeros((k, d + 1))
    tmp = np.empty(d)
    lo = edges[0]
    hi = edges[k]
    for i in range(points.shape[0]):
        d2 = 0.0
        for c in range(d):
            tmp[c] = z0[c] - points[i, c]
            d2 += tmp[c] * tmp[c]
        dist = np.sqrt(d2)
        if dist <= lo or dist > hi:
            continue
        # shell q holds edges[q] < dist <= edges[q+1]
        q = 0
        while dist > edges[q + 1]:
            q += 1
        f = weights[i] / dist ** (n + 1)
        for c in range(d):
            out[q, c] += f * tmp[c]
        out[q, d] += weights[i]
    return out


def _riesz_shells_numpy(points, weights, z0, edges, n):
    diff = z0[None, :] - points
    dist = np.sqrt((diff * diff).sum(axis=1))
    k = edges.shape[0] - 1
    d = points.shape[1]
    out = np.zeros((k, d + 1))
    mask = (dist > edges[0]) & (dist <= edges[k])
    if not mask.any():
        return out
    dist, diff, w = dist[mask], diff[mask], weights[mask]
    q = np.searchsorted(edges, dist, side="left") - 1
    f = w / dist ** (n + 1)
    for c in range(d):
        out[:, c] = np.bincount(q, weights=f * diff[:, c], minlength=k)
    out[:, d] = np.bincount(q, weights=w, minlength=k)
    return out


# -- diameter of a point set -----------------------------------------------

def _diameter_loop(points):
    m, d = points.shape
    best = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            d2 = 0.0
            for k in range(d):
                t = points[i, k] - points[j, k]
                d2 += t * t
            if d2 > best:
                best = d2
    return np.sqrt(best)


def _diameter_numpy(points, chunk=512):
    m = points.shape[0]
    best = 0.0
    for a in range(0, m, chunk):
        blk = points[a:a + chunk]
        diff = blk[:, None, :] - points[None, a:, :]
        d2 = (diff * diff).sum(axis=2)
        best = max(best, float(d2.max()))
    return np.sqrt(best)


# -- greedy Lipschitz graph extraction -------------------------------------

def _lipschitz_greedy_loop(u, w, order, slope, tol):
    npts = u.shape[0]
    du = u.shape[1]
    dw = w.shape[1]
    accepted = np.zeros(npts, dtype=np.bool_)
    sel = np.empty(npts, dtype=np.int64)
    nsel = 0
    for t in range(order.shape[0]):
        i = order[t]
        ok = True
        for q in range(nsel):
            j = sel[q]
            a = 0.0
            for k in range(du):
                x = u[i, k] - u[j, k]
                a += x * x
            b = 0.0
            for k in range(dw):
                x = w[i, k] - w[j, k]
                b += x * x
            if np.sqrt(b) > slope * np.sqrt(a) + tol:
                ok = False
                break
        if ok:
            accepted[i] = True
            sel[nsel] = i
            nsel += 1
    return accepted


def _lipschitz_greedy_numpy(u, w, order, slope, tol):
    npts = u.shape[0]
    accepted = np.zeros(npts, dtype=bool)
    su = np.empty_like(u)
    sw = np.empty_like(w)
    nsel = 0
    for i in order:
        if nsel:
            a = np.sqrt(((su[:nsel] - u[i]) ** 2).sum(axis=1))
            b = np.sqrt(((sw[:nsel] - w[i]) ** 2).sum(axis=1))
            if np.any(b > slope * a + tol):
                continue
        accepted[i] = True
        su[nsel] = u[i]
        sw[nsel] = w[i]
        nsel += 1
    return accepted


_riesz_annulus_numba = maybe_njit(_riesz_annulus_loop)
_riesz_shells_numba = maybe_njit(_riesz_shells_loop)
_diameter_numba = maybe_njit(_diameter_loop)
_lipschitz_greedy_numba = maybe_njit(_lipschitz_greedy_loop)

NUMBA_KERNELS = {
    "riesz_annulus": _riesz_annulus_numba,
    "riesz_shells": _riesz_shells_numba,
    "diameter": _diameter_numba,
    "lipschitz_greedy": _lipschitz_greedy_numba,
}
NUMPY_KERNELS = {
    "riesz_annulus": _riesz_annulus_numpy,
    "riesz_shells": _riesz_shells_numpy,
    "diameter": _diameter_numpy,
    "lipschitz_greedy": _lipschitz_greedy_numpy,
}
_ACTIVE = NUMBA_KERNELS if HAVE_NUMBA else NUMPY_KERNELS


def riesz_annulus(points, weights, z0, r, s, n):
    """Sum of ``w (z0-y)/|z0-y|^(n+1)`` over points with ``r < |z0-y| <= s``."""
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    return _ACTIVE["riesz_annulus"](points, weights, z0, float(r), float(s),
                                    int(n))


def riesz_shells(points, weights, z0, edges, n):
    """Riesz sums over consecutive shells ``edges[q] < |z0-y| <= edges[q+1]``.

    Returns ``(sums, masses)`` with shapes ``(len(edges)-1, d)`` and
    ``(len(edges)-1,)``.
    """
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    edges = np.ascontiguousarray(edges, dtype=np.float64)
    out = _ACTIVE["riesz_shells"](points, weights, z0, edges, int(n))
    return out[:, :-1], out[:, -1]


def diameter(points):
    if points.shape[0] < 2:
        return 0.0
    return float(_ACTIVE["diameter"](np.ascontiguousarray(points)))


def lipschitz_greedy(u, w, order, slope, tol=1e-9):
    """Accept points in ``order`` while the accepted set stays a graph with
    ``|w_i - w_j| <= slope |u_i - u_j| + tol`` for every accepted pair."""
    return _ACTIVE["lipschitz_greedy"](
        np.ascontiguousarray(u, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(order, dtype=np.int64), float(slope), float(tol))
