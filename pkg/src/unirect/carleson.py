"""Carleson packing, WCD membership, N(eps) flags and tree decomposition."""
import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ._parallel import ordered_map
from .cubes import cube_ball
from .errors import ParameterError, ResolutionError
from .flatness import _disk_grid, bbeta, beta_m
from .geometry import Ball
from .measure import DiscreteMeasure, support_distance

LOG2 = math.log(2.0)


def _ids(family):
    return {tuple(q) for q in family}


def _check_ids(forest, ids):
    for q in ids:
        if q not in forest:
            raise ParameterError(f"unknown cube id {q!r}")


def admissible(mu, forest, cid, factor=3.0):
    """Whether ``B(z_Q, factor * l(Q))`` lies inside the data region."""
    q = forest[cid]
    return mu.contains_ball(Ball(q.center, factor * q.side))


# -- Carleson sums ---------------------------------------------------------

def _exact_sum(forest, weights, cubes):
    """Correctly rounded sum of the member weights of ``cubes`` (with
    multiplicity), independent of order."""
    if not cubes:
        return 0.0
    members = np.concatenate([forest.cubes[q].members for q in cubes])
    return math.fsum(weights[members])


def carleson_sum(forest, family, R):
    """``sum of mu(Q)`` over family cubes ``Q`` contained in ``R``, correctly
    rounded (each cube contributes its member weights)."""
    fam = _ids(family)
    _check_ids(forest, fam)
    R = tuple(R)
    forest[R]
    inside = [q for q in forest.descendants(R) if q in fam]
    return _exact_sum(forest, forest.weights, inside)


def _subtree_sums(forest, fam):
    """Bottom-up ``S(Q) = [Q in F] mu(Q) + sum over children``."""
    S = {}
    for gen in reversed(forest.generations):
        for q in gen:
            s = q.mass if q.id in fam else 0.0
            for c in q.children:
                s += S[c]
            S[q.id] = s
    return S


def carleson_check(forest, family, c=math.inf, roots=None):
    """Sup over roots ``R`` of ``carleson_sum / mu(R)``, compared with ``c``.

    ``by_generation`` holds the sup over roots in each generation, and
    ``depth`` the number of generations from that root to the finest one.
    """
    fam = _ids(family)
    _check_ids(forest, fam)
    S = _subtree_sums(forest, fam)
    roots = forest.ids() if roots is None else [tuple(r) for r in roots]
    _check_ids(forest, roots)
    best, arg = -1.0, None
    by_gen = {}
    for rid in roots:
        ratio = S[rid] / forest.cubes[rid].mass
        if ratio > best:
            best, arg = ratio, rid
        j = rid[0]
        if j not in by_gen or ratio > by_gen[j]["ratio"]:
            by_gen[j] = {"ratio": ratio, "root": list(rid)}
    profile = [{"generation": j, "depth": forest.j_max - j + 1, **by_gen[j]}
               for j in sorted(by_gen)]
    return {"max_ratio": best if roots else 0.0,
            "offending_root": list(arg) if arg else None,
            "pass": bool(best <= c), "c": c, "by_generation": profile}


def profile_spread(profile):
    vals = [p["ratio"] for p in profile]
    if not vals:
        return math.nan
    lo, hi = min(vals), max(vals)
    return hi / lo if lo > 0 else math.inf


def bbeta_family(mu, forest, threshold, admissible_only=True, jobs=1, **kw):
    """Cubes with ``bbeta(B_Q) > threshold``; also returns all values."""
    forest.check_measure(mu)
    ids = [q for q in forest.ids()
           if not admissible_only or admissible(mu, forest, q)]

    def one(q):
        return bbeta(mu, cube_ball(forest.cubes[q]), **kw).value

    vals = dict(zip(ids, ordered_map(one, ids, jobs)))
    fam = {q for q, v in vals.items() if v > threshold}
    return fam, vals


# -- WCD -------------------------------------------------------------------

def _mass_profiles(mu, ys, r, tgrid):
    """``mu(B(y, t))`` for each y and each t in ``tgrid`` (open balls)."""
    out = np.empty((len(ys), len(tgrid)))
    for a, y in enumerate(ys):
        idx = mu.ball_indices(y, r)
        d = np.sqrt(((mu.points[idx] - y) ** 2).sum(axis=1))
        order = np.argsort(d, kind="stable")
        d = d[order]
        cum = np.cumsum(mu.weights[idx][order])
        k = np.searchsorted(d, tgrid, side="left")
        out[a] = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)
    return out


def _best_scalar(a, b):
    """Minimise ``max |lam a - b|`` over ``lam > 0`` (bisection on the
    crossing of the increasing and decreasing envelopes)."""
    a = a.ravel()
    b = b.ravel()
    lo, hi = 0.0, 1.0
    up = lambda lam: np.max(lam * a - b)
    dn = lambda lam: np.max(b - lam * a)
    while up(hi) < dn(hi):
        hi *= 2.0
        if hi > 1e300:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if up(mid) < dn(mid):
            lo = mid
        else:
            hi = mid
    cands = [lam for lam in (lo, hi) if lam > 0]
    vals = [max(up(lam), dn(lam)) for lam in cands]
    k = int(np.argmin(vals))
    return cands[k], float(vals[k])


def wcd_membership(mu, x, r, eps, t_steps=256, max_centers=200, seed=0,
                   c1p=None):
    """Constant-density surrogate test for ``(x, r)`` in ``G(c1', eps)``.

    With ``sigma = lam * mu``, ``lam`` minimises the sup of
    ``|lam mu(B(y,t)) - t^n|`` over support points ``y`` in ``B(x, r)`` and
    ``t = r k / t_steps``.  ``deviation`` is that sup divided by ``r^n``;
    ``grid_tolerance`` is the largest error the ``t`` grid alone can cause
    for a point mass.  When ``c1p`` is given, ``lam mu`` must also satisfy
    the AD bounds with that constant on the sampled tuples.
    """
    x = np.asarray(x, dtype=np.float64).reshape(mu.d)
    if not r > 2 * mu.spacing:
        raise ResolutionError(f"radius {r:.3g} is within the resolution floor "
                              f"2h = {2 * mu.spacing:.3g}")
    n = mu.n
    idx = mu.ball_indices(x, r)
    if idx.size == 0:
        raise ParameterError("x must lie within the support")
    if idx.size > max_centers:
        idx = np.sort(np.random.default_rng(seed).choice(idx, max_centers,
                                                         replace=False))
    ys = mu.points[idx]
    tgrid = r * np.arange(1, t_steps) / t_steps
    m = _mass_profiles(mu, ys, r, tgrid)
    tn = np.broadcast_to(tgrid ** n, m.shape)
    lam, dev = _best_scalar(m, tn)
    deviation = dev / r ** n
    grid_tol = 0.5 * (1 - ((t_steps - 1) / t_steps) ** n + (1 / t_steps) ** n)
    member = bool(deviation <= eps)
    ad_ok = None
    if c1p is not None:
        dens = lam * m / tn
        ad_ok = bool(dens.min() >= 1 / c1p and dens.max() <= c1p)
        member = member and ad_ok
    return {"member": member, "deviation": float(deviation),
            "lambda": float(lam), "grid_tolerance": grid_tol,
            "ad_ok": ad_ok, "surrogate": "constant-density surrogate"}


def wcd_scan(mu, forest, eps, c1p, admissible_only=True, jobs=1, **kw):
    """Per-cube WCD membership at ``(z_Q, l(Q))`` and the normalised
    complement sums ``sum mu(Q) log 2 / mu(R)`` over cubes ``Q`` in ``R``."""
    forest.check_measure(mu)
    ids = forest.ids()

    def one(q):
        cube = forest.cubes[q]
        if admissible_only and not admissible(mu, forest, q, 2.0):
            return None
        try:
            return wcd_membership(mu, cube.center, cube.side, eps, c1p=c1p, **kw)
        except ResolutionError:
            return None

    res = dict(zip(ids, ordered_map(one, ids, jobs)))
    scored = [q for q in ids if res[q] is not None]
    complement = {q for q in scored if not res[q]["member"]}
    S = _subtree_sums(forest, complement)
    roots = [q for q in scored
             if not admissible_only or admissible(mu, forest, q, 2.0)]
    sums = {q: LOG2 * S[q] / forest.cubes[q].mass for q in roots}
    by_gen = {}
    for q in roots:
        j = q[0]
        if j not in by_gen or sums[q] > by_gen[j]["ratio"]:
            by_gen[j] = {"ratio": sums[q], "root": list(q)}
    profile = [{"generation": j, "depth": forest.j_max - j + 1, **by_gen[j]}
               for j in sorted(by_gen)]
    spread = profile_spread(profile)
    rows = []
    for q in scored:
        cube = forest.cubes[q]
        rows.append({"id": list(q), "x": cube.center.tolist(), "r": cube.side,
                     **res[q]})
    return {
        "cubes": rows,
        "complement": sorted(complement),
        "sums": {f"{q[0]},{q[1]}": v for q, v in sums.items()},
        "by_generation": profile,
        "max_sum": max(sums.values()) if sums else 0.0,
        "spread": spread,
        "bounded": bool(spread <= 2.0) if math.isfinite(spread) else False,
        "unscored": [list(q) for q in ids if res[q] is None],
        "surrogate": "constant-density surrogate",
        "c1p": c1p, "eps": eps,
    }


def wcd_csv(report, d):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i}" for i in range(d)] + ["r", "deviation", "lambda",
                                              "member"])
    for row in report["cubes"]:
        w.writerow([repr(v) for v in row["x"]] + [
            repr(row["r"]), repr(row["deviation"]), repr(row["lambda"]),
            int(row["member"])])
    return buf.getvalue()


# -- N(eps) flags ------------------------------------------------------------

def _plane_sample(plane, B, spacing):
    p0 = plane.project(B.center)[0]
    delta = float(np.linalg.norm(B.center - p0))
    if delta >= B.radius:
        return None
    rho = math.sqrt(B.radius ** 2 - delta ** 2)
    g = _disk_grid(plane.m, rho, spacing)
    return p0 + g @ plane.basis


def _cone_distance(P, vertex, axis):
    t = (P - vertex) @ axis
    v = (P - vertex) - np.outer(t, axis)
    return np.abs(np.sqrt((v * v).sum(axis=1)) - np.abs(t)) / math.sqrt(2.0)


def _axis_from(params):
    a = np.asarray(params, dtype=np.float64)
    nrm = np.linalg.norm(a)
    return a / nrm if nrm > 0 else np.eye(a.size)[-1]


def fit_cone_pose(points, center, radius, seed=0):
    """Vertex and axis of a light cone minimising the sup-distance to the
    points (Nelder-Mead over 4 + 3 parameters, several starts)."""
    P = (np.asarray(points) - center) / radius
    d = P.shape[1]
    cov = (P - P.mean(axis=0)).T @ (P - P.mean(axis=0))
    _, vecs = np.linalg.eigh(cov)
    starts = []
    for a0 in (vecs[:, -1], np.eye(d)[-1]):
        for p0 in (np.zeros(d), P.mean(axis=0)):
            starts.append(np.concatenate([p0, a0]))

    def f(z):
        return float(_cone_distance(P, z[:d], _axis_from(z[d:])).max())

    best = None
    for z0 in starts:
        res = minimize(f, z0, method="Nelder-Mead",
                       options={"maxiter": 1500, "xatol": 1e-7, "fatol": 1e-9})
        if best is None or res.fun < best[1] - 1e-15:
            best = (res.x, float(res.fun))
    z = best[0]
    return center + radius * z[:d], _axis_from(z[d:]), best[1] * radius


def _cone_sample(vertex, axis, B, spacing):
    """Grid sample of the posed light cone inside ``B``."""
    d = vertex.size
    q, _ = np.linalg.qr(np.column_stack([axis, np.eye(d)]))
    frame = q[:, 1:d]          # orthonormal complement of the axis
    # cone points within B have |v| < (|vertex - c| + r)/sqrt(2)
    reach = (np.linalg.norm(vertex - B.center) + B.radius) / math.sqrt(2.0)
    k = int(math.ceil(reach / spacing))
    ax = spacing * np.arange(-k, k + 1)
    g = np.stack(np.meshgrid(*([ax] * (d - 1)), indexing="ij"), -1).reshape(-1, d - 1)
    g = g[(g * g).sum(axis=1) <= reach ** 2]
    v = g @ frame.T
    rad = np.sqrt((g * g).sum(axis=1))
    pts = np.concatenate([vertex + v + np.outer(rad, axis),
                          vertex + v - np.outer(rad, axis)])
    inside = np.sqrt(((pts - B.center) ** 2).sum(axis=1)) < B.radius
    return pts[inside]


def neps_cube(mu, B, eps, seed=0, cones=None):
    """Smallest ``d_B(mu, sigma)/r(B)`` over the candidate dictionary."""
    n, d = mu.n, mu.d
    spacing = eps * B.radius / 4
    out = {"distance": math.inf, "candidate": None}
    idx = mu.ball_indices(B.center, B.radius)
    if idx.size == 0:
        return out
    planes = [beta_m(mu, B, n, seed=seed).plane]
    if n < d:
        planes.append(bbeta(mu, B, seed=seed, candidates=(planes[0],)).plane)
    for pl in planes:
        S = _plane_sample(pl, B, spacing)
        if S is None or S.shape[0] == 0:
            continue
        sigma = DiscreteMeasure(S, np.ones(S.shape[0]), n)
        try:
            dist = support_distance(mu, sigma, B) / B.radius
        except Exception:
            continue
        if dist < out["distance"]:
            out = {"distance": dist, "candidate": "plane",
                   "pose": pl.to_dict()}
    use_cone = (d, n) == (4, 3) if cones is None else cones
    if use_cone and out["distance"] > eps:
        vertex, axis, sup1 = fit_cone_pose(mu.points[idx], B.center, B.radius,
                                           seed)
        if sup1 <= eps * B.radius:
            S = _cone_sample(vertex, axis, B, spacing)
            if S.shape[0]:
                sigma = DiscreteMeasure(S, np.ones(S.shape[0]), n)
                dist = support_distance(mu, sigma, B) / B.radius
                if dist < out["distance"]:
                    out = {"distance": dist, "candidate": "light-cone",
                           "pose": {"vertex": vertex.tolist(),
                                    "axis": axis.tolist()}}
    return out


def neps_flags(mu, forest, eps, admissible_only=True, jobs=1, seed=0,
               cones=None):
    """Cubes ``Q`` whose ball ``B_Q`` is within ``eps r(B_Q)`` (in ``d_B``)
    of some dictionary measure.  Returns ``(flags, details)``."""
    forest.check_measure(mu)
    ids = forest.ids()

    def one(q):
        cube = forest.cubes[q]
        if admissible_only and not admissible(mu, forest, q):
            return None
        return neps_cube(mu, cube_ball(cube), eps, seed=seed, cones=cones)

    det = dict(zip(ids, ordered_map(one, ids, jobs)))
    flags = {q for q, v in det.items() if v is not None and v["distance"] <= eps}
    return flags, det


# -- tree decomposition ----------------------------------------------------

@dataclass(frozen=True)
class Tree:
    root: tuple
    members: tuple
    stop: tuple
    pb: tuple = None

    def to_dict(self):
        return {"root": list(self.root),
                "member_ids": [list(q) for q in self.members],
                "stop_ids": [list(q) for q in self.stop],
                "pb_id": list(self.pb) if self.pb else None}


def tree_decompose(forest, flags, R):
    """Partition ``flags`` within ``D(R)`` into coherent trees.

    Roots are taken coarsest first (ties by id); a tree absorbs all sons of
    a member whenever every son is flagged.  Finest-generation cubes have no
    sons and so always end in ``Stop``.
    """
    R = tuple(R)
    forest[R]
    fl = _ids(flags)
    _check_ids(forest, fl)
    region = forest.descendants(R)
    in_region = set(region)
    remaining = {q for q in region if q in fl}
    trees = []
    while remaining:
        root = min(remaining)          # ids sort by (generation, ordinal)
        members = [root]
        queue = [root]
        while queue:
            p = queue.pop(0)
            kids = forest.cubes[p].children
            if kids and all(k in remaining for k in kids):
                members.extend(kids)
                queue.extend(kids)
        mset = set(members)
        stop = [q for q in members
                if not any(k in mset for k in forest.cubes[q].children)]
        pb = None
        parent = forest.cubes[root].parent
        if parent is not None and parent in in_region:
            if parent not in fl:
                pb = parent
            else:
                for b in forest.cubes[parent].children:
                    if b != root and b not in fl:
                        pb = b
                        break
        trees.append(Tree(root, tuple(sorted(members)), tuple(sorted(stop)), pb))
        remaining -= mset
    return trees


def validate_tree(forest, tree):
    """Problems with one tree (empty list when it is valid)."""
    errs = []
    mset = set(tree.members)
    if tree.root not in mset:
        errs.append("root not a member")
    for q in tree.members:
        if q != tree.root:
            if not forest.is_within(q, tree.root):
                errs.append(f"{q} not inside the root")
            elif forest.cubes[q].parent not in mset:
                errs.append(f"coherence broken above {q}")
        kids = forest.cubes[q].children
        inside = [k in mset for k in kids]
        if any(inside) and not all(inside):
            errs.append(f"sibling rule broken below {q}")
    expected = {q for q in tree.members
                if not any(k in mset for k in forest.cubes[q].children)}
    if set(tree.stop) != expected:
        errs.append("Stop differs from members without member sons")
    return errs


def validate_decomposition(forest, flags, R, trees):
    """Exact checks of disjointness, coverage, tree rules and root order."""
    errs = []
    target = {q for q in forest.descendants(tuple(R)) if q in _ids(flags)}
    seen = set()
    for t in trees:
        overlap = seen & set(t.members)
        if overlap:
            errs.append(f"trees overlap at {sorted(overlap)[:3]}")
        seen |= set(t.members)
        errs += validate_tree(forest, t)
    if seen != target:
        errs.append("union of trees differs from flags within D(R)")
    # each root is the coarsest (then smallest id) cube left at its turn
    left = set(target)
    for t in trees:
        if left and t.root != min(left):
            errs.append(f"root {t.root} is not the first remaining cube")
        left -= set(t.members)
    return errs


def tree_packing_check(trees, forest, R, complement_family=None, flags=None):
    """Root packing ``sum mu(Q(T_i)) / mu(R)`` against the complement's
    Carleson constant.

    ``literal_bound`` is ``1 + C`` with ``C`` the sup over ``R'`` in ``D(R)``
    of the complement's packing ratio.  ``proven_bound`` is
    ``1 + (1 + rho) C_R`` where ``C_R`` is the ratio at ``R`` alone and
    ``rho`` the largest ``(mu(parent) - mu(U)) / mu(U)`` over unflagged
    ``U``; charging each root to its ``pb`` cube gives that bound.
    """
    R = tuple(R)
    region = forest.descendants(R)
    if complement_family is None:
        fl = _ids(flags or ())
        complement_family = {q for q in region if q not in fl}
    comp = _ids(complement_family)
    muR = forest.cubes[R].mass
    ratio = math.fsum(forest.cubes[t.root].mass for t in trees) / muR
    chk = carleson_check(forest, comp, roots=region)
    C = max(chk["max_ratio"], 0.0)
    S = _subtree_sums(forest, comp)
    C_R = S[R] / muR
    rho = 0.0
    for u in comp:
        p = forest.cubes[u].parent
        if p is not None and u in region and u != R:
            rho = max(rho, (forest.cubes[p].mass - forest.cubes[u].mass)
                      / forest.cubes[u].mass)
    literal = 1.0 + C
    proven = 1.0 + (1.0 + rho) * C_R
    errs = []
    for t in trees:
        errs += validate_tree(forest, t)
    roots_with_pb = [t for t in trees if t.pb is not None]
    return {
        "ratio": ratio,
        "complement_constant": C,
        "complement_ratio_at_R": C_R,
        "sibling_rho": rho,
        "literal_bound": literal,
        "literal_ok": bool(ratio <= literal * (1 + 1e-12)),
        "proven_bound": proven,
        "proven_ok": bool(ratio <= proven * (1 + 1e-12)),
        "trees": len(trees),
        "roots_with_pb": len(roots_with_pb),
        "valid": not errs,
        "errors": errs,
    }
