"""Executable versions of the flatness lemmas.

Each probe measures both the hypothesis and the conclusion of a statement and
returns a report ``{probe, config, hypothesis_met, measurements, witnesses}``.
A probe never asserts the implication.  ``hypothesis_met`` is ``None`` when
the statement has no hypothesis that can be checked on a sample.

Existential searches run over deterministic grids (farthest-point nets of
support points, dyadic radii) so a success is certified while a failure only
means that none was found.
"""
import math

import numpy as np

from . import kernels
from .config import ProbeConfig
from .errors import (DensityError, ExtentError, HypothesisNotMet,
                     ParameterError)
from .flatness import bbeta, beta_m, minimax_fit
from .geometry import Ball, Plane
from .measure import DiscreteMeasure, restrict
from .riesz import pairing_sup

# candidate centres per radius in existential searches
NET_SIZE = 24
# grid points per axis when searching for empty balls
EMPTY_GRID = 17
_EMPTY_GRID_TOTAL = 60000


def _report(probe, cfg, hypothesis_met, measurements, witnesses, **params):
    config = cfg.to_dict() if cfg is not None else {}
    config.update(params)
    return {"probe": probe, "config": config, "hypothesis_met": hypothesis_met,
            "measurements": measurements, "witnesses": witnesses}


def _as_ball(B):
    if isinstance(B, Ball):
        return B
    c, r = B
    return Ball(np.asarray(c, dtype=np.float64), float(r))


def _check_centered(mu, B):
    dist, _ = mu.nearest(B.center)
    # centres come from sample coordinates; allow for round trips through text
    if dist[0] > 1e-9 * max(1.0, B.radius):
        raise ParameterError("ball must be centred at a support point")


def _check_extent(mu, B, what):
    if not mu.contains_ball(B):
        raise ExtentError(f"{what} B({np.round(B.center, 6).tolist()}, "
                          f"{B.radius:.6g}) reaches past the data region")


def farthest_point_net(points, k, first=0):
    """Indices of ``k`` points chosen by farthest-point sampling from
    ``first``; ties go to the lower index."""
    m = points.shape[0]
    k = min(k, m)
    chosen = [int(first)]
    d2 = ((points - points[first]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(d2))
        if d2[nxt] <= 0:
            break
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return np.asarray(chosen, dtype=np.int64)


def _candidate_centres(mu, B, rho, net_size, seed):
    """Support points ``c`` with ``B(c, rho)`` inside ``B``, as a net that
    starts at the point nearest the centre of ``B``."""
    pool = mu.ball_indices(B.center, B.radius - rho + 1e-12 * B.radius)
    if pool.size == 0:
        return pool
    if pool.size > 20000:
        rng = np.random.default_rng(seed)
        pool = np.sort(rng.choice(pool, 20000, replace=False))
    P = mu.points[pool]
    first = int(np.argmin(((P - B.center) ** 2).sum(axis=1)))
    return pool[farthest_point_net(P, net_size, first)]


def _dyadic_radii(r, floor):
    out = []
    rho = r / 2
    while rho >= floor * (1 - 1e-12):
        out.append(rho)
        rho /= 2
    return out


def find_flat_ball(mu, B, eps, tau_floor, m=None, net_size=NET_SIZE, seed=0):
    """Largest dyadic sub-ball ``B' = B(c, r/2^k)`` inside ``B``, centred in
    the support, with ``beta^(m)(B') <= eps`` and ``r(B') >= tau_floor r(B)``.
    """
    B = _as_ball(B)
    if not (0 < tau_floor < 1):
        raise ParameterError("tau_floor must lie in (0, 1)")
    m = mu.n if m is None else int(m)
    tried = []
    for rho in _dyadic_radii(B.radius, tau_floor * B.radius):
        best_here = None
        for c in _candidate_centres(mu, B, rho, net_size, seed):
            sub = Ball(mu.points[c], rho)
            res = beta_m(mu, sub, m, seed=seed)
            if best_here is None or res.value < best_here[0]:
                best_here = (res.value, sub)
            if res.value <= eps:
                meas = {"found": True, "beta": res.value,
                        "tau": rho / B.radius, "radius": rho,
                        "below_resolution": res.below_resolution,
                        "searched": tried}
                wit = {"ball": {"center": sub.center.tolist(), "radius": rho},
                       "plane": res.plane.to_dict()}
                return _report("find_flat_ball", None, None, meas, wit,
                               eps=eps, tau_floor=tau_floor, m=m)
        if best_here is not None:
            tried.append({"radius": rho, "best_beta": best_here[0],
                          "best_center": best_here[1].center.tolist()})
    meas = {"found": False, "beta": None, "tau": None, "radius": None,
            "searched": tried}
    return _report("find_flat_ball", None, None, meas, {}, eps=eps,
                   tau_floor=tau_floor, m=m)


def _empty_grid(B, d):
    g = EMPTY_GRID
    while g > 3 and g ** d > _EMPTY_GRID_TOTAL:
        g -= 2
    axis = np.linspace(-B.radius / 4, B.radius / 4, g)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    off = np.stack([a.reshape(-1) for a in mesh], axis=1)
    keep = (off ** 2).sum(axis=1) <= (B.radius / 4) ** 2 * (1 + 1e-12)
    return B.center + off[keep]


def touching_ball(mu, B, cfg=None):
    """Maximal empty open ball centred in ``B/4`` and its touching point.

    Returns the ball ``B'``, the support point ``z0`` on its boundary, the
    tangent hyperplane ``L`` at ``z0`` and the outward unit normal; the
    half-space ``U = {y : (y - z0).normal >= 0}`` is the side of ``L`` that
    does not contain ``B'``.
    """
    cfg = cfg or ProbeConfig()
    B = _as_ball(B)
    _check_centered(mu, B)
    inside = mu.ball_indices(B.center, B.radius)
    spread = float(np.ptp(mu.points[inside], axis=0).max()) if inside.size else 0.0
    if inside.size < 2 or spread < cfg.c2 * B.radius:
        raise ParameterError("support in B is a degenerate cluster; no "
                             "touching configuration at this scale")
    grid = _empty_grid(B, mu.d)
    dist, idx = mu.nearest(grid)
    k = int(np.argmax(dist))  # first maximiser in raster order
    rho = float(dist[k])
    if rho < cfg.c2 * B.radius:
        raise DensityError(f"largest empty ball has radius {rho:.3g} < "
                           f"c2 r(B) = {cfg.c2 * B.radius:.3g}")
    centre = grid[k]
    z0 = mu.points[idx[k]].copy()
    normal = (z0 - centre) / rho
    tangent = Plane(z0, _orth_complement(normal))
    return {"ball": Ball(centre, rho), "z0": z0, "z0_index": int(idx[k]),
            "plane": tangent, "normal": normal}


def _orth_complement(v):
    d = v.shape[0]
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(d)]))
    return q[:, 1:d].T.copy()


def _min_beta_over(mu, centres, radii, m, threshold, seed):
    """Smallest ``beta^(m)`` over the given balls, stopping at the first
    value below ``threshold``."""
    worst = (math.inf, None)
    for c in centres:
        for r in radii:
            v = beta_m(mu, Ball(c, r), m, seed=seed).value
            if v < worst[0]:
                worst = (v, {"center": c.tolist(), "radius": r})
            if v < threshold:
                return worst
    return worst


def touch_pairing_probe(mu, B, cfg=None, hypothesis_centres=6):
    """The touching-point functional along the ladder
    ``r_j = (2/eps)^j kappa r(B)``, ``j = 1..N`` with ``r_N <= r(B')``.

    For every rung the table holds the normal component of
    ``R_{kappa r(B), r_j} mu(z0)`` and the sup over support points ``x`` with
    ``|x - z0| < kappa r(B)`` of ``|(x - z0)/(kappa r(B)) . R mu(z0)|``.
    The hypothesis (AD bounds and ``beta^(d-1) >= eps`` at scales
    ``kappa r(B)..2r(B)``) is checked on a net of centres and dyadic radii.
    """
    cfg = cfg or ProbeConfig()
    B = _as_ball(B)
    if not (0 < cfg.kappa < 1):
        raise ParameterError("kappa must lie in (0, 1)")
    tb = touching_ball(mu, B, cfg)
    z0, rho, normal = tb["z0"], tb["ball"].radius, tb["normal"]
    r0 = cfg.kappa * B.radius
    q = 2.0 / cfg.eps
    ladder = []
    rj = r0 * q
    while rj <= rho * (1 + 1e-12):
        ladder.append(rj)
        rj *= q
    if not ladder:
        raise ParameterError(f"empty ladder: kappa r(B) (2/eps) = {r0 * q:.3g} "
                             f"exceeds r(B') = {rho:.3g}")

    edges = np.array([r0] + ladder)
    shells, _ = kernels.riesz_shells(np.ascontiguousarray(mu.points),
                                     np.ascontiguousarray(mu.weights), z0,
                                     edges, mu.n)
    cum = np.cumsum(shells, axis=0)
    table, best = [], (-1.0, None, None)
    for j, (r, vec) in enumerate(zip(ladder, cum), start=1):
        # x ranges over B(z0, kappa r(B)) and the pairing is scaled by it
        val, x = pairing_sup(mu, z0, r0, vec)
        table.append({"N": j, "r": r, "normal_component": float(vec @ normal),
                      "pairing": val})
        if val > best[0]:
            best = (val, x, r)

    # hypothesis: AD bounds and non-flatness in codimension one
    inside = mu.ball_indices(B.center, B.radius)
    net = inside[farthest_point_net(mu.points[inside], hypothesis_centres,
                                    int(np.argmin(((mu.points[inside] - B.center) ** 2).sum(axis=1))))]
    centres = [mu.points[i] for i in net] + [z0]
    radii = _dyadic_radii(4 * B.radius, r0)
    ad_ratios = [mu.mass_of(mu.ball_indices(c, r)) / r ** mu.n
                 for c in centres for r in radii]
    ad_ok = bool(min(ad_ratios) >= 1 / cfg.c1 and max(ad_ratios) <= cfg.c1)
    if mu.d - 1 <= 0:
        raise ParameterError("ambient dimension must be at least 2")
    min_beta, where = _min_beta_over(mu, centres, radii, mu.d - 1, cfg.eps,
                                     cfg.seed)
    hyp = bool(ad_ok and min_beta >= cfg.eps)
    meas = {"max_pairing": best[0], "reaches_M": bool(best[0] >= cfg.M),
            "ladder": table, "kappa_r": r0, "touching_radius": rho,
            "ad_ratio_range": [min(ad_ratios), max(ad_ratios)],
            "min_beta_codim1": min_beta}
    wit = {"z0": z0.tolist(), "touching_center": tb["ball"].center.tolist(),
           "normal": normal.tolist(),
           "x": None if best[1] is None else best[1].tolist(), "r": best[2],
           "flattest_ball": where}
    return _report("touch_pairing_probe", cfg, hyp, meas, wit,
                   ball={"center": B.center.tolist(), "radius": B.radius})


def dimension_descent(mu, B, m, cfg=None, tau_floor=None):
    """Given ``beta^(m)(B) <= delta``, look for a ball where the measure is
    close to an (m-1)-plane.

    The search runs on the projection of ``mu`` restricted to ``B`` onto the
    fitted m-plane; the ball found there is lifted to the support point it
    came from and its ``beta^(m-1)`` is recomputed on ``mu`` itself.
    """
    cfg = cfg or ProbeConfig()
    B = _as_ball(B)
    m = int(m)
    if not (mu.n < m <= mu.d):
        raise ParameterError(f"need n < m <= d, got m={m}")
    tau_floor = cfg.tau if tau_floor is None else tau_floor
    top = beta_m(mu, B, m, seed=cfg.seed)
    hyp = bool(top.value <= cfg.delta)
    base = {"beta_m": top.value, "m": m}
    if not hyp:
        rep = _report("dimension_descent", cfg, False, base, {}, m=m)
        raise HypothesisNotMet(f"beta^({m})(B) = {top.value:.4g} > delta = "
                               f"{cfg.delta}", rep)
    local = restrict(mu, B)
    idx = mu.ball_indices(B.center, B.radius)
    if m < mu.d:
        proj_pts = top.plane.project(local.points)
    else:
        proj_pts = local.points
    # the projection is a measure on the m-plane; beta^(m-1) lives inside it
    proj = DiscreteMeasure(proj_pts, local.weights, min(mu.n, m - 1) or 1,
                           region=(B.center, B.radius))
    centre_proj = (top.plane.project(B.center)[0] if m < mu.d else B.center)
    found = find_flat_ball(proj, Ball(_snap(proj, centre_proj), B.radius),
                           cfg.eps, tau_floor, m=m - 1, seed=cfg.seed)
    meas = dict(base, found=found["measurements"]["found"],
                projected_beta=found["measurements"]["beta"],
                tau=found["measurements"]["tau"])
    wit = {"plane": top.plane.to_dict()}
    if meas["found"]:
        fb = found["witnesses"]["ball"]
        _, k = proj.nearest(np.asarray(fb["center"]))
        lifted = Ball(mu.points[idx[int(k[0])]], fb["radius"])
        lb = beta_m(mu, lifted, m - 1, seed=cfg.seed)
        meas.update(beta_lifted=lb.value, lifted_ok=bool(lb.value <= cfg.eps))
        wit["ball"] = {"center": lifted.center.tolist(),
                       "radius": lifted.radius}
    return _report("dimension_descent", cfg, True, meas, wit, m=m)


def _snap(mu, x):
    _, k = mu.nearest(x)
    return mu.points[int(k[0])]


def flat_to_bilateral_probe(mu, x, r, delta, seed=0):
    """``beta(B(x, r/delta)) <= delta^2`` against ``bbeta(B(x, r))``."""
    if not (0 < delta < 1):
        raise ParameterError("delta must lie in (0, 1)")
    x = np.asarray(x, dtype=np.float64)
    big = Ball(x, r / delta)
    _check_extent(mu, big, "enlarged ball")
    b_big = beta_m(mu, big, seed=seed)
    small = bbeta(mu, Ball(x, r), candidates=(b_big.plane,), seed=seed)
    hyp = bool(b_big.value <= delta ** 2)
    meas = {"beta_enlarged": b_big.value, "threshold": delta ** 2,
            "bbeta": small.value, "bbeta_certified": small.certified,
            "resolution_floor": 2 * mu.spacing / r}
    wit = {"plane": small.plane.to_dict(),
           "achieving_point": np.asarray(small.achieving_point).tolist()}
    return _report("flat_to_bilateral_probe", None, hyp, meas, wit,
                   x=x.tolist(), r=float(r), delta=float(delta))


def stability_probe(mu, B, cfg=None):
    """``beta(2^k B)`` for ``k = 1..N`` against ``bbeta(B)``."""
    cfg = cfg or ProbeConfig()
    B = _as_ball(B)
    _check_extent(mu, B.scaled(2 ** cfg.N), f"ladder top 2^{cfg.N} B =")
    ladder, prev = [], ()
    for k in range(1, cfg.N + 1):
        res = beta_m(mu, B.scaled(2 ** k), candidates=prev, seed=cfg.seed)
        ladder.append({"k": k, "radius": B.radius * 2 ** k, "beta": res.value})
        prev = (res.plane,)
    hyp = bool(all(row["beta"] <= cfg.delta0 for row in ladder))
    bb = bbeta(mu, B, seed=cfg.seed)
    meas = {"ladder": ladder, "bbeta": bb.value,
            "bbeta_certified": bb.certified,
            "resolution_floor": 2 * mu.spacing / B.radius}
    wit = {"plane": bb.plane.to_dict()}
    return _report("stability_probe", cfg, hyp, meas, wit,
                   ball={"center": B.center.tolist(), "radius": B.radius})


def persistence_probe(mu, B, delta, eta, samples, seed=0):
    """Fraction of sampled sub-balls ``B' in B/2`` with ``bbeta(B') <= eta``.

    Radii are dyadic from ``r(B)/4`` down to ``8h``.  A quarter of the
    centres per radius are the support points farthest from the plane of
    ``B`` (where a hidden defect would sit), the rest are uniform draws.
    """
    B = _as_ball(B)
    top = beta_m(mu, B, seed=seed)
    cfg_view = {"delta": delta, "eta": eta, "samples": samples, "seed": seed}
    if top.value > delta:
        rep = _report("persistence_probe", None, False,
                      {"beta": top.value}, {}, **cfg_view)
        raise HypothesisNotMet(f"beta(B) = {top.value:.4g} > delta = {delta}",
                               rep)
    radii = _dyadic_radii(B.radius / 2, 8 * mu.spacing)
    if not radii:
        raise ParameterError("ball too small for sub-balls above resolution")
    rng = np.random.default_rng(seed)
    per = max(1, samples // len(radii))
    rows = []
    for rho in radii:
        pool = mu.ball_indices(B.center, B.radius / 2 - rho)
        if pool.size == 0:
            continue
        off = top.plane.distances(mu.points[pool])
        k_far = max(1, per // 4)
        far = pool[np.argsort(-off, kind="stable")[:k_far]]
        rest = rng.choice(pool, size=min(per - far.size, pool.size),
                          replace=False) if per > far.size else []
        for c in np.concatenate([far, np.sort(np.asarray(rest, dtype=np.int64))]):
            sub = Ball(mu.points[c], rho)
            v = bbeta(mu, sub, candidates=(top.plane,), seed=seed).value
            rows.append({"center": mu.points[c].tolist(), "radius": rho,
                         "bbeta": v})
    if not rows:
        raise ParameterError("no sub-balls could be placed")
    ok = sum(1 for row in rows if row["bbeta"] <= eta)
    worst = max(rows, key=lambda row: row["bbeta"])
    meas = {"beta": top.value, "fraction": ok / len(rows),
            "evaluated": len(rows), "worst_bbeta": worst["bbeta"]}
    return _report("persistence_probe", None, True, meas,
                   {"worst_ball": worst, "table": rows}, **cfg_view)


def _cell_representatives(u, w, spacing, origin):
    """Per grid cell of side ``spacing`` (in ``u``), the member whose
    transverse position is nearest the cell's coordinatewise median."""
    cells = np.floor((u - origin) / spacing).astype(np.int64)
    order = np.lexsort(cells.T[::-1])
    cs = cells[order]
    brk = np.flatnonzero(np.any(np.diff(cs, axis=0) != 0, axis=1)) + 1
    groups = np.split(order, brk)
    reps = np.empty(len(groups), dtype=np.int64)
    for g, members in enumerate(groups):
        if members.size == 1:
            reps[g] = members[0]
            continue
        med = np.median(w[members], axis=0)
        k = np.argmin(((w[members] - med) ** 2).sum(axis=1))
        reps[g] = members[k]
    return reps, groups


def bpg_check(mu, B, slope, divisions=128, tol=1e-9, seed=0):
    """Mass fraction of ``mu(B)`` carried by a ``slope``-Lipschitz graph over
    the minimax n-plane of ``B``.

    Points are bucketed by their projection onto the plane at spacing
    ``r(B)/divisions``.  One representative per bucket is kept if the kept
    set stays ``slope``-Lipschitz (greedy, nearest buckets first); a kept
    bucket contributes the members that are ``slope``-Lipschitz relative to
    its representative.
    """
    B = _as_ball(B)
    _check_centered(mu, B)
    idx = mu.ball_indices(B.center, B.radius)
    P = mu.points[idx]
    n = mu.n
    if n == mu.d:
        meas = {"theta": 1.0, "selected": int(idx.size), "cells": int(idx.size)}
        return _report("bpg_check", None, None, meas, {}, slope=slope)
    plane = minimax_fit(P, n, seed=seed)
    u = plane.coords(P)
    w = (P - plane.base) @ plane.complement().T
    o = plane.coords(B.center[None])[0]
    spacing = B.radius / divisions
    reps, groups = _cell_representatives(u, w, spacing, o - B.radius)
    dist = np.sqrt(((u[reps] - o) ** 2).sum(axis=1))
    order = np.argsort(dist, kind="stable")
    keep = kernels.lipschitz_greedy(u[reps], w[reps], order, slope, tol)
    wts = mu.weights[idx]
    credited = []
    for g in np.flatnonzero(keep):
        mem = groups[g]
        rep = reps[g]
        du = np.sqrt(((u[mem] - u[rep]) ** 2).sum(axis=1))
        dw = np.sqrt(((w[mem] - w[rep]) ** 2).sum(axis=1))
        credited.append(mem[dw <= slope * du + tol])
    credited = (np.concatenate(credited) if credited
                else np.zeros(0, dtype=np.int64))
    theta = math.fsum(wts[credited]) / math.fsum(wts)
    selected = idx[reps[keep]]
    meas = {"theta": theta, "cells": int(reps.size),
            "selected": int(selected.size),
            "credited_points": int(credited.size)}
    wit = {"plane": plane.to_dict(), "selected_indices": selected.tolist()}
    return _report("bpg_check", None, None, meas, wit, slope=float(slope),
                   divisions=divisions,
                   ball={"center": B.center.tolist(), "radius": B.radius})


def verify_lipschitz(mu, plane, indices, slope, tol=1e-9):
    """Exhaustive check that the points form a ``slope``-graph over ``plane``;
    returns the worst excess ``|dw| - slope |du|`` (<= tol means valid)."""
    plane = plane if isinstance(plane, Plane) else Plane(
        np.asarray(plane["base"]), np.asarray(plane["basis"]))
    P = mu.points[np.asarray(indices, dtype=np.int64)]
    u = plane.coords(P)
    w = (P - plane.base) @ plane.complement().T
    worst = -math.inf
    for a in range(0, P.shape[0], 512):
        du = np.sqrt(((u[a:a + 512, None] - u[None]) ** 2).sum(axis=2))
        dw = np.sqrt(((w[a:a + 512, None] - w[None]) ** 2).sum(axis=2))
        worst = max(worst, float((dw - slope * du).max()))
    return worst
