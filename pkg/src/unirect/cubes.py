"""Dyadic cube systems on discrete measures.

The cloud is first scaled by a power of two so that its diameter lies in
``(2^(-j_min-1), 2^(-j_min)]``.  Generation ``j`` is obtained from ``j-1`` by
splitting every cube at the midpoint of its widest coordinate extent until
each piece has diameter at most ``2^-j``.  Pieces therefore nest and
partition exactly; the centre ``z_Q`` is the member nearest the middle of the
piece's bounding box.
"""
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (EmptyMeasureError, IdentityError, ParameterError,
                     ScaleError)
from .geometry import Ball

# exact pairwise diameters up to this many points, bounding box above
EXACT_DIAM_LIMIT = 1024


def fingerprint(mu):
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(mu.points).tobytes())
    h.update(np.ascontiguousarray(mu.weights).tobytes())
    return h.hexdigest()


def _diam(P):
    if P.shape[0] <= EXACT_DIAM_LIMIT:
        return kernels.diameter(P)
    lo, hi = P.min(axis=0), P.max(axis=0)
    return float(np.sqrt(((hi - lo) ** 2).sum()))


@dataclass
class MuCube:
    id: tuple
    center: np.ndarray
    side: float
    members: np.ndarray
    mass: float
    center_index: int
    parent: tuple = None
    children: list = field(default_factory=list)

    @property
    def generation(self):
        return self.id[0]

    def to_dict(self, include_members=False):
        out = {"generation": self.id[0], "id": list(self.id),
               "center": self.center.tolist(), "side": self.side,
               "parent": list(self.parent) if self.parent else None,
               "mass": self.mass, "member_count": int(self.members.size)}
        if include_members:
            out["members"] = self.members.tolist()
        return out


class CubeForest:
    """Generations ``j_min..j_max`` of nested cubes; ids are ``(j, ordinal)``."""

    def __init__(self, mu, j_min, j_max, scale, generations):
        self.j_min, self.j_max = j_min, j_max
        self.scale = scale
        self.generations = generations
        self.cubes = {q.id: q for gen in generations for q in gen}
        self.n = mu.n
        self.size = mu.size
        self.weights = mu.weights
        self.fingerprint = fingerprint(mu)

    def __getitem__(self, cid):
        try:
            return self.cubes[tuple(cid)]
        except KeyError:
            raise ParameterError(f"unknown cube id {cid!r}") from None

    def __contains__(self, cid):
        return tuple(cid) in self.cubes

    def __len__(self):
        return len(self.cubes)

    def generation(self, j):
        return self.generations[j - self.j_min]

    def ids(self):
        return [q.id for gen in self.generations for q in gen]

    def cube_ball(self, cube):
        return cube_ball(self[cube] if isinstance(cube, tuple) else cube)

    def ancestors(self, cid):
        """Ancestors of ``cid``, nearest first."""
        out = []
        p = self[cid].parent
        while p is not None:
            out.append(p)
            p = self.cubes[p].parent
        return out

    def is_within(self, cid, rid):
        """``(Q, j) subset (R, k)``: Q equals R or descends from it."""
        cid, rid = tuple(cid), tuple(rid)
        if cid == rid:
            return True
        return rid in self.ancestors(cid)

    def descendants(self, rid, include_self=True):
        rid = tuple(rid)
        out = [rid] if include_self else []
        stack = list(reversed(self[rid].children))
        while stack:
            q = stack.pop()
            out.append(q)
            stack.extend(reversed(self.cubes[q].children))
        return out

    def check_measure(self, mu):
        if mu.size != self.size or fingerprint(mu) != self.fingerprint:
            raise IdentityError("forest was built on a different measure")

    def to_json(self, include_members=False):
        return [q.to_dict(include_members) for gen in self.generations
                for q in gen]


def cube_ball(cube):
    """``B_Q = B(z_Q, 3 l(Q))``."""
    return Ball(cube.center, 3.0 * cube.side)


def normalization_scale(diam, j_min):
    """Power of two ``s`` with ``s * diam`` in ``(2^(-j_min-1), 2^(-j_min)]``."""
    if diam <= 0:
        return 1.0
    k = math.floor(-j_min - math.log2(diam))
    s = 2.0 ** k
    # guard the log2 rounding at exact powers of two
    while s * diam > 2.0 ** (-j_min):
        s /= 2
    while s * diam * 2 <= 2.0 ** (-j_min):
        s *= 2
    return s


def _split(P, idx, limit):
    """Split ``idx`` into pieces of diameter <= ``limit`` (in ``P`` units),
    cutting at the midpoint of the widest extent; order is low side first."""
    sub = P[idx]
    if idx.size <= 1 or _diam(sub) <= limit:
        return [idx]
    lo, hi = sub.min(axis=0), sub.max(axis=0)
    ax = int(np.argmax(hi - lo))
    mid = 0.5 * (lo[ax] + hi[ax])
    left = sub[:, ax] <= mid
    return _split(P, idx[left], limit) + _split(P, idx[~left], limit)


def _center_index(P, idx):
    sub = P[idx]
    mid = 0.5 * (sub.min(axis=0) + sub.max(axis=0))
    d2 = ((sub - mid) ** 2).sum(axis=1)
    return int(idx[int(np.argmin(d2))])


def finest_generation(mu, j_min):
    """Largest ``j_max`` that :func:`build_cubes` accepts for ``j_min``."""
    scale = normalization_scale(mu.diameter_bound, j_min)
    h = mu.spacing * scale
    if h <= 0:
        return j_min
    return max(j_min, math.floor(-math.log2(4 * h)))


def build_cubes(mu, j_min, j_max):
    """Build generations ``j_min..j_max`` of dyadic cubes on ``mu``."""
    if mu is None or mu.size == 0:
        raise EmptyMeasureError("cannot build cubes on an empty measure")
    j_min, j_max = int(j_min), int(j_max)
    if j_min > j_max:
        raise ParameterError("need j_min <= j_max")
    scale = normalization_scale(mu.diameter_bound, j_min)
    h = mu.spacing * scale
    # the top generation needs no resolution; only subdivisions do
    if mu.size > 1 and j_max > j_min and 2.0 ** (-j_max) < 4 * h:
        raise ScaleError(f"generation {j_max} side {2.0 ** -j_max:.3g} is below "
                         f"4x the sample spacing {h:.3g} (normalised units)")
    P = mu.points * scale
    w = mu.weights
    generations = []
    pieces = [(np.arange(mu.size), None)]
    for j in range(j_min, j_max + 1):
        limit = 2.0 ** (-j)
        gen = []
        for idx, parent in pieces:
            for part in _split(P, idx, limit):
                part = np.sort(part)
                ci = _center_index(P, part)
                q = MuCube(id=(j, len(gen)), center=mu.points[ci].copy(),
                           side=limit / scale, members=part,
                           mass=math.fsum(w[part]), center_index=ci,
                           parent=parent)
                gen.append(q)
                if parent is not None:
                    parent_cube = generations[-1][parent[1]]
                    parent_cube.children.append(q.id)
        generations.append(gen)
        pieces = [(q.members, q.id) for q in gen]
    return CubeForest(mu, j_min, j_max, scale, generations)


def _separation(mu, cube):
    """``dist(z_Q, supp minus Q)``, or inf when Q is everything."""
    if cube.members.size == mu.size:
        return math.inf
    inside = np.zeros(mu.size, dtype=bool)
    inside[cube.members] = True
    rho = cube.side / 8
    top = 4 * mu.diameter_bound + cube.side
    while True:
        cand = np.asarray(mu.tree.query_ball_point(cube.center, rho),
                          dtype=np.int64)
        cand = cand[~inside[cand]] if cand.size else cand
        if cand.size:
            d = np.sqrt(((mu.points[cand] - cube.center) ** 2).sum(axis=1))
            return float(d.min())
        if rho > top:
            return math.inf
        rho *= 2


def verify_cube_axioms(forest, mu, region_only=False):
    """Exact partition/nesting checks and measured constants.

    ``diam_const`` is max diam(Q)/l(Q) (diameter upper bounds above
    ``EXACT_DIAM_LIMIT`` members), ``mass_consts`` the extremes of
    mu(Q)/l(Q)^n and ``sep_const`` the min dist(z_Q, supp - Q)/l(Q).
    Mass constants are also given over cubes whose ball lies in the data
    region, where boundary truncation cannot distort them.
    """
    forest.check_measure(mu)
    partition_ok = True
    nesting_ok = True
    for gen in forest.generations:
        seen = np.zeros(mu.size, dtype=np.int64)
        for q in gen:
            seen[q.members] += 1
        if not np.all(seen == 1):
            partition_ok = False
        if math.fsum(q.mass for q in gen) != mu.total_mass:
            # fsum of fsums can differ in the last ulp only if a point is lost
            partition_ok = partition_ok and math.isclose(
                math.fsum(q.mass for q in gen), mu.total_mass, rel_tol=1e-15)
    for gen in forest.generations[:-1]:
        for q in gen:
            kids = [forest.cubes[c] for c in q.children]
            if not kids:
                nesting_ok = False
                continue
            union = np.sort(np.concatenate([k.members for k in kids]))
            if union.size != q.members.size or not np.array_equal(union, q.members):
                nesting_ok = False
            if any(k.parent != q.id for k in kids):
                nesting_ok = False
    for gen in forest.generations[1:]:
        for q in gen:
            if q.parent is None or q.id not in forest.cubes[q.parent].children:
                nesting_ok = False

    diam_ratio, sep = 0.0, math.inf
    mass_all, mass_in = [], []
    worst_sep = None
    for gen in forest.generations:
        for q in gen:
            diam_ratio = max(diam_ratio, _diam(mu.points[q.members]) / q.side)
            ratio = q.mass / q.side ** mu.n
            mass_all.append(ratio)
            if mu.contains_ball(cube_ball(q)):
                mass_in.append(ratio)
            s = _separation(mu, q) / q.side
            if s < sep:
                sep, worst_sep = s, q.id

    def band(vals):
        if not vals:
            return None
        lo, hi = min(vals), max(vals)
        return {"min": lo, "max": hi, "band": hi / lo}

    return {
        "partition_ok": partition_ok,
        "nesting_ok": nesting_ok,
        "diam_const": diam_ratio,
        "mass_consts": band(mass_all),
        "mass_consts_in_region": band(mass_in),
        "sep_const": sep,
        "sep_worst": list(worst_sep) if worst_sep else None,
        "scale": forest.scale,
        "cube_count": len(forest),
    }
