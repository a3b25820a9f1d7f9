"""Sampled versions of the model measures.

All generators are deterministic functions of their :class:`GeneratorSpec`.
Weights discretise the target measure: each sample carries the mass of the
piece of surface it represents.
"""
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.stats import qmc

from .errors import EmptyMeasureError, SpecificationError
from .measure import DiscreteMeasure

KINDS = ("flat-plane", "light-cone", "cone-product", "lipschitz-graph",
         "four-corner-cantor")

# lipschitz-graph: relative amplitudes and frequencies (cycles per extent)
GRAPH_MODES = ((0.75, 0.25), (0.25, 0.75))


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    d: int
    n: int
    extent: float = 1.0
    count: int = 1000
    slope: float = 0.5
    seed: int = 0
    grading: str = "uniform"   # cone kinds only: "uniform" or "log"
    grading_ratio: float = 1e4  # log grading: outer/inner parameter radius

    def validate(self):
        if self.kind not in KINDS:
            raise SpecificationError(f"unknown generator kind {self.kind!r}")
        if self.count < 1:
            raise EmptyMeasureError("count must be at least 1")
        if not (0 < self.n <= self.d):
            raise SpecificationError(f"need 0 < n <= d, got n={self.n}, d={self.d}")
        if not self.extent > 0:
            raise SpecificationError("extent must be positive")
        if self.kind == "light-cone" and (self.d, self.n) != (4, 3):
            raise SpecificationError("light-cone requires d=4, n=3")
        if self.kind == "cone-product" and not (self.n >= 3 and self.d >= self.n + 1):
            raise SpecificationError("cone-product requires n >= 3, d >= n+1")
        if self.kind == "four-corner-cantor" and (self.d, self.n) != (2, 1):
            raise SpecificationError("four-corner-cantor requires n=1, d=2")
        if self.kind == "lipschitz-graph" and not (self.n < self.d and self.slope >= 0):
            raise SpecificationError("lipschitz-graph requires n < d and slope >= 0")
        if self.grading not in ("uniform", "log"):
            raise SpecificationError(f"unknown grading {self.grading!r}")

    def to_config(self):
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_config(cls, text):
        import configparser
        cp = configparser.ConfigParser()
        cp.read_string("[spec]\n" + text)
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, val in cp["spec"].items():
            if key not in types:
                raise SpecificationError(f"unknown generator key {key!r}")
            t = types[key]
            kw[key] = {"int": int, "float": float, "str": str}[
                t if isinstance(t, str) else t.__name__](val)
        return cls(**kw)


def _grid_side(count, n):
    k = max(1, int(round(count ** (1.0 / n))))
    while k ** n < count:
        k += 1
    while k > 1 and (k - 1) ** n >= count:
        k -= 1
    return k


def _centered_grid(count, n, extent):
    """``count`` cell centres of a cubic lattice on ``[-extent, extent]^n``,
    keeping those closest to the origin (ties in raster order)."""
    k = _grid_side(count, n)
    hs = 2.0 * extent / k
    axis = -extent + hs * (np.arange(k) + 0.5)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    u = np.stack([g.reshape(-1) for g in grids], axis=1)
    if u.shape[0] > count:
        order = np.argsort((u * u).sum(axis=1), kind="stable")[:count]
        u = u[np.sort(order)]
    return u, hs


def _flat_plane(spec):
    u, hs = _centered_grid(spec.count, spec.n, spec.extent)
    pts = np.zeros((u.shape[0], spec.d))
    pts[:, :spec.n] = u
    w = np.full(u.shape[0], hs ** spec.n)
    return pts, w, (np.zeros(spec.d), spec.extent)


def _graph_parameters(spec):
    rng = np.random.default_rng(spec.seed)
    k = spec.d - spec.n
    dirs = rng.normal(size=(k, len(GRAPH_MODES), spec.n))
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    phases = rng.uniform(0, 2 * np.pi, size=(k, len(GRAPH_MODES)))
    return dirs, phases


def graph_function(spec, u):
    """Height function of the generated Lipschitz graph and its Jacobian.

    Each of the ``d-n`` components is a sum of plane waves whose gradients
    have norm at most ``slope/sqrt(d-n)``, so the Jacobian's Frobenius norm
    (hence the Lipschitz constant) is at most ``slope``.
    """
    dirs, phases = _graph_parameters(spec)
    k = spec.d - spec.n
    amp = spec.slope / math.sqrt(k)
    g = np.zeros((u.shape[0], k))
    jac = np.zeros((u.shape[0], k, spec.n))
    for c in range(k):
        for q, (a, f) in enumerate(GRAPH_MODES):
            omega = 2 * np.pi * f / spec.extent
            arg = omega * (u @ dirs[c, q]) + phases[c, q]
            g[:, c] += amp * a * np.sin(arg) / omega
            jac[:, c, :] += amp * a * np.cos(arg)[:, None] * dirs[c, q]
    return g, jac


def _lipschitz_graph(spec):
    u, hs = _centered_grid(spec.count, spec.n, spec.extent)
    g, jac = graph_function(spec, u)
    gram = np.eye(spec.n)[None] + np.einsum("pki,pkj->pij", jac, jac)
    area = np.sqrt(np.linalg.det(gram))
    pts = np.concatenate([u, g], axis=1)
    return pts, hs ** spec.n * area, (np.zeros(spec.d), spec.extent)


def _cone_product(spec):
    """Both sheets of ``x4 = +-|v|`` (v in R^3) times a flat factor."""
    n, d, e = spec.n, spec.d, spec.extent
    rho_max = e / math.sqrt(2.0)
    flat = n - 3
    halves = (spec.count - spec.count // 2, spec.count // 2)
    seeds = np.random.SeedSequence(spec.seed).spawn(2)
    pts, wts = [], []
    for sign, m, ss in zip((1.0, -1.0), halves, seeds):
        if m == 0:
            continue
        u = qmc.Halton(d=n, scramble=True, seed=np.random.default_rng(ss)).random(m)
        if spec.grading == "log":
            rho_min = rho_max / spec.grading_ratio
            lr = math.log(rho_max / rho_min)
            rho = rho_min * np.exp(lr * u[:, 0])
            # parameter-space volume represented by each sample
            cell = 4 * np.pi * rho ** 3 * lr / m
        else:
            rho = rho_max * np.cbrt(u[:, 0])
            cell = np.full(m, 4 * np.pi / 3 * rho_max ** 3 / m)
        z = 1 - 2 * u[:, 1]
        phi = 2 * np.pi * u[:, 2]
        sz = np.sqrt(np.clip(1 - z * z, 0, None))
        v = rho[:, None] * np.stack([sz * np.cos(phi), sz * np.sin(phi), z], 1)
        p = np.zeros((m, d))
        p[:, :3] = v
        p[:, 3] = sign * np.sqrt((v * v).sum(axis=1))
        if flat:
            p[:, 4:4 + flat] = e * (2 * u[:, 3:] - 1)
        pts.append(p)
        wts.append(math.sqrt(2.0) * cell * (2 * e) ** flat)
    return np.concatenate(pts), np.concatenate(wts), (np.zeros(d), e)


def _cantor(spec):
    k = 0
    while 4 ** k < spec.count:
        k += 1
    side = 2.0 * spec.extent
    corners = np.array([[0.0, 0.0], [0.75, 0.0], [0.0, 0.75], [0.75, 0.75]])
    lower = np.zeros((1, 2))
    s = 1.0
    for _ in range(k):
        lower = (lower[:, None, :] + s * corners[None]).reshape(-1, 2)
        s /= 4.0
    pts = -spec.extent + side * (lower + s / 2)
    w = np.full(pts.shape[0], side * 4.0 ** (-k))
    return pts, w, (np.zeros(2), spec.extent * math.sqrt(2.0))


_BUILDERS = {
    "flat-plane": _flat_plane,
    "light-cone": _cone_product,
    "cone-product": _cone_product,
    "lipschitz-graph": _lipschitz_graph,
    "four-corner-cantor": _cantor,
}


def generate(spec):
    """Sample the measure described by ``spec``."""
    spec.validate()
    pts, w, region = _BUILDERS[spec.kind](spec)
    prov = {"generator": asdict(spec)}
    return DiscreteMeasure(pts, w, spec.n, prov, region)


def region_of(spec):
    """The region ``(center, radius)`` a generated cloud represents."""
    r = spec.extent * (math.sqrt(2.0) if spec.kind == "four-corner-cantor" else 1.0)
    return np.zeros(spec.d), r


def cantor_level(count):
    k = 0
    while 4 ** k < count:
        k += 1
    return k
