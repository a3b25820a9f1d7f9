"""Reading and writing point clouds.

CSV files carry a header ``x0,...,x{d-1}`` with an optional trailing
``weight`` column.  JSON files hold ``{d, n, points, weights}``.  A generated
CSV is accompanied by ``<file>.spec``, the generator's key-value config, from
which the intrinsic dimension and data region are recovered.
"""
import csv
import json
import math
import os

import numpy as np

from .errors import InputFormatError, SchemaError
from .generators import GeneratorSpec, generate, region_of
from .measure import DiscreteMeasure

# ingested clouds without weights are normalised so that the median density
# at radius REF_SPACINGS * h is one
REF_SPACINGS = 8
_DENSITY_SAMPLES = 1000


def sidecar_path(path):
    return os.fspath(path) + ".spec"


def _float(text, line, col):
    try:
        v = float(text)
    except ValueError:
        raise InputFormatError(f"line {line}: column {col}: not a number: "
                               f"{text!r}") from None
    if not math.isfinite(v):
        raise InputFormatError(f"line {line}: column {col}: non-finite value")
    return v


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        try:
            header = next(rows)
        except StopIteration:
            raise InputFormatError("line 1: empty file") from None
        header = [h.strip() for h in header]
        has_w = bool(header) and header[-1] == "weight"
        coords = header[:-1] if has_w else header
        if not coords or coords != [f"x{i}" for i in range(len(coords))]:
            raise InputFormatError("line 1: header must be x0,...,x{d-1} "
                                   "optionally followed by weight")
        d = len(coords)
        width = len(header)
        pts, wts = [], []
        for line, row in enumerate(rows, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise SchemaError(f"line {line}: expected {width} fields, "
                                  f"got {len(row)}")
            vals = [_float(c, line, k) for k, c in enumerate(row)]
            pts.append(vals[:d])
            if has_w:
                wts.append(vals[d])
    if not pts:
        raise InputFormatError("no data rows")
    return np.array(pts), (np.array(wts) if has_w else None)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"line {exc.lineno}: {exc.msg}") from None
    for key in ("d", "n", "points"):
        if key not in doc:
            raise InputFormatError(f"missing key {key!r}")
    pts = np.asarray(doc["points"], dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != int(doc["d"]):
        raise SchemaError(f"points do not have d = {doc['d']} columns")
    w = doc.get("weights")
    if w is not None:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (pts.shape[0],):
            raise SchemaError("weights and points differ in length")
    return pts, w, int(doc["n"])


def default_weights(points, n):
    """Uniform weights scaled so the median of ``mu(B(x, r))/r^n`` at
    ``r = REF_SPACINGS * h`` over sampled points is one."""
    probe = DiscreteMeasure(points, np.ones(points.shape[0]), n)
    h = probe.spacing
    if h <= 0:
        return np.ones(points.shape[0])
    r = REF_SPACINGS * h
    rng = np.random.default_rng(0)
    k = min(_DENSITY_SAMPLES, points.shape[0])
    sample = np.sort(rng.choice(points.shape[0], k, replace=False))
    counts = [probe.ball_indices(points[i], r).size for i in sample]
    return np.full(points.shape[0], r ** n / float(np.median(counts)))


def read_cloud(path, n=None, d=None):
    """Load a measure from CSV or JSON.

    The intrinsic dimension comes from the file (JSON), the ``.spec`` sidecar,
    or ``n``; a disagreement between sources is a schema error.
    """
    path = os.fspath(path)
    spec = None
    if os.path.exists(sidecar_path(path)):
        with open(sidecar_path(path), encoding="utf-8") as fh:
            spec = GeneratorSpec.from_config(fh.read())
    if path.lower().endswith(".json"):
        pts, w, n_file = _read_json(path)
    else:
        pts, w = _read_csv(path)
        n_file = None
    sources = [v for v in (n_file, spec.n if spec else None, n) if v is not None]
    if not sources:
        raise SchemaError("intrinsic dimension unknown: pass n or provide "
                          "a .spec sidecar")
    if len(set(sources)) > 1:
        raise SchemaError(f"conflicting intrinsic dimensions {sorted(set(sources))}")
    n = sources[0]
    if d is not None and pts.shape[1] != d:
        raise SchemaError(f"file has d = {pts.shape[1]}, expected {d}")
    if spec is not None and spec.d != pts.shape[1]:
        raise SchemaError(f"sidecar says d = {spec.d}, file has {pts.shape[1]}")
    if w is None:
        w = default_weights(pts, n)
    region = region_of(spec) if spec is not None else None
    prov = {"source": os.path.basename(path)}
    if spec is not None:
        prov["generator"] = spec.to_config()
    return DiscreteMeasure(pts, w, n, prov, region)


def cloud_csv(mu):
    """CSV text of ``mu``; ``repr`` floats so reading back is exact."""
    lines = [",".join([f"x{i}" for i in range(mu.d)] + ["weight"])]
    for p, w in zip(mu.points.tolist(), mu.weights.tolist()):
        lines.append(",".join(repr(v) for v in p) + "," + repr(w))
    return "\n".join(lines) + "\n"


def write_generated(spec, path):
    """Generate ``spec`` and write the CSV plus its ``.spec`` sidecar."""
    mu = generate(spec)
    write_text(path, cloud_csv(mu))
    write_text(sidecar_path(path), spec.to_config())
    return mu


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
