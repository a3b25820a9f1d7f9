"""JSON report emission.

Reports are ``{operation, params, results, resolution_floor, seed,
version}``, written with sorted keys so equal inputs give equal bytes.
Non-finite floats become ``null``.
"""
import dataclasses
import json
import math

import numpy as np

from .flatness import BetaResult
from .geometry import Ball, Plane

VERSION = "0.1.0"


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else ",".join(map(str, k)):
                jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Ball):
        return {"center": jsonable(obj.center), "radius": float(obj.radius)}
    if isinstance(obj, Plane):
        return obj.to_dict()
    if isinstance(obj, BetaResult):
        return jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj


def dumps(doc):
    return json.dumps(jsonable(doc), sort_keys=True, indent=1,
                      allow_nan=False) + "\n"


def make_report(operation, params, results, resolution_floor, seed):
    return {"operation": operation, "params": params, "results": results,
            "resolution_floor": resolution_floor, "seed": seed,
            "version": VERSION}
