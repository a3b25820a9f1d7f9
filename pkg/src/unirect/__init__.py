"""Numerical probes of uniform measures and uniform rectifiability."""
from ._accel import backend_name
from .carleson import (bbeta_family, carleson_check, carleson_sum, neps_flags,
                       tree_decompose, tree_packing_check, validate_decomposition,
                       wcd_membership, wcd_scan)
from .config import ProbeConfig
from .cubes import build_cubes, verify_cube_axioms
from .flatness import bbeta, beta_m, beta_profile, minimax_fit
from .generators import GeneratorSpec, generate
from .geometry import Ball, Plane
from .io import read_cloud
from .measure import (DiscreteMeasure, ad_check, ball_mass, blowdown,
                      project_pushforward, restrict, uniformity_scan)
from .report import VERSION as __version__
from .riesz import riesz_bound_scan, riesz_pairing, riesz_truncated

__all__ = [
    "Ball", "DiscreteMeasure", "GeneratorSpec", "Plane", "ProbeConfig",
    "ad_check", "backend_name", "ball_mass", "bbeta", "bbeta_family",
    "beta_m", "beta_profile", "blowdown", "build_cubes", "carleson_check",
    "carleson_sum", "generate", "minimax_fit", "neps_flags",
    "project_pushforward", "read_cloud", "restrict", "riesz_bound_scan",
    "riesz_pairing", "riesz_truncated", "tree_decompose",
    "tree_packing_check", "uniformity_scan", "validate_decomposition",
    "verify_cube_axioms", "wcd_membership", "wcd_scan",
]
