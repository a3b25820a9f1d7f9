"""Balls and affine planes."""
from dataclasses import dataclass

import numpy as np

from .errors import BasisError, ParameterError

ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class Ball:
    """Open ball ``B(center, radius)``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ParameterError("ball center must be finite")
        if not self.radius > 0:
            raise ParameterError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    def scaled(self, factor):
        return Ball(self.center, self.radius * factor)

    def contains(self, points):
        p = np.atleast_2d(points)
        return np.sqrt(((p - self.center) ** 2).sum(axis=1)) < self.radius


@dataclass(frozen=True)
class Plane:
    """Affine m-plane ``base + span(basis rows)``; ``basis`` is (m, d)."""

    base: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.base, dtype=np.float64).reshape(-1)
        U = np.asarray(self.basis, dtype=np.float64).reshape(-1, b.size)
        if U.shape[0] > b.size:
            raise BasisError("plane dimension exceeds ambient dimension")
        if U.shape[0]:
            err = np.abs(U @ U.T - np.eye(U.shape[0])).max()
            if err > ORTHO_TOL:
                raise BasisError(f"plane basis not orthonormal (error {err:.2e})")
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "basis", U)

    @property
    def m(self):
        return self.basis.shape[0]

    @property
    def d(self):
        return self.base.size

    def complement(self):
        """Orthonormal basis (rows) of the orthogonal complement."""
        d, m = self.d, self.m
        if m == 0:
            return np.eye(d)
        # full QR of the basis gives the complement in the trailing columns
        q, _ = np.linalg.qr(self.basis.T, mode="complete")
        return q[:, m:].T.copy()

    def project(self, points):
        p = np.atleast_2d(points) - self.base
        return self.base + (p @ self.basis.T) @ self.basis

    def coords(self, points):
        """In-plane coordinates of the orthogonal projections."""
        return (np.atleast_2d(points) - self.base) @ self.basis.T

    def distances(self, points):
        p = np.atleast_2d(points) - self.base
        resid = p - (p @ self.basis.T) @ self.basis
        return np.sqrt((resid * resid).sum(axis=1))

    def transformed(self, rotation, shift):
        """Image under ``x -> rotation @ x + shift``."""
        R = np.asarray(rotation, dtype=np.float64)
        return Plane(R @ self.base + shift, self.basis @ R.T)

    def to_dict(self):
        return {"base": self.base.tolist(), "basis": self.basis.tolist()}


def axis_plane(d, m, base=None):
    base = np.zeros(d) if base is None else np.asarray(base, dtype=np.float64)
    return Plane(base, np.eye(d)[:m])
