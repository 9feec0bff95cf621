"""
Credible regions from posterior draws.

Boxes use per-coordinate percentiles; ellipsoids use the draw mean, the
draw covariance with divisor N, and the ``level`` percentile r of the
Mahalanobis values, giving {theta : (theta - mean)' S^{-1} (theta - mean) <= r}.
Percentiles follow the linear-interpolation ("type 7") rule throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from lpmedian.engine.errors import (
    DegenerateRegionError,
    InsufficientDataError,
    InvalidInputError,
)

MAX_CONDITION = 1e12


@dataclass(frozen=True, slots=True)
class Hyperrectangle:
    lo: np.ndarray
    hi: np.ndarray
    level: float

    @property
    def diameter(self) -> float:
        """Mean coordinate width."""
        return float(np.mean(self.hi - self.lo))

    @property
    def diagonal(self) -> float:
        """Length of the main diagonal, ||hi - lo||_2."""
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def size(self) -> float:
        return self.diagonal

    def as_dict(self) -> dict:
        return {
            "type": "box",
            "level": self.level,
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "diameter": self.diameter,
            "diagonal": self.diagonal,
        }


@dataclass(frozen=True, slots=True)
class Ellipsoid:
    center: np.ndarray
    shape: np.ndarray
    radius: float
    level: float

    @property
    def size(self) -> float:
        return self.radius

    @property
    def inverse_shape(self) -> np.ndarray:
        return np.linalg.inv(self.shape)

    def as_dict(self) -> dict:
        return {
            "type": "ellipsoid",
            "level": self.level,
            "center": self.center.tolist(),
            "shape": self.shape.tolist(),
            "radius": self.radius,
            "chi2_reference_radius": chi2_reference_radius(len(self.center), self.level),
        }


@dataclass(frozen=True, slots=True)
class PrincipalAxes:
    vectors: np.ndarray  # row j is the j-th axis
    eigenvalues: np.ndarray
    lengths: np.ndarray

    def as_dict(self) -> dict:
        return {
            "axes": self.vectors.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "semi_axis_lengths": self.lengths.tolist(),
        }


Region = Hyperrectangle | Ellipsoid


def _as_draws(draws) -> np.ndarray:
    arr = np.asarray(draws, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        raise InvalidInputError("draws must be a finite N x k matrix")
    return arr


def _check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"level must lie in (0, 1), got {level}")
    return level


def hyperrectangle(draws, level: float = 0.95) -> Hyperrectangle:
    arr = _as_draws(draws)
    level = _check_level(level)
    if arr.shape[0] < 2:
        raise InsufficientDataError("a credible box needs at least 2 draws")
    lo, hi = np.quantile(arr, [(1 - level) / 2, (1 + level) / 2], axis=0, method="linear")
    return Hyperrectangle(lo=lo, hi=hi, level=level)


def ellipsoid(draws, level: float = 0.95) -> Ellipsoid:
    arr = _as_draws(draws)
    level = _check_level(level)
    n, k = arr.shape
    if n <= k:
        raise InsufficientDataError(f"a credible ellipsoid needs more than {k} draws")
    center = arr.mean(axis=0)
    dev = arr - center
    shape = (dev.T @ dev) / n
    if np.linalg.cond(shape) > MAX_CONDITION:
        raise DegenerateRegionError("draw covariance is singular")
    values = np.einsum("ij,ij->i", dev, np.linalg.solve(shape, dev.T).T)
    radius = float(np.quantile(values, level, method="linear"))
    return Ellipsoid(center=center, shape=shape, radius=radius, level=level)


def mahalanobis(region: Ellipsoid, points) -> np.ndarray:
    pts = _as_draws(points)
    dev = pts - region.center
    return np.einsum("ij,ij->i", dev, np.linalg.solve(region.shape, dev.T).T)


def contains(region: Region, point) -> bool:
    """Closed-region membership."""
    pt = np.asarray(point, dtype=float).reshape(-1)
    match region:
        case Hyperrectangle(lo=lo, hi=hi):
            if pt.size != lo.size:
                raise InvalidInputError(f"point has dimension {pt.size}, region {lo.size}")
            return bool(np.all(lo <= pt) and np.all(pt <= hi))
        case Ellipsoid(center=center, radius=radius):
            if pt.size != center.size:
                raise InvalidInputError(f"point has dimension {pt.size}, region {center.size}")
            return bool(mahalanobis(region, pt[None, :])[0] <= radius)
    raise InvalidInputError(f"unknown region type {type(region).__name__}")


def principal_axes(region: Ellipsoid) -> PrincipalAxes:
    """Eigenvectors of the shape, largest first; lengths sqrt(r * lambda)."""
    shape = 0.5 * (region.shape + region.shape.T)
    eigenvalues, vectors = np.linalg.eigh(shape)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    axes = vectors[:, order].T.copy()
    for axis in axes:
        nonzero = np.flatnonzero(np.abs(axis) > 1e-12)
        if nonzero.size and axis[nonzero[0]] < 0:
            axis *= -1.0
    return PrincipalAxes(axes, eigenvalues, np.sqrt(region.radius * eigenvalues))


def ellipse_polyline(region: Ellipsoid, n_points: int = 128) -> np.ndarray:
    """Boundary points of a 2-D ellipsoid, n_points x 2."""
    if region.center.size != 2:
        raise InvalidInputError("polylines are only defined for 2-D ellipsoids")
    axes = principal_axes(region)
    t = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    a = np.sqrt(axes.eigenvalues)
    circle = np.column_stack([np.cos(t) * a[0], np.sin(t) * a[1]])
    return region.center + np.sqrt(region.radius) * circle @ axes.vectors


def chi2_reference_radius(k: int, level: float) -> float:
    """Large-sample limit of the ellipsoid radius under normal draws."""
    return float(stats.chi2.ppf(level, df=k))
