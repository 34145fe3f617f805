"""Spherical coordinates, geodesic distance, and area constants on S^N.

Coordinates follow the standard hyperspherical chart

    x_1 = cos t_1,  x_k = sin t_1 ... sin t_{k-1} cos t_k,  x_{N+1} = sin t_1 ... sin t_N,

with t_1..t_{N-1} in [0, pi] and t_N in [0, 2*pi).  All operations here are
pure; nothing caches state.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np

TWO_PI = 2.0 * pi


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class SphericalCoord:
    """Angle vector of a point on S^N (N = len(theta) >= 1)."""

    theta: tuple

    def __post_init__(self):
        th = tuple(float(t) for t in self.theta)
        if len(th) < 1:
            raise DomainError("need at least one angle")
        for i, t in enumerate(th[:-1]):
            if not 0.0 <= t <= pi:
                raise DomainError(f"theta[{i}] = {t} outside [0, pi]")
        if not 0.0 <= th[-1] < TWO_PI:
            raise DomainError(f"last angle {th[-1]} outside [0, 2*pi)")
        object.__setattr__(self, "theta", th)

    @property
    def dim(self) -> int:
        return len(self.theta)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


@dataclass(frozen=True)
class SpherePoint:
    """Unit vector in R^{N+1}; renormalized on construction."""

    x: tuple

    def __post_init__(self):
        v = np.asarray(self.x, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise DomainError("sphere point needs >= 2 coordinates")
        nrm = float(np.linalg.norm(v))
        if not np.isfinite(nrm) or abs(nrm - 1.0) > 1e-6:
            raise DomainError(f"vector norm {nrm} too far from 1")
        object.__setattr__(self, "x", tuple(v / nrm))

    @property
    def dim(self) -> int:
        # dimension N of the sphere S^N the point lives on
        return len(self.x) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    def antipode(self) -> "SpherePoint":
        return SpherePoint(tuple(-v for v in self.x))


def to_cartesian(c: SphericalCoord) -> SpherePoint:
    """Map angles to the unit vector via the hyperspherical chart."""
    th = c.as_array()
    n = th.size
    x = np.empty(n + 1)
    sin_prod = 1.0
    for k in range(n):
        x[k] = sin_prod * np.cos(th[k])
        sin_prod *= np.sin(th[k])
    x[n] = sin_prod
    return SpherePoint(tuple(x))


def to_spherical(p: SpherePoint) -> SphericalCoord:
    """Invert the chart.

    At coordinate singularities (some sin t_i = 0) the representative with
    all trailing angles set to 0 is returned, so round trips through
    to_cartesian are deterministic.
    """
    x = p.as_array()
    n = x.size - 1
    th = np.zeros(n)
    # residual squared norm of the tail (x_k, ..., x_{N+1})
    tail = np.empty(n + 1)
    acc = 0.0
    for k in range(n, -1, -1):
        acc += x[k] * x[k]
        tail[k] = acc
    for k in range(n - 1):
        r = np.sqrt(tail[k])
        if r < 1e-15:
            return SphericalCoord(tuple(th))  # trailing angles already 0
        th[k] = np.arccos(np.clip(x[k] / r, -1.0, 1.0))
    # last angle lives on the full circle
    last = np.arctan2(x[n], x[n - 1])
    if last < 0.0:
        last += TWO_PI
    if last >= TWO_PI:
        last = 0.0
    th[n - 1] = last
    return SphericalCoord(tuple(th))


def geodesic_distance(p: SpherePoint, q: SpherePoint) -> float:
    """Great-circle distance arccos<p, q>, clamped against roundoff."""
    ip = float(np.dot(p.as_array(), q.as_array()))
    return float(np.arccos(np.clip(ip, -1.0, 1.0)))


def pairwise_geodesic(xs: np.ndarray, ys: np.ndarray | None = None) -> np.ndarray:
    """Geodesic distance matrix between rows of unit-vector arrays."""
    if ys is None:
        ys = xs
    g = np.clip(xs @ ys.T, -1.0, 1.0)
    return np.arccos(g)


def sphere_area(n: int) -> float:
    """Surface measure 2 pi^{n/2} / Gamma(n/2) of the unit (n-1)-sphere in R^n.

    n=2 gives the circumference 2*pi of S^1, n=3 gives 4*pi, and n=1 gives 2
    (counting measure of the two points of S^0).
    """
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


def disc_metric_scales(a: float, theta_hat=()) -> np.ndarray:
    """Quadratic-form weights of the correlation expansion on a geodesic disc.

    Returns (1, sin^2 a, sin^2 a sin^2 t_2, ..., sin^2 a prod sin^2 t_i) for a
    disc of radius ``a``; ``theta_hat`` holds the N-1 angular coordinates, so
    the result has length N.
    """
    if not 0.0 < a < pi:
        raise DomainError(f"disc radius {a} outside (0, pi)")
    th = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    n = th.size + 1
    w = np.ones(n)
    if n >= 2:
        w[1] = np.sin(a) ** 2
        for j in range(2, n):
            w[j] = w[j - 1] * np.sin(th[j - 2]) ** 2
    return w


def canonical_sphere_origin(n: int) -> SpherePoint:
    """Base point (0, ..., 0, 1, 0) used for full-sphere runs.

    Its antipode, where the field variance peaks, has spherical coordinate
    (pi/2, ..., pi/2, pi), an interior point of the coordinate rectangle.
    """
    x = np.zeros(n + 1)
    x[n - 1] = 1.0
    return SpherePoint(tuple(x))


def canonical_disc_origin(n: int) -> SpherePoint:
    """Base point (1, 0, ..., 0) used for geodesic-disc runs."""
    x = np.zeros(n + 1)
    x[0] = 1.0
    return SpherePoint(tuple(x))


def sphere_variance_maximizer_coord(n: int) -> SphericalCoord:
    """Coordinate (pi/2, ..., pi/2, pi) of the antipode of the canonical origin."""
    return SphericalCoord(tuple([pi / 2.0] * (n - 1) + [pi]))
