"""Covariance structure of fractional Brownian motion on the sphere.

The field vanishes at a base point ``origin`` and has increment variance
E[B(x) - B(y)]^2 = d(x, y)^{2 beta} with geodesic distance d and Hurst index
beta in (0, 1/2].  Everything downstream (sampling, asymptotics, validation)
consumes this module's exact evaluators; the two ``*_expansion_error``
helpers quantify how fast the local first-order expansions used by the tail
formulas kick in.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from .geometry import (
    DomainError,
    SphericalCoord,
    SpherePoint,
    canonical_disc_origin,
    canonical_sphere_origin,
    disc_metric_scales,
    geodesic_distance,
    pairwise_geodesic,
    sphere_variance_maximizer_coord,
    to_cartesian,
)


def _same_point(p: SpherePoint, q: SpherePoint, tol: float = 1e-12) -> bool:
    return p.dim == q.dim and geodesic_distance(p, q) <= tol


class UndefinedCorrelationError(ValueError):
    """Correlation requested at the base point, where the field is a.s. 0."""


class DegenerateInputError(ValueError):
    """Expansion error requested exactly at the expansion point."""


@dataclass(frozen=True)
class CovarianceModel:
    """SFBM parameters: Hurst index ``beta`` and base point ``origin``."""

    beta: float
    origin: SpherePoint

    def __post_init__(self):
        if not 0.0 < self.beta <= 0.5:
            # the field only exists for beta <= 1/2
            raise DomainError(f"beta = {self.beta} outside (0, 1/2]")

    @property
    def dim(self) -> int:
        return self.origin.dim


def sphere_model(n: int, beta: float) -> CovarianceModel:
    """Model with the canonical full-sphere base point on S^n."""
    return CovarianceModel(beta=beta, origin=canonical_sphere_origin(n))


def disc_model(n: int, beta: float) -> CovarianceModel:
    """Model with the canonical geodesic-disc base point on S^n."""
    return CovarianceModel(beta=beta, origin=canonical_disc_origin(n))


def variogram(m: CovarianceModel, p: SpherePoint, q: SpherePoint) -> float:
    """Increment variance d(p, q)^{2 beta}."""
    return geodesic_distance(p, q) ** (2.0 * m.beta)


def covariance(m: CovarianceModel, p: SpherePoint, q: SpherePoint) -> float:
    """Cov(B(p), B(q)) = (d(p,o)^2b + d(q,o)^2b - d(p,q)^2b) / 2."""
    b2 = 2.0 * m.beta
    return 0.5 * (
        geodesic_distance(p, m.origin) ** b2
        + geodesic_distance(q, m.origin) ** b2
        - geodesic_distance(p, q) ** b2
    )


def std_dev(m: CovarianceModel, p: SpherePoint) -> float:
    """Standard deviation d(p, o)^beta; peaks at pi^beta at the antipode of o."""
    return geodesic_distance(p, m.origin) ** m.beta


def correlation(m: CovarianceModel, p: SpherePoint, q: SpherePoint) -> float:
    """Correlation of the field at p and q; undefined if either is the origin."""
    sp = std_dev(m, p)
    sq = std_dev(m, q)
    if sp == 0.0 or sq == 0.0:
        raise UndefinedCorrelationError("correlation undefined at the base point")
    return covariance(m, p, q) / (sp * sq)


def covariance_matrix(m: CovarianceModel, points: np.ndarray) -> np.ndarray:
    """Dense covariance matrix over rows of unit vectors (n, N+1)."""
    b2 = 2.0 * m.beta
    o = m.origin.as_array()[None, :]
    d_o = pairwise_geodesic(points, o)[:, 0] ** b2
    d_pq = pairwise_geodesic(points) ** b2
    return 0.5 * (d_o[:, None] + d_o[None, :] - d_pq)


def sphere_expansion_error(
    m: CovarianceModel, theta: SphericalCoord, phi: SphericalCoord
) -> tuple:
    """Relative errors of the first-order expansions around the variance peak.

    With t0 = (pi/2, ..., pi/2, pi), the standard deviation satisfies
    sd(theta) = pi^b - b pi^{b-1} ||theta - t0|| (1 + o(1)) and
    1 - corr(theta, phi) = ||phi - theta||^{2b} / (2 pi^{2b}) (1 + o(1)).
    Returns the two relative errors (sd term, correlation term); both vanish
    as the arguments approach t0.

    Requires the canonical full-sphere base point, for which t0 is the
    interior variance maximizer.
    """
    n = m.dim
    if not _same_point(m.origin, canonical_sphere_origin(n)):
        raise DomainError("expansion is stated for the canonical sphere base point")
    b = m.beta
    t0 = sphere_variance_maximizer_coord(n).as_array()
    th = theta.as_array()
    ph = phi.as_array()
    if th.size != n or ph.size != n:
        raise DomainError("coordinate dimension mismatch")

    r_th = float(np.linalg.norm(th - t0))
    if r_th == 0.0:
        raise DegenerateInputError("theta equals the variance maximizer")
    p = to_cartesian(theta)
    sd_exact = std_dev(m, p)
    lin = b * pi ** (b - 1.0) * r_th
    err_sd = (sd_exact - (pi**b - lin)) / lin

    sep = float(np.linalg.norm(ph - th))
    if sep == 0.0:
        raise DegenerateInputError("theta equals phi")
    q = to_cartesian(phi)
    one_minus_r = 1.0 - correlation(m, p, q)
    lead = sep ** (2.0 * b) / (2.0 * pi ** (2.0 * b))
    err_corr = (one_minus_r - lead) / lead
    return float(err_sd), float(err_corr)


def disc_expansion_error(
    m: CovarianceModel, a: float, theta: SphericalCoord, phi: SphericalCoord
) -> tuple:
    """Relative errors of the disc expansions near the maximizing shell t1 = a.

    Variance side: sd(theta)/a^b = 1 - (b/a)|a - t1| (1 + o(1)); since
    sd(theta) = t1^b exactly, the first error is the Taylor remainder of the
    power function.  Correlation side: 1 - corr is compared against
    (quadratic form with disc_metric_scales weights)^b / (2 a^{2b}).

    Requires the canonical disc base point (1, 0, ..., 0).
    """
    n = m.dim
    if not _same_point(m.origin, canonical_disc_origin(n)):
        raise DomainError("expansion is stated for the canonical disc base point")
    if not 0.0 < a < pi:
        raise DomainError(f"disc radius {a} outside (0, pi)")
    b = m.beta
    th = theta.as_array()
    ph = phi.as_array()
    if not (0.0 <= th[0] <= a and 0.0 <= ph[0] <= a):
        raise DomainError("first coordinates must lie in [0, a]")

    gap = abs(a - th[0])
    if gap == 0.0:
        raise DegenerateInputError("theta_1 equals the disc radius")
    sd_ratio = std_dev(m, to_cartesian(theta)) / a**b
    lin = (b / a) * gap
    err_sd = (sd_ratio - (1.0 - lin)) / lin

    diff = ph - th
    sep = float(np.linalg.norm(diff))
    if sep == 0.0:
        raise DegenerateInputError("theta equals phi")
    w = disc_metric_scales(a, th[1:])
    quad = float(np.dot(w, diff * diff))
    lead = quad**b / (2.0 * a ** (2.0 * b))
    one_minus_r = 1.0 - correlation(m, to_cartesian(theta), to_cartesian(phi))
    err_corr = (one_minus_r - lead) / lead
    return float(err_sd), float(err_corr)

