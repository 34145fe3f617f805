"""Grid design, excursion-probability Monte Carlo, and ratio validation.

Grids are quasi-uniform with an audited mesh (max nearest-neighbor geodesic
distance) and carry the points the theory cares about: full-sphere grids
contain the variance maximizer (the antipode of the base point), disc grids
contain the maximizing shell at polar radius ``a`` and are densified within
4 resolutions of it, where the excursion event localizes.

One-dimensional designs refine by exact nesting (each level's points contain
the previous level's), which makes the grid-refinement monotonicity check
exact under common random numbers rather than statistical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from math import ceil, log2, pi, sqrt

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import binom

from . import engine
from .asymptotics import AsymptoticValue, ConfigurationError
from .geometry import (
    DomainError,
    canonical_disc_origin,
    canonical_sphere_origin,
    pairwise_geodesic,
)
from .model import CovarianceModel, covariance_matrix, std_dev

U_WINDOW_COEFF = 0.2 * sqrt(2.0)
MIN_EXPECTED_EXCEEDANCES = 100.0
Z95 = 1.959963984540054


class BoundNotApplicableError(ValueError):
    """Borell-style bound requested below the empirical expected supremum."""


# ---------------------------------------------------------------------------
# domains and grids


@dataclass(frozen=True)
class FullSphere:
    n: int
    origin: object = None  # SpherePoint; canonical base point when None

    def resolved_origin(self):
        return self.origin if self.origin is not None else canonical_sphere_origin(self.n)


@dataclass(frozen=True)
class GeodesicDisc:
    n: int
    a: float
    origin: object = None

    def __post_init__(self):
        if not 0.0 < self.a < pi:
            raise DomainError(f"disc radius {self.a} outside (0, pi)")

    def resolved_origin(self):
        return self.origin if self.origin is not None else canonical_disc_origin(self.n)


@dataclass(frozen=True)
class EuclideanRectangle:
    bounds: tuple


@dataclass(frozen=True)
class GridDesign:
    domain: object
    points: np.ndarray  # (n, N+1) unit vectors, or (n, N) for rectangles
    resolution: float
    refinement_level: int
    mesh: float
    grid_id: str

    @property
    def npoints(self) -> int:
        return self.points.shape[0]


def _audit_mesh(points: np.ndarray, spherical: bool) -> float:
    if points.shape[0] < 2:
        return 0.0
    tree = cKDTree(points)
    d, _ = tree.query(points, k=2)
    nn = d[:, 1]
    if spherical:
        # chord -> geodesic
        nn = 2.0 * np.arcsin(np.clip(nn / 2.0, 0.0, 1.0))
    return float(nn.max())


def _pow2_at_least(x: float) -> int:
    return max(1, 2 ** int(ceil(log2(max(x, 1.0)))))


def _circle_points(angles: np.ndarray) -> np.ndarray:
    return np.column_stack([np.cos(angles), np.sin(angles)])


def design_grid(domain, resolution: float, refinement_level: int = 0) -> GridDesign:
    """Quasi-uniform design meeting the mesh bound, with mandatory points.

    ``refinement_level`` halves the resolution per level; 1-D designs are
    exactly nested across levels.  Raises a resource error (with a workable
    resolution suggestion) if the projected point count exceeds the engine
    cap.
    """
    if resolution <= 0.0:
        raise DomainError("resolution must be positive")
    res = resolution / 2**refinement_level
    if isinstance(domain, FullSphere):
        pts = _full_sphere_points(domain, res)
        spherical = True
    elif isinstance(domain, GeodesicDisc):
        pts = _disc_points(domain, res)
        spherical = True
    elif isinstance(domain, EuclideanRectangle):
        pts = _rect_points(domain, res)
        spherical = False
    else:
        raise ConfigurationError(f"unknown domain {domain!r}")
    cap = engine.grid_point_cap()
    if pts.shape[0] > cap:
        factor = sqrt(pts.shape[0] / cap) if spherical else pts.shape[0] / cap
        raise engine.ResourceError(
            f"{pts.shape[0]} grid points exceed the cap {cap}; try resolution "
            f">= {res * 2 * factor:.4g}"
        )
    mesh = _audit_mesh(pts, spherical)
    if mesh > res * (1.0 + 1e-9):
        raise DomainError(f"mesh audit failed: {mesh:.4g} > resolution {res:.4g}")
    gid = engine._grid_id(pts, f"{type(domain).__name__}:{res}:{refinement_level}")
    return GridDesign(
        domain=domain,
        points=pts,
        resolution=resolution,
        refinement_level=refinement_level,
        mesh=mesh,
        grid_id=gid,
    )


def refine(design: GridDesign) -> GridDesign:
    """The next refinement level (half the mesh) of the same design."""
    return design_grid(design.domain, design.resolution, design.refinement_level + 1)


def _full_sphere_points(domain: FullSphere, res: float) -> np.ndarray:
    o = domain.resolved_origin().as_array()
    if domain.n == 1:
        k = _pow2_at_least(2.0 * pi / res)
        if k % 2:
            k *= 2
        base = np.arctan2(o[1], o[0])
        angles = base + np.arange(k) * (2.0 * pi / k)
        return _circle_points(angles)  # antipode at index k/2 exactly
    if domain.n == 2:
        pts = [_ring_latitudes_sphere(res)]
        anti = -o
        pts.append(anti[None, :])
        allp = np.vstack(pts)
        # drop near-duplicates of the forced point
        d = np.linalg.norm(allp[:-1] - anti, axis=1)
        keep = np.flatnonzero(d > 1e-9)
        return np.vstack([allp[keep], anti[None, :]])
    raise engine.ResourceError(
        "full-sphere designs are provided for N <= 2; higher dimensions "
        "exceed desk-scale grids"
    )


def _ring_latitudes_sphere(res: float) -> np.ndarray:
    m_th = int(ceil(pi / res))
    rows = []
    for i in range(m_th):
        th = pi * (i + 0.5) / m_th
        m_phi = max(1, int(ceil(2.0 * pi * np.sin(th) / res)))
        phi = 2.0 * pi * (np.arange(m_phi) + 0.5 * (i % 2)) / m_phi
        rows.append(
            np.column_stack(
                [np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi),
                 np.full(m_phi, np.cos(th))]
            )
        )
    return np.vstack(rows)


def _disc_points(domain: GeodesicDisc, res: float) -> np.ndarray:
    a = domain.a
    if domain.n == 1:
        # two-sided arc [-a, a]: the disc around the base point on the circle,
        # with both maximizing endpoints present and the ends densified
        m = _pow2_at_least(a / res)
        step = a / m
        t = np.arange(-m, m + 1) * step
        dense = [t]
        lo = a - min(4.0 * res, a)
        fine = np.arange(ceil(lo / (step / 2.0)), 2 * m + 1) * (step / 2.0)
        dense.append(fine)
        dense.append(-fine)
        tt = np.unique(np.concatenate(dense))
        tt = tt[(tt >= -a - 1e-12) & (tt <= a + 1e-12)]
        o = domain.resolved_origin().as_array()
        base = np.arctan2(o[1], o[0])
        return _circle_points(base + tt)
    if domain.n == 2:
        # polar rings out to a; half spacing near the maximizing shell, which
        # is forced to be a ring at exactly theta_1 = a
        edge = max(a - 4.0 * res, 0.0)
        coarse = np.arange(0.0, edge, res)
        fine = np.arange(edge, a, res / 2.0)
        thetas = np.unique(np.concatenate([coarse, fine, [a]]))
        rows = [np.array([[1.0, 0.0, 0.0]])]
        for th in thetas[thetas > 1e-12]:
            m_phi = max(4, int(ceil(2.0 * pi * np.sin(th) / res)))
            phi = 2.0 * pi * np.arange(m_phi) / m_phi
            rows.append(
                np.column_stack(
                    [np.full(m_phi, np.cos(th)), np.sin(th) * np.cos(phi),
                     np.sin(th) * np.sin(phi)]
                )
            )
        return np.vstack(rows)
    raise engine.ResourceError("disc designs are provided for N <= 2")


def _rect_points(domain: EuclideanRectangle, res: float) -> np.ndarray:
    axes = []
    for lo, hi in domain.bounds:
        k = max(1, int(ceil((hi - lo) / res)))
        axes.append(np.linspace(lo, hi, k + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# ---------------------------------------------------------------------------
# excursion curves


@dataclass(frozen=True)
class McEstimate:
    mean: float
    standard_error: float
    replications: int


@dataclass(frozen=True)
class ExcursionCurve:
    u_values: tuple
    probabilities: tuple  # McEstimate per u, non-increasing by construction
    grid_id: str
    seed: int
    warnings: tuple = ()

    def csv_rows(self):
        for u, p in zip(self.u_values, self.probabilities):
            yield {"u": u, "p_hat": p.mean, "se": p.standard_error,
                   "replications": p.replications}


def _check_grid_model(model: CovarianceModel, grid: GridDesign):
    dom = grid.domain
    if isinstance(dom, EuclideanRectangle):
        raise ConfigurationError("excursion estimation needs a spherical domain")
    o = dom.resolved_origin().as_array()
    if np.linalg.norm(o - model.origin.as_array()) > 1e-9:
        raise ConfigurationError("grid domain origin differs from the model origin")
    if isinstance(dom, GeodesicDisc):
        d = pairwise_geodesic(grid.points, o[None, :])[:, 0]
        if d.max() > dom.a + 1e-9:
            raise ConfigurationError("grid contains points outside the disc")


def estimate_excursion(
    model: CovarianceModel,
    grid: GridDesign,
    u_values,
    replications: int,
    seed: int,
    workers: int = 1,
) -> ExcursionCurve:
    """Empirical tail curve of the path supremum over the grid.

    One batch of sample paths serves every level: the per-replication maxima
    are computed once and thresholded, so the curve is exactly non-increasing
    and levels share all randomness.
    """
    u = np.asarray(list(u_values), dtype=float)
    if u.size == 0 or np.any(np.diff(u) <= 0):
        raise ConfigurationError("u_values must be strictly increasing")
    _check_grid_model(model, grid)
    sampler = engine.build_sfbm_sampler(model, grid.points, seed)
    maxima = engine.draw_maxima(sampler, int(replications), workers=workers)
    return _curve_from_maxima(maxima, u, grid.grid_id, seed)


def _curve_from_maxima(maxima, u, grid_id, seed) -> ExcursionCurve:
    r = maxima.shape[0]
    counts = np.array([(maxima > uu).sum() for uu in u], dtype=float)
    p = counts / r
    se = np.sqrt(p * (1.0 - p) / r)
    warnings = ()
    if counts[-1] < 10:
        warnings = (
            f"only {int(counts[-1])} exceedances at u = {u[-1]}; "
            "tail estimate is unreliable",
        )
    probs = tuple(McEstimate(float(pp), float(ss), r) for pp, ss in zip(p, se))
    return ExcursionCurve(tuple(u.tolist()), probs, grid_id, int(seed), warnings)


def nested_excursion_pair(model, fine: GridDesign, coarse: GridDesign,
                          u_values, replications, seed, workers=1):
    """Curves on a nested design pair from one batch of fine-grid paths.

    The coarse grid must be a subset of the fine grid (exact nesting); its
    maxima are taken over the matching columns of the same paths, so the
    refinement gain is measured without Monte Carlo noise.
    """
    tree = cKDTree(fine.points)
    d, idx = tree.query(coarse.points, k=1)
    if d.max() > 1e-9:
        raise ConfigurationError("coarse design is not a subset of the fine design")
    u = np.asarray(list(u_values), dtype=float)
    _check_grid_model(model, fine)
    sampler = engine.build_sfbm_sampler(model, fine.points, seed)
    cols = np.asarray(idx)

    def payoff(values):
        return np.column_stack([values.max(axis=1), values[:, cols].max(axis=1)])

    both = engine.draw_map(sampler, int(replications), payoff, out_width=2, workers=workers)
    fine_curve = _curve_from_maxima(both[:, 0], u, fine.grid_id, seed)
    coarse_curve = _curve_from_maxima(both[:, 1], u, coarse.grid_id, seed)
    return fine_curve, coarse_curve


def usable_u_window(mesh, beta, replications, formula: AsymptoticValue, u_candidates):
    """Filter levels by the two window rules.

    Keeps u with u * mesh^beta <= 0.2 sqrt(2) (the grid resolves correlation
    at the localization scale) and expected exceedances >= 100.
    """
    out = []
    for u in u_candidates:
        if u * mesh**beta > U_WINDOW_COEFF:
            continue
        if replications * min(1.0, formula.value_at(u)) < MIN_EXPECTED_EXCEEDANCES:
            continue
        out.append(float(u))
    return out


# ---------------------------------------------------------------------------
# ratio validation


@dataclass(frozen=True)
class RatioReport:
    u_values: tuple
    empirical: tuple
    standard_errors: tuple
    asymptotic: tuple
    ratios: tuple
    ci_lo: tuple
    ci_hi: tuple
    slope_vs_inv_u: float
    slope_se: float
    abs_dev_increase_pvalue: float
    discretization_diagnostic: dict = field(default_factory=dict)

    @property
    def trend_nonincreasing_at_95(self) -> bool:
        """Sign test: cannot conclude |ratio - 1| increases with u."""
        return self.abs_dev_increase_pvalue > 0.05

    def csv_rows(self):
        for i, u in enumerate(self.u_values):
            yield {
                "u": u,
                "p_hat": self.empirical[i],
                "se": self.standard_errors[i],
                "asym": self.asymptotic[i],
                "ratio": self.ratios[i],
                "ci_lo": self.ci_lo[i],
                "ci_hi": self.ci_hi[i],
            }

    def to_json_dict(self) -> dict:
        return {
            "u_values": list(self.u_values),
            "empirical": list(self.empirical),
            "standard_errors": list(self.standard_errors),
            "asymptotic": list(self.asymptotic),
            "ratios": list(self.ratios),
            "ci_lo": list(self.ci_lo),
            "ci_hi": list(self.ci_hi),
            "slope_vs_inv_u": self.slope_vs_inv_u,
            "slope_se": self.slope_se,
            "abs_dev_increase_pvalue": self.abs_dev_increase_pvalue,
            "trend_nonincreasing_at_95": self.trend_nonincreasing_at_95,
            "discretization_diagnostic": self.discretization_diagnostic,
        }


def validate_ratio(curve: ExcursionCurve, formula: AsymptoticValue,
                   discretization_diagnostic=None) -> RatioReport:
    """Empirical/asymptotic ratios with propagated CIs and trend statistics.

    The trend statistic is the standard-error-weighted LS slope of ratio
    against 1/u; approach to 1 is additionally summarized by a sign test on
    increments of |ratio - 1| (one-sided p-value for 'increasing').
    """
    u = np.asarray(curve.u_values, dtype=float)
    p = np.array([m.mean for m in curve.probabilities])
    se = np.array([m.standard_error for m in curve.probabilities])
    asym = np.asarray(formula.value_at(u), dtype=float)
    if np.any(asym <= 0.0):
        raise ConfigurationError("asymptotic value underflowed on the u grid")
    ratios = p / asym
    r_se = se / asym
    ci_lo = ratios - Z95 * r_se
    ci_hi = ratios + Z95 * r_se

    x = 1.0 / u
    w = 1.0 / np.maximum(r_se, 1e-15) ** 2
    xm = np.average(x, weights=w)
    ym = np.average(ratios, weights=w)
    sxx = float(np.sum(w * (x - xm) ** 2))
    slope = float(np.sum(w * (x - xm) * (ratios - ym)) / sxx) if sxx > 0 else 0.0
    slope_se = float(np.sqrt(1.0 / sxx)) if sxx > 0 else float("inf")

    dev = np.abs(ratios - 1.0)
    inc = int(np.sum(np.diff(dev) > 0.0))
    ntr = max(len(dev) - 1, 0)
    pval = float(binom.sf(inc - 1, ntr, 0.5)) if ntr else 1.0

    return RatioReport(
        u_values=tuple(u.tolist()),
        empirical=tuple(p.tolist()),
        standard_errors=tuple(se.tolist()),
        asymptotic=tuple(asym.tolist()),
        ratios=tuple(ratios.tolist()),
        ci_lo=tuple(ci_lo.tolist()),
        ci_hi=tuple(ci_hi.tolist()),
        slope_vs_inv_u=slope,
        slope_se=slope_se,
        abs_dev_increase_pvalue=pval,
        discretization_diagnostic=discretization_diagnostic or {},
    )


# ---------------------------------------------------------------------------
# Borell-style concentration diagnostic


@dataclass(frozen=True)
class BorellReport:
    u_values: tuple
    bounds: tuple
    empirical: tuple
    expected_sup: float
    sigma_max: float
    delta: float

    @property
    def never_falsified(self) -> bool:
        return all(e <= b for e, b in zip(self.empirical, self.bounds))


def borell_tis_diagnostic(
    model: CovarianceModel,
    subgrid_points: np.ndarray,
    delta: float,
    sigma_max: float,
    u_values,
    replications: int,
    seed: int,
    workers: int = 1,
) -> BorellReport:
    """Concentration bound exp(-(u - m)^2 / (2 (1-delta) sigma_max^2)).

    ``subgrid_points`` must have variance at most (1 - delta) sigma_max^2;
    ``m`` is the empirical mean of the subgrid path supremum.  The bound is
    evaluated at each u (all must be >= m; checked against 2m upstream) and
    compared against the empirical tail on the same paths.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    pts = np.atleast_2d(subgrid_points)
    var_cap = (1.0 - delta) * sigma_max**2
    top = max(std_dev(model, _pt(model, p)) ** 2 for p in pts)
    if top > var_cap * (1.0 + 1e-9):
        raise DomainError(
            f"subgrid variance {top:.4g} exceeds (1-delta) sigma_max^2 = {var_cap:.4g}"
        )
    sampler = engine.build_sfbm_sampler(model, pts, seed)
    maxima = engine.draw_maxima(sampler, int(replications), workers=workers)
    m_hat = float(maxima.mean())
    u = np.asarray(list(u_values), dtype=float)
    if np.any(u < m_hat):
        raise BoundNotApplicableError(
            f"bound needs u >= empirical expected supremum {m_hat:.4g}"
        )
    bounds = np.exp(-((u - m_hat) ** 2) / (2.0 * var_cap))
    emp = np.array([(maxima > uu).mean() for uu in u])
    return BorellReport(
        u_values=tuple(u.tolist()),
        bounds=tuple(bounds.tolist()),
        empirical=tuple(emp.tolist()),
        expected_sup=m_hat,
        sigma_max=float(sigma_max),
        delta=float(delta),
    )


def _pt(model, row):
    from .geometry import SpherePoint

    return SpherePoint(tuple(row))


# ---------------------------------------------------------------------------
# algebraic consistency of the two N = 1 arc formulas


def consistency_N1(beta: float, a: float, constant=1.0) -> float:
    """Max relative discrepancy of the disc theorem at N=1 vs the arc display.

    Evaluated in log space over u in {5, 10, 20, 40} so deep-tail underflow
    cannot mask a mismatch; required <= 1e-10.
    """
    from .asymptotics import arc_asymptotic_n1, disc_asymptotic

    kind = "M_hat" if beta == 0.5 else "pickands"
    c = type("_C", (), {"value": float(getattr(constant, "value", constant)), "kind": kind})()
    d1 = disc_asymptotic(1, beta, a, c)
    d2 = arc_asymptotic_n1(beta, a, c)
    worst = 0.0
    for u in (5.0, 10.0, 20.0, 40.0):
        worst = max(worst, abs(float(np.expm1(d1.log_value_at(u) - d2.log_value_at(u)))))
    return worst
