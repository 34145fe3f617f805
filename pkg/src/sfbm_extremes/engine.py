"""Exact joint simulation of the three Gaussian families used downstream.

Builders assemble a dense covariance, factor it (Cholesky with a relative
jitter ladder 0 -> 1e-12 -> 1e-10 -> 1e-8), and return an immutable sampler.
Draws are replication-parallel and deterministic: replication r is generated
from the counter-based stream (seed, r) regardless of chunking or worker
count, so a batch is bit-identical for a fixed seed under any schedule.

Grids stay dense and modest (default cap 5000 points); exactness of the
joint law is the point, not scale.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dpotrf

from . import rng
from .geometry import DomainError
from .model import CovarianceModel, covariance_matrix

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
DEFAULT_GRID_CAP = 5000
GRID_CAP_ENV = "SFBM_EXTREMES_GRID_CAP"

# draw() materializes replications x points doubles; keep it under ~1 GiB
DRAW_VALUE_CAP = 1 << 27


class SingularCovarianceError(np.linalg.LinAlgError):
    """Factorization failed at the maximum jitter level."""

    def __init__(self, minor_index, jitter):
        self.minor_index = minor_index
        self.jitter = jitter
        super().__init__(
            f"covariance not positive definite (leading minor {minor_index}) "
            f"even at relative jitter {jitter:g}"
        )


class ResourceError(RuntimeError):
    """A size cap would be exceeded; carries a suggestion when possible."""


def grid_point_cap() -> int:
    raw = os.environ.get(GRID_CAP_ENV, "")
    if raw.strip():
        return int(raw)
    return DEFAULT_GRID_CAP


@dataclass(frozen=True)
class GaussianSampler:
    """Mean vector + lower-triangular factor of a covariance, plus seed."""

    factor: np.ndarray
    mean: np.ndarray
    seed: int
    jitter_used: float
    grid_id: str
    reconstruction_error: float

    @property
    def npoints(self) -> int:
        return self.mean.shape[0]

    def with_seed(self, seed: int) -> "GaussianSampler":
        return GaussianSampler(
            self.factor, self.mean, int(seed), self.jitter_used, self.grid_id,
            self.reconstruction_error,
        )

    def with_mean(self, mean: np.ndarray) -> "GaussianSampler":
        mean = np.asarray(mean, dtype=float)
        if mean.shape != self.mean.shape:
            raise DomainError("mean shape mismatch")
        return GaussianSampler(
            self.factor, mean, self.seed, self.jitter_used, self.grid_id,
            self.reconstruction_error,
        )


@dataclass(frozen=True)
class SampleBatch:
    """Replications x grid-points matrix of jointly Gaussian draws."""

    values: np.ndarray
    seed_base: int
    grid_id: str


def _grid_id(points: np.ndarray, tag: str) -> str:
    h = hashlib.sha256()
    h.update(tag.encode())
    h.update(np.ascontiguousarray(points, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def _factorize(cov: np.ndarray) -> tuple:
    """Lower Cholesky factor with jitter escalation; zero matrix allowed."""
    n = cov.shape[0]
    scale = float(cov.diagonal().max(initial=0.0))
    if scale == 0.0:
        # degenerate grid (e.g. the base point alone): the field is a.s. 0
        return np.zeros_like(cov), 0.0, 0.0
    last_info = 0
    for jit in JITTER_LADDER:
        work = np.array(cov, dtype=np.float64, order="F", copy=True)
        if jit:
            work[np.diag_indices(n)] += jit * scale
        c, info = dpotrf(work, lower=1, clean=1, overwrite_a=1)
        if info == 0:
            recon = np.linalg.norm(c @ c.T - cov) / np.linalg.norm(cov)
            return np.ascontiguousarray(c), jit, float(recon)
        last_info = info
    raise SingularCovarianceError(int(last_info), JITTER_LADDER[-1])


def sampler_from_covariance(cov, mean, seed, grid_id) -> GaussianSampler:
    factor, jit, recon = _factorize(np.asarray(cov, dtype=float))
    return GaussianSampler(
        factor=factor,
        mean=np.asarray(mean, dtype=float),
        seed=int(seed),
        jitter_used=jit,
        grid_id=grid_id,
        reconstruction_error=recon,
    )


def build_sfbm_sampler(m: CovarianceModel, grid_points: np.ndarray, seed: int) -> GaussianSampler:
    """Sampler of the SFBM joint law over unit vectors (rows of grid_points)."""
    pts = np.atleast_2d(np.asarray(grid_points, dtype=float))
    if pts.shape[0] < 1:
        raise DomainError("empty grid")
    _check_cap(pts.shape[0])
    cov = covariance_matrix(m, pts)
    gid = _grid_id(pts, f"sfbm:beta={m.beta}:o={m.origin.x}")
    return sampler_from_covariance(cov, np.zeros(pts.shape[0]), seed, gid)


def build_chi_sampler(h_index: float, grid_points: np.ndarray, seed: int) -> GaussianSampler:
    """Drifted field: mean -|t|^{2H}, Cov = |t|^{2H} + |s|^{2H} - |t-s|^{2H}."""
    if not 0.0 < h_index <= 1.0:
        raise DomainError(f"H = {h_index} outside (0, 1]")
    pts = np.asarray(grid_points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    _check_cap(pts.shape[0])
    h2 = 2.0 * h_index
    nrm = np.linalg.norm(pts, axis=1) ** h2
    sep = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2) ** h2
    cov = nrm[:, None] + nrm[None, :] - sep
    gid = _grid_id(pts, f"chi:H={h_index}")
    return sampler_from_covariance(cov, -nrm, seed, gid)


def build_homogeneous_sampler(beta: float, grid_points: np.ndarray, seed: int) -> GaussianSampler:
    """Unit-variance field with correlation exp(-|s-t|^{2 beta})."""
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta = {beta} outside (0, 1]")
    pts = np.asarray(grid_points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    _check_cap(pts.shape[0])
    sep = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    cov = np.exp(-(sep ** (2.0 * beta)))
    gid = _grid_id(pts, f"homog:beta={beta}")
    return sampler_from_covariance(cov, np.zeros(pts.shape[0]), seed, gid)


def _check_cap(n: int):
    cap = grid_point_cap()
    if n > cap:
        raise ResourceError(
            f"grid has {n} points, above the cap {cap} "
            f"(override with {GRID_CAP_ENV})"
        )


def _chunk_values(sampler: GaussianSampler, rep0: int, reps: int) -> np.ndarray:
    z = rng.normals(sampler.seed, rep0, reps, sampler.npoints)
    z = z @ sampler.factor.T
    z += sampler.mean
    return z


def _auto_chunk(npts: int) -> int:
    # keep a streamed block around 128 MiB of doubles
    return max(256, (1 << 24) // max(npts, 1))


def iter_chunks(sampler: GaussianSampler, replications: int, chunk: int | None = None):
    """Yield (rep0, values) blocks covering replications 0..R-1 in order."""
    if chunk is None:
        chunk = _auto_chunk(sampler.npoints)
    done = 0
    while done < replications:
        m = min(chunk, replications - done)
        yield done, _chunk_values(sampler, done, m)
        done += m


def draw(sampler: GaussianSampler, replications: int, workers: int = 1) -> SampleBatch:
    """Materialize a full batch; bit-identical for fixed seed at any worker count."""
    if replications < 1:
        raise DomainError("need at least one replication")
    if replications * sampler.npoints > DRAW_VALUE_CAP:
        raise ResourceError(
            f"batch of {replications} x {sampler.npoints} values exceeds the "
            f"in-memory cap; stream with iter_chunks/draw_map instead"
        )
    values = np.empty((replications, sampler.npoints))

    def work(span):
        lo, hi = span
        values[lo:hi] = _chunk_values(sampler, lo, hi - lo)

    _run_spans(replications, workers, work, chunk=_auto_chunk(sampler.npoints))
    return SampleBatch(values=values, seed_base=sampler.seed, grid_id=sampler.grid_id)


def draw_map(sampler, replications, row_fn, out_width=1, workers=1, chunk=None):
    """Apply ``row_fn(values_block) -> (m, out_width)`` over streamed chunks.

    Returns the stacked (replications, out_width) array.  Deterministic under
    any worker count because each chunk is a pure function of (seed, rep0).
    """
    out = np.empty((replications, out_width))
    if chunk is None:
        chunk = _auto_chunk(sampler.npoints)

    def work(span):
        lo, hi = span
        res = np.asarray(row_fn(_chunk_values(sampler, lo, hi - lo)))
        out[lo:hi] = res.reshape(hi - lo, out_width)

    _run_spans(replications, workers, work, chunk=chunk)
    return out


def draw_maxima(sampler, replications, workers=1, chunk=None) -> np.ndarray:
    """Per-replication path maxima, streamed (never materializes the batch)."""
    return draw_map(
        sampler, replications, lambda v: v.max(axis=1), workers=workers, chunk=chunk
    )[:, 0]


def _run_spans(total, workers, work, chunk=16384):
    spans = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    if workers <= 1 or len(spans) == 1:
        for s in spans:
            work(s)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(work, spans))
