"""Backend selection for the replication RNG.

The compiled kernel (Cython + the numpy random C API) is preferred; the
pure-numpy fallback produces bit-identical output and is selected when the
extension is missing or when SFBM_EXTREMES_RNG_BACKEND=python is set.  Both
implement the same contract: replication ``r`` of master seed ``s`` draws its
standard normals from the Philox stream keyed by ``s`` starting at counter
``r << 128``, independent of chunking, ordering, or worker count.
"""

from __future__ import annotations

import os

import numpy as np

from . import _rng_fallback

try:
    from . import _rng_kernels
except ImportError:  # pragma: no cover - build-environment dependent
    _rng_kernels = None

_FORCED = os.environ.get("SFBM_EXTREMES_RNG_BACKEND", "").strip().lower()
if _FORCED == "python" or _rng_kernels is None:
    _IMPL = _rng_fallback
    _BACKEND = "python"
else:
    _IMPL = _rng_kernels
    _BACKEND = "compiled"


def active_backend() -> str:
    """Name of the backend in use: 'compiled' or 'python'."""
    return _BACKEND


def available_backends() -> dict:
    out = {"python": _rng_fallback.fill_normals}
    if _rng_kernels is not None:
        out["compiled"] = _rng_kernels.fill_normals
    return out


def normals(seed: int, rep0: int, reps: int, npts: int, out=None) -> np.ndarray:
    """Standard-normal matrix (reps, npts), row i owned by replication rep0+i."""
    if out is None:
        out = np.empty((reps, npts), dtype=np.float64)
    _IMPL.fill_normals(seed, rep0, out)
    return out
