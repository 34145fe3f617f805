"""Pure-numpy implementation of the counter-based replication RNG."""

import numpy as np


def fill_normals(seed, rep0, out):
    """Row i gets Generator(Philox(key=seed, counter=(rep0+i) << 128)).standard_normal."""
    npts = out.shape[1]
    for i in range(out.shape[0]):
        bg = np.random.Philox(key=int(seed), counter=(int(rep0) + i) << 128)
        out[i, :] = np.random.Generator(bg).standard_normal(npts)
