"""Shared fixtures: the two estimated constants reused by the acceptance runs."""

import pytest

from sfbm_extremes import constants as cst


@pytest.fixture(scope="session")
def piterbarg_abs_estimate():
    """Piterbarg constant, drift |t|, H = 1/2, N = 1 (exact value 8/3)."""
    return cst.estimate_piterbarg(
        0.5, 1, cst.drift_norm_power(1.0, 1.0),
        ladder=(2.0, 4.0, 8.0), steps=(0.25, 0.125, 0.0625),
        replications=(300_000, 300_000, 600_000), seed=1101,
    )


@pytest.fixture(scope="session")
def mhat_abs_estimate():
    """One-sided mixed constant, drift |t_1|, H = 1/2, N = 1 (exact value 2)."""
    return cst.estimate_M_hat(
        0.5, 1, cst.drift_first_coord(1.0, 1.0),
        ladder=(2.0, 4.0, 8.0), steps=(0.25, 0.125, 0.0625),
        replications=(300_000, 300_000, 600_000), seed=1102,
    )
