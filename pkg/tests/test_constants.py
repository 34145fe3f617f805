"""Estimator tests against independent oracles.

Closed forms used as oracles (classical facts about Brownian motion with
drift; derivations inline):

* The running supremum of sqrt(2) W(t) - mu t over [0, infinity) is
  exponential with rate mu (reflection), so E exp(sup) = mu / (mu - 1).
  With the unit-rate drift |t| added to the field's own -|t|, mu = 2 and the
  one-sided constant is exactly 2.
* Two-sided: the max of two independent Exp(2) suprema M+, M- has
  E exp(max) = 1 + int e^x (2 e^{-2x} - e^{-4x} * 2?) dx; working it out,
  E exp(max(M+, M-)) = 2 (1+b)^2 / (b (1+2b)) at drift coefficient b, = 8/3
  at b = 1.
* Drift-free smooth case H = 1: the field is chi(t) = sqrt(2) <t, G> - |t|^2
  with G standard normal, whose box value is exactly 1 + S / sqrt(pi) in one
  dimension, so the volume-normalized limit is 1 / sqrt(pi).
* H = 1/2 drift-free: the box value E exp(sup_{[0,S]} (sqrt2 W - t)) has the
  closed-form first-passage law; quadrature of it gives the continuum rung
  values used to check the step extrapolation.
"""

import numpy as np
import pytest
from math import pi, sqrt

from scipy import integrate
from scipy.special import erfc

from sfbm_extremes import constants as cst
from sfbm_extremes.asymptotics import ConfigurationError


def _psi(u):
    return 0.5 * erfc(u / sqrt(2.0))


def brownian_box_value(s):
    """E exp(sup_{[0,S]} (sqrt2 W(t) - t)) via the running-max law."""
    f = lambda x: np.exp(x) * _psi((x + s) / sqrt(2 * s)) + _psi((x - s) / sqrt(2 * s))
    v, _ = integrate.quad(f, 0.0, 60.0 + 3.0 * s, limit=400)
    return 1.0 + v


class TestExpectedSupExp:
    def test_singleton_region_is_one(self):
        v, se = cst.expected_sup_exp(0.5, [(0.0, 0.0)], None, 0.5, 200, seed=1)
        assert v == 1.0 and se == 0.0

    def test_region_monotonicity_within_noise(self):
        small, se1 = cst.expected_sup_exp(0.5, [(0.0, 2.0)], None, 0.125, 40_000, seed=2)
        large, se2 = cst.expected_sup_exp(0.5, [(0.0, 4.0)], None, 0.125, 40_000, seed=3)
        assert large > small - 3.0 * np.hypot(se1, se2)

    def test_continuum_rung_oracle(self):
        # step-extrapolated rung vs quadrature of the exact law, S = 4
        mean, cov, _ = cst._box_sup_exp(
            0.5, [(0.0, 4.0)], None, (0.25, 0.125, 0.0625), 250_000, seed=4
        )
        v, se = cst._richardson_log(mean, cov, (0.25, 0.125, 0.0625), 0.5)
        want = brownian_box_value(4.0)
        assert abs(v - want) / want < 0.05

    def test_smooth_field_box_value(self):
        # H = 1: exact box value 1 + S / sqrt(pi)
        v, se = cst.expected_sup_exp(1.0, [(0.0, 3.0)], None, 0.0625, 150_000, seed=5)
        want = 1.0 + 3.0 / sqrt(pi)
        assert abs(v - want) < max(4.0 * se, 0.02 * want)

    def test_grid_cap_respected(self, monkeypatch):
        from sfbm_extremes import engine

        monkeypatch.setenv(engine.GRID_CAP_ENV, "50")
        with pytest.raises(engine.ResourceError):
            cst.expected_sup_exp(0.5, [(0.0, 8.0)], None, 0.0625, 100, seed=6)


class TestPickands:
    def test_brownian_case_within_ten_percent(self):
        est = cst.estimate_pickands(
            0.5, 1, ladder=(2, 4, 8), steps=(0.25, 0.125, 0.0625),
            replications=(150_000, 300_000, 900_000), seed=42,
        )
        assert abs(est.value - 1.0) < 0.10
        assert est.value > 0.0 and est.kind == "pickands"
        assert [r.S for r in est.ladder] == sorted(r.S for r in est.ladder)

    def test_smooth_case_within_ten_percent(self):
        est = cst.estimate_pickands(
            1.0, 1, ladder=(0.75, 1.0, 1.25, 1.5), steps=(0.25, 0.125, 0.0625),
            replications=(200_000, 300_000, 500_000, 1_000_000), seed=43,
        )
        want = 1.0 / sqrt(pi)
        assert abs(est.value - want) < 0.10 * want

    @pytest.mark.slow
    def test_smooth_case_n2(self):
        est = cst.estimate_pickands(
            1.0, 2, ladder=(0.5, 0.75, 1.0, 1.25, 1.5), steps=(0.25, 0.125),
            replications=(100_000, 200_000, 300_000, 500_000, 1_000_000), seed=44,
        )
        want = 1.0 / pi
        assert abs(est.value - want) < 0.15 * want

    def test_refinement_monotonicity_exact(self):
        # nested grids share paths, so a finer step never lowers a rung
        est = cst.estimate_pickands(
            0.5, 1, ladder=(2, 4), steps=(0.25, 0.125, 0.0625),
            replications=20_000, seed=45,
        )
        for s in (2.0, 4.0):
            raws = [r.raw_value for r in est.ladder if r.S == s]
            assert raws == sorted(raws)

    def test_json_serialization_round_trip(self):
        est = cst.estimate_pickands(
            0.5, 1, ladder=(2, 4), steps=(0.25, 0.125), replications=5_000, seed=46
        )
        back = cst.estimate_from_json_dict(__import__("json").loads(est.to_json()))
        assert back.value == est.value and back.kind == est.kind
        assert len(back.ladder) == len(est.ladder)

    def test_se_scaling_with_replications(self):
        r1 = cst.estimate_pickands(
            0.5, 1, ladder=(2,), steps=(0.25, 0.125), replications=40_000, seed=47
        )
        r2 = cst.estimate_pickands(
            0.5, 1, ladder=(2,), steps=(0.25, 0.125), replications=80_000, seed=47
        )
        ratio = r2.ladder[-1].standard_error / r1.ladder[-1].standard_error
        assert abs(ratio - 1.0 / sqrt(2.0)) < 0.20 / sqrt(2.0)


class TestPiterbarg:
    def test_two_sided_abs_drift_oracle(self, piterbarg_abs_estimate):
        est = piterbarg_abs_estimate
        assert abs(est.value - 8.0 / 3.0) < 0.10 * 8.0 / 3.0
        assert est.kind == "piterbarg"

    def test_closed_form_family_in_b(self):
        # E exp(max) = 2 (1+b)^2 / (b (1+2b)) for drift b|t| at H = 1/2
        for b, reps in ((2.0, 120_000),):
            est = cst.estimate_piterbarg(
                0.5, 1, cst.drift_norm_power(b, 1.0),
                ladder=(2, 4), steps=(0.25, 0.125, 0.0625),
                replications=reps, seed=48,
            )
            want = 2.0 * (1 + b) ** 2 / (b * (1 + 2 * b))
            assert abs(est.value - want) < 0.08 * want

    def test_steep_drift_approaches_one(self):
        vals = []
        for b in (1.0, 5.0, 50.0):
            est = cst.estimate_piterbarg(
                0.5, 1, cst.drift_norm_power(b, 1.0),
                ladder=(1, 2), steps=(0.25, 0.125), replications=50_000, seed=49,
            )
            vals.append(est.value)
        assert vals[0] > vals[1] > vals[2] >= 1.0
        assert vals[2] < 1.05

    def test_non_coercive_drift_rejected(self):
        with pytest.raises(ConfigurationError):
            cst.estimate_piterbarg(
                0.5, 2, cst.drift_first_coord(1.0, 1.0), replications=100
            )


class TestMixedConstants:
    def test_one_sided_abs_drift_oracle(self, mhat_abs_estimate):
        est = mhat_abs_estimate
        assert abs(est.value - 2.0) < 0.10 * 2.0
        assert est.kind == "M_hat"

    def test_one_sided_closed_form_family(self):
        # one-sided: E exp(sup) = (1 + b) / b
        b = 3.0
        est = cst.estimate_M_hat(
            0.5, 1, cst.drift_first_coord(b, 1.0),
            ladder=(2, 4), steps=(0.25, 0.125, 0.0625), replications=120_000, seed=50,
        )
        want = (1 + b) / b
        assert abs(est.value - want) < 0.08 * want

    def test_finiteness_bound_holds(self, mhat_abs_estimate):
        d = mhat_abs_estimate.diagnostics
        assert "finiteness_bounds" in d
        per_s = d["per_S_extrapolated"]
        for (s, v, e), bound in zip(per_s, d["finiteness_bounds"]):
            assert v <= bound + 3.0 * e

    def test_rungs_stabilize(self, mhat_abs_estimate):
        per_s = mhat_abs_estimate.diagnostics["per_S_extrapolated"]
        (s0, v0, e0), (s1, v1, e1) = per_s[-2], per_s[-1]
        assert abs(v1 - v0) < 3.0 * np.hypot(e0, e1)

    def test_zero_drift_matches_pickands_per_unit_s(self):
        est0 = cst.estimate_M_hat(
            0.5, 1, cst.drift_first_coord(0.0, 1.0),
            ladder=(2, 4), steps=(0.25, 0.125), replications=120_000, seed=51,
        )
        pick = cst.estimate_pickands(
            0.5, 1, ladder=(2, 4), steps=(0.25, 0.125), replications=120_000, seed=52
        )
        m_per = {s: (v / s, e / s) for s, v, e in est0.diagnostics["per_S_extrapolated"]}
        for s, v, e in pick.diagnostics["per_S_extrapolated"]:
            mv, me = m_per[s]
            assert abs(mv - v) < 3.0 * np.hypot(me, e)

    def test_two_sided_exceeds_one_sided(self):
        m2 = cst.estimate_M(
            0.5, 1, cst.drift_first_coord(1.0, 1.0),
            ladder=(2, 4), steps=(0.25, 0.125), replications=60_000, seed=53,
        )
        m1 = cst.estimate_M_hat(
            0.5, 1, cst.drift_first_coord(1.0, 1.0),
            ladder=(2, 4), steps=(0.25, 0.125), replications=60_000, seed=53,
        )
        assert m2.value > m1.value
        assert m2.kind == "M"

    def test_drift_must_be_first_coordinate(self):
        with pytest.raises(ConfigurationError):
            cst.estimate_M_hat(
                0.5, 2, cst.drift_norm_power(1.0, 1.0), replications=100
            )


class TestDriftSpec:
    def test_forms_evaluate(self):
        pts = np.array([[1.0, 2.0], [0.0, 0.0], [-1.0, 1.0]])
        g = cst.drift_norm_power(2.0, 1.0)
        np.testing.assert_allclose(g(pts), 2.0 * np.linalg.norm(pts, axis=1))
        g = cst.drift_first_coord(3.0, 2.0)
        np.testing.assert_allclose(g(pts), 3.0 * pts[:, 0] ** 2)
        g = cst.drift_disc_form(c1=4.0, h=2.0, gamma=1.0, beta=0.5)
        np.testing.assert_allclose(g(pts), 4.0**-0.5 * 2.0 * np.abs(pts[:, 0]))
        g = cst.drift_quadratic_form(np.eye(2) * 2.0, np.eye(2), 1.0)
        np.testing.assert_allclose(g(pts), 2.0 * np.linalg.norm(pts, axis=1))

    def test_disc_form_matches_arc_drift(self):
        # the disc lemma's drift at beta=1/2 collapses to |t_1|
        a = 0.9
        c1 = (2.0 * a) ** -2
        g = cst.drift_disc_form(c1=c1, h=0.5 / a, gamma=1.0, beta=0.5)
        pts = np.array([[0.3], [1.2]])
        np.testing.assert_allclose(g(pts), np.abs(pts[:, 0]), atol=1e-14)

    def test_unknown_form_rejected(self):
        with pytest.raises(ConfigurationError):
            cst.DriftSpec("cubic", {})
