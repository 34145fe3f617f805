import numpy as np
import pytest
from math import factorial, gamma, pi, sqrt

import mpmath

from sfbm_extremes import asymptotics as asy


class _Const:
    def __init__(self, value, kind):
        self.value = value
        self.kind = kind


class TestPsiTail:
    def test_against_high_precision(self):
        mpmath.mp.dps = 50
        for u in (-8.0, -3.0, 0.0, 0.5, 1.959964, 5.0, 12.0, 24.0, 30.0, 37.0):
            exact = float(mpmath.ncdf(-mpmath.mpf(u)))
            got = asy.psi_tail(u)
            assert abs(got - exact) / exact < 1e-12, u

    def test_point_values(self):
        assert asy.psi_tail(0.0) == 0.5
        assert abs(asy.psi_tail(1.959964) - 0.025) < 1e-6

    def test_mills_ratio_limit(self):
        u = 30.0
        ratio = asy.psi_tail(u) * np.exp(u * u / 2.0) * u * sqrt(2.0 * pi)
        assert abs(ratio - 1.0) < 2e-3

    def test_deep_tail_still_positive(self):
        # representable (subnormal) down past u = 38
        assert asy.psi_tail(38.0) > 0.0
        assert np.isfinite(asy.log_psi_tail(50.0))

    def test_vectorized(self):
        u = np.array([0.0, 1.0, 30.0])
        v = asy.psi_tail(u)
        assert v.shape == (3,) and np.all(np.diff(v) < 0)


class TestSphereFormula:
    def test_case_i_example(self):
        av = asy.sphere_asymptotic(1, 0.25, 1.0)
        assert abs(av.prefactor - 2.0 / sqrt(pi)) < 1e-14
        assert av.u_exponent == 2.0
        assert abs(av.tail_argument_scale - pi**-0.25) < 1e-15

    def test_case_ii_pure_tail(self):
        av = asy.sphere_asymptotic(2, 0.5, _Const(2.2, "piterbarg"))
        assert av.u_exponent == 0.0
        assert abs(av.tail_argument_scale - pi**-0.5) < 1e-15
        assert av.prefactor == 2.2

    def test_kind_mismatch_rejected(self):
        with pytest.raises(asy.ConfigurationError):
            asy.sphere_asymptotic(1, 0.5, _Const(1.0, "pickands"))
        with pytest.raises(asy.ConfigurationError):
            asy.sphere_asymptotic(1, 0.25, _Const(1.0, "piterbarg"))

    def test_eventually_decreasing(self):
        av = asy.sphere_asymptotic(2, 0.25, 1.0)
        u = np.arange(2.0, 40.0, 0.25)
        v = av.value_at(u)
        start = np.searchsorted(u, 2.0 * max(1.0, 1.0 / av.tail_argument_scale))
        assert np.all(np.diff(v[start:]) < 0)


class TestDiscFormula:
    def test_case_i_example_n2(self):
        # paper display: denominator a^{2N - 2 beta - 1} = (pi/2)^{5/2} here
        av = asy.disc_asymptotic(2, 0.25, pi / 2, 1.0)
        want = 2.0 * pi / (2.0**4 * (pi / 2) ** 2.5 * 0.25 * gamma(2.0))
        assert abs(av.prefactor - want) < 1e-14
        assert av.u_exponent == 6.0
        assert abs(av.tail_argument_scale - (pi / 2) ** -0.25) < 1e-15

    def test_case_ii_n1_doubles_constant(self):
        av = asy.disc_asymptotic(1, 0.5, 1.0, _Const(2.0, "M_hat"))
        assert abs(av.prefactor - 4.0) < 1e-14
        assert av.u_exponent == 0.0

    def test_n1_reduction_identity_random_sweep(self):
        gen = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            b = float(gen.uniform(0.05, 0.499))
            a = float(gen.uniform(0.05, pi - 0.05))
            d1 = asy.disc_asymptotic(1, b, a, 1.23)
            d2 = asy.arc_asymptotic_n1(b, a, 1.23)
            for u in (5.0, 10.0, 20.0, 40.0):
                worst = max(
                    worst, abs(float(np.expm1(d1.log_value_at(u) - d2.log_value_at(u))))
                )
        assert worst <= 1e-10


class TestPointLemma:
    def test_identity_matrices_integral(self):
        # integral of exp(-||t||) over R^N is N! pi^{N/2} / Gamma(N/2 + 1)
        for n in (1, 2, 3):
            av = asy.piterbarg_point_asymptotic(n, 1.0, 0.5, np.eye(n), np.eye(n), 1.0)
            want = float(factorial(n)) * pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)
            assert abs(av.prefactor - want) < 1e-9 * want

    def test_alpha_greater_than_eta_is_pure_tail(self):
        av = asy.piterbarg_point_asymptotic(2, 1.0, 1.5, np.eye(2), np.eye(2))
        assert (av.prefactor, av.u_exponent, av.tail_argument_scale) == (1.0, 0.0, 1.0)
        assert av.value_at(3.0) == asy.psi_tail(3.0)

    def test_sphere_pipeline_n1_integral(self):
        b = 0.25
        av = asy.piterbarg_point_asymptotic(
            1, 1.0, 2 * b, np.eye(1) * b / pi, np.eye(1) * 2 ** (-1 / (2 * b)) / pi, 1.0
        )
        assert abs(av.prefactor - 2.0) < 1e-12

    def test_boundary_halves_prefactor(self):
        a = asy.piterbarg_point_asymptotic(1, 1.0, 0.5, np.eye(1), np.eye(1), 1.0)
        b = asy.piterbarg_point_asymptotic(
            1, 1.0, 0.5, np.eye(1), np.eye(1), 1.0, boundary="boundary"
        )
        assert abs(b.prefactor - a.prefactor / 2.0) < 1e-14

    def test_alpha_equals_eta_constant_kinds(self):
        av = asy.piterbarg_point_asymptotic(
            1, 1.0, 1.0, np.eye(1), np.eye(1), _Const(2.5, "piterbarg")
        )
        assert av.prefactor == 2.5
        av = asy.piterbarg_point_asymptotic(
            1, 1.0, 1.0, np.eye(1), np.eye(1), _Const(2.0, "M_hat"), boundary="boundary"
        )
        assert av.prefactor == 2.0
        with pytest.raises(asy.ConfigurationError):
            asy.piterbarg_point_asymptotic(
                1, 1.0, 1.0, np.eye(1), np.eye(1), _Const(2.0, "piterbarg"),
                boundary="boundary",
            )

    def test_cubature_matches_substitution(self):
        m = np.array([[2.0, 0.3], [0.0, 1.5]])
        got = asy._norm_decay_integral(m, 1.0, "cubature")
        want = asy._norm_decay_integral(np.eye(2), 1.0, "radial") / np.linalg.det(m)
        assert abs(got / want - 1.0) < 1e-8

    def test_singular_matrices_rejected(self):
        with pytest.raises(asy.DomainError):
            asy.piterbarg_point_asymptotic(2, 1.0, 0.5, np.zeros((2, 2)), np.eye(2), 1.0)


class TestExtensionTheorem:
    def test_constant_integrand_reduces_to_products(self):
        # h and c_i constant: integrals are h^{-1/gamma} prod sqrt(c_i) |rect|
        spec = asy.EuclideanSpec(
            n=3, gamma_power=1.0, beta=0.3, h=2.0, c1=4.0,
            c_tail=(9.0, 16.0), bounds=((0.0, 1.0), (0.0, 2.0), (1.0, 1.5)),
        )
        av = asy.euclidean_extension_asymptotic(spec, 1.0)
        want = sqrt(4.0) * gamma(2.0) * 1.0 * (1.0 / 2.0) * 3.0 * 4.0 * (2.0 * 0.5)
        assert abs(av.prefactor - want) < 1e-10
        assert abs(av.u_exponent - (3 / 0.3 - 2.0)) < 1e-12

    def test_interior_doubles_pickands(self):
        spec = asy.EuclideanSpec(
            n=1, gamma_power=1.0, beta=0.3, h=1.0, c1=1.0, c_tail=(), bounds=((0.0, 1.0),)
        )
        edge = asy.euclidean_extension_asymptotic(spec, 1.0)
        inside = asy.euclidean_extension_asymptotic(
            asy.EuclideanSpec(
                n=1, gamma_power=1.0, beta=0.3, h=1.0, c1=1.0, c_tail=(),
                bounds=((0.0, 1.0),), interior=True,
            ),
            1.0,
        )
        assert abs(inside.prefactor - 2.0 * edge.prefactor) < 1e-14

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_reproduces_disc_case_i(self, n):
        d1 = asy.disc_asymptotic(n, 0.3, 1.1, 0.9)
        d2 = asy.disc_via_extension_theorem(n, 0.3, 1.1, 0.9)
        assert abs(d1.prefactor / d2.prefactor - 1.0) < 1e-10
        assert abs(d1.u_exponent - d2.u_exponent) < 1e-12
        assert abs(d1.tail_argument_scale - d2.tail_argument_scale) < 1e-12

    @pytest.mark.parametrize("n", [1, 2])
    def test_reproduces_disc_case_ii(self, n):
        c = _Const(1.7, "M_hat")
        d1 = asy.disc_asymptotic(n, 0.5, 0.8, c)
        d2 = asy.disc_via_extension_theorem(n, 0.5, 0.8, c)
        assert abs(d1.prefactor / d2.prefactor - 1.0) < 1e-10

    def test_case_iii_n1_is_pure_tail(self):
        spec = asy.EuclideanSpec(
            n=1, gamma_power=1.0, beta=0.8, h=1.0, c1=1.0, c_tail=(), bounds=((0.0, 1.0),)
        )
        av = asy.euclidean_extension_asymptotic(spec, None)
        assert av.prefactor == 1.0 and av.u_exponent == 0.0
        # agrees with the point lemma's alpha > eta case
        lem = asy.piterbarg_point_asymptotic(1, 1.0, 1.6, np.eye(1), np.eye(1))
        assert av.value_at(4.0) == lem.value_at(4.0)

    def test_mixed_constant_table_interpolation(self):
        # h varies over the face; constants supplied as an (h, value) table
        spec = asy.EuclideanSpec(
            n=2, gamma_power=1.0, beta=0.5,
            h=lambda t2: 1.0 + t2, c1=1.0, c_tail=(1.0,), bounds=((0.0, 1.0), (0.0, 1.0)),
        )
        table = [(1.0, 2.0), (2.0, 3.0)]  # linear in h
        av = asy.euclidean_extension_asymptotic(spec, table)
        # integral of (1 + h(t2)) over [0,1] = integral of 2 + t2 = 2.5
        assert abs(av.prefactor - 2.5) < 1e-9

    def test_regime_mismatch_rejected(self):
        spec = asy.EuclideanSpec(
            n=1, gamma_power=1.0, beta=0.5, h=1.0, c1=1.0, c_tail=(), bounds=((0.0, 1.0),)
        )
        with pytest.raises(asy.ConfigurationError):
            asy.euclidean_extension_asymptotic(spec, _Const(1.0, "pickands"))


class TestPipelineConsistency:
    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("beta", [0.1, 0.25, 0.4])
    def test_sphere_prefactor_via_lemma(self, n, beta):
        direct = asy.sphere_asymptotic(n, beta, 0.77)
        piped = asy.sphere_prefactor_via_point_lemma(n, beta, _Const(0.77, "pickands"))
        assert abs(direct.prefactor / piped.prefactor - 1.0) < 1e-10
        assert abs(direct.u_exponent - piped.u_exponent) < 1e-12
        assert abs(direct.tail_argument_scale - piped.tail_argument_scale) < 1e-15

    def test_parameter_continuity_within_regime(self):
        # log value_at moves smoothly in (beta, a) on a compact box inside a
        # regime: no jumps under fine parameter steps
        u = 6.0
        betas = np.linspace(0.2, 0.3, 201)
        logs = [asy.disc_asymptotic(2, float(b), 1.0, 1.0).log_value_at(u) for b in betas]
        assert np.abs(np.diff(logs)).max() < 0.1
        radii = np.linspace(0.8, 1.2, 201)
        logs = [asy.disc_asymptotic(2, 0.25, float(a), 1.0).log_value_at(u) for a in radii]
        assert np.abs(np.diff(logs)).max() < 0.1
