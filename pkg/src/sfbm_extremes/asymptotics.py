"""Closed-form tail asymptotics for the excursion probabilities.

Every evaluator returns an :class:`AsymptoticValue` carrying the triple
(prefactor, power of u, Gaussian-tail argument scale), i.e. the right-hand
side  prefactor * u^exponent * Psi(scale * u).  Constants (Pickands-type,
Piterbarg-type, one-sided mixed) always enter as explicit inputs, either
plain numbers or ConstantEstimate objects; nothing is defaulted silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi, sqrt

import numpy as np
from scipy import integrate
from scipy.special import erfc, erfcx

from .geometry import DomainError, disc_metric_scales, sphere_area


class ConfigurationError(ValueError):
    """Constant kind / regime mismatch or inconsistent parameters."""


_ERFCX_SWITCH = 26.0  # beyond this, 0.5*erfc underflows before e^{-u^2/2} does


def psi_tail(u):
    """Standard normal upper-tail probability Psi(u).

    Uses erfc for moderate arguments and the scaled complement erfcx deep in
    the tail so precision survives down to the subnormal range.
    """
    u = np.asarray(u, dtype=float)
    small = u < _ERFCX_SWITCH
    out = np.empty_like(u)
    out[small] = 0.5 * erfc(u[small] / sqrt(2.0))
    if not small.all():
        ub = u[~small]
        out[~small] = 0.5 * erfcx(ub / sqrt(2.0)) * np.exp(-0.5 * ub * ub)
    return out if out.ndim else float(out)


def log_psi_tail(u):
    """log Psi(u), finite far beyond where Psi underflows (u >= 0)."""
    u = np.asarray(u, dtype=float)
    out = np.log(0.5 * erfcx(u / sqrt(2.0))) - 0.5 * u * u
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AsymptoticValue:
    """Right-hand side prefactor * u^u_exponent * Psi(tail_argument_scale * u)."""

    prefactor: float
    u_exponent: float
    tail_argument_scale: float

    def __post_init__(self):
        if not self.prefactor > 0.0:
            raise ConfigurationError(f"prefactor {self.prefactor} must be > 0")
        if not self.tail_argument_scale > 0.0:
            raise ConfigurationError("tail argument scale must be > 0")

    def value_at(self, u):
        u = np.asarray(u, dtype=float)
        v = self.prefactor * u**self.u_exponent * psi_tail(self.tail_argument_scale * u)
        return v if v.ndim else float(v)

    def log_value_at(self, u):
        u = np.asarray(u, dtype=float)
        v = (
            np.log(self.prefactor)
            + self.u_exponent * np.log(u)
            + log_psi_tail(self.tail_argument_scale * u)
        )
        return v if v.ndim else float(v)

    def rescaled(self, c: float) -> "AsymptoticValue":
        """The same law evaluated at level c*u instead of u."""
        return AsymptoticValue(
            prefactor=self.prefactor * c**self.u_exponent,
            u_exponent=self.u_exponent,
            tail_argument_scale=self.tail_argument_scale * c,
        )


def _constant_value(constant, expect_kinds=None, what=""):
    """Unwrap a number or ConstantEstimate, checking the kind when known."""
    kind = getattr(constant, "kind", None)
    value = getattr(constant, "value", constant)
    if kind is not None and expect_kinds is not None and kind not in expect_kinds:
        raise ConfigurationError(
            f"{what} needs a constant of kind {expect_kinds}, got '{kind}'"
        )
    value = float(value)
    if not value > 0.0:
        raise ConfigurationError(f"{what} constant must be positive, got {value}")
    return value


def sphere_asymptotic(n: int, beta: float, constant) -> AsymptoticValue:
    """Tail law of the supremum over the full sphere S^n.

    For beta < 1/2 the `constant` is the n-dimensional Pickands constant for
    exponent 2*beta; at beta = 1/2 it is the Piterbarg constant with drift
    ||t|| and the law degenerates to constant * Psi(u / sqrt(pi)).
    """
    if n < 1:
        raise DomainError(f"N = {n} must be >= 1")
    if not 0.0 < beta <= 0.5:
        raise DomainError(f"beta = {beta} outside (0, 1/2]")
    scale = pi ** (-beta)
    if beta == 0.5:
        c = _constant_value(constant, ("piterbarg",), "sphere boundary regime")
        return AsymptoticValue(prefactor=c, u_exponent=0.0, tail_argument_scale=scale)
    c = _constant_value(constant, ("pickands",), "sphere interior regime")
    import math

    pref = (
        c
        * math.factorial(n)
        * pi ** ((2.0 * beta - 0.5) * n)
        / (2.0 ** (n / (2.0 * beta)) * beta**n * gamma(n / 2.0 + 1.0))
    )
    expo = (1.0 - 2.0 * beta) * n / beta
    return AsymptoticValue(prefactor=pref, u_exponent=expo, tail_argument_scale=scale)


def disc_asymptotic(n: int, beta: float, a: float, constant) -> AsymptoticValue:
    """Tail law of the supremum over a geodesic disc of radius ``a``.

    For beta < 1/2 the constant is Pickands (exponent 2*beta, dimension n);
    at beta = 1/2 it is the one-sided mixed constant with drift |t_1|.
    For n = 1 the disc is the two-sided arc and the formulas reduce to the
    arc display (see ``arc_asymptotic_n1``).
    """
    if n < 1:
        raise DomainError(f"N = {n} must be >= 1")
    if not 0.0 < a < pi:
        raise DomainError(f"disc radius {a} outside (0, pi)")
    if not 0.0 < beta <= 0.5:
        raise DomainError(f"beta = {beta} outside (0, 1/2]")
    common = n * pi ** (n / 2.0) * np.sin(a) ** (n - 1) / gamma(n / 2.0 + 1.0)
    if beta == 0.5:
        c = _constant_value(constant, ("M_hat",), "disc boundary regime")
        pref = c * common / (2.0 ** (n - 1) * a ** (2.0 * (n - 1)))
        return AsymptoticValue(
            prefactor=pref, u_exponent=2.0 * (n - 1), tail_argument_scale=a ** (-0.5)
        )
    c = _constant_value(constant, ("pickands",), "disc interior regime")
    pref = c * common / (
        2.0 ** (n / (2.0 * beta)) * a ** (2.0 * n - 2.0 * beta - 1.0) * beta
    )
    return AsymptoticValue(
        prefactor=pref, u_exponent=n / beta - 2.0, tail_argument_scale=a ** (-beta)
    )


def arc_asymptotic_n1(beta: float, a: float, constant) -> AsymptoticValue:
    """The N=1 arc display, written independently of ``disc_asymptotic``.

    beta < 1/2:  H * a^{2 beta - 1} / (2^{1/(2 beta) - 1} beta) u^{1/beta - 2}
                 * Psi(a^{-beta} u)
    beta = 1/2:  2 * Mhat * Psi(a^{-1/2} u)
    """
    if not 0.0 < a < pi:
        raise DomainError(f"arc radius {a} outside (0, pi)")
    if beta == 0.5:
        c = _constant_value(constant, ("M_hat",), "arc boundary regime")
        return AsymptoticValue(2.0 * c, 0.0, a ** (-0.5))
    c = _constant_value(constant, ("pickands",), "arc interior regime")
    pref = c * a ** (2.0 * beta - 1.0) / (2.0 ** (1.0 / (2.0 * beta) - 1.0) * beta)
    return AsymptoticValue(pref, 1.0 / beta - 2.0, a ** (-beta))


def _norm_decay_integral(m: np.ndarray, eta: float, method: str) -> float:
    """Integral of exp(-||M t||^eta) over R^N."""
    n = m.shape[0]
    radial = sphere_area(n) * gamma(n / eta) / eta
    if method == "radial":
        return radial / abs(np.linalg.det(m))
    # adaptive cubature on the substituted-compact form, dimension by dimension
    def integrand(*ts):
        t = np.asarray(ts)
        # map (-1,1)^N -> R^N via t/(1-t^2)
        x = t / (1.0 - t * t)
        jac = np.prod((1.0 + t * t) / (1.0 - t * t) ** 2)
        return np.exp(-np.linalg.norm(m @ x) ** eta) * jac

    import warnings

    with warnings.catch_warnings():
        # the compactifying substitution trips quadpack's roundoff heuristic
        # long after the requested accuracy is reached
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.nquad(
            integrand,
            [(-1.0, 1.0)] * n,
            opts={"epsabs": 1e-12, "epsrel": 1e-10, "limit": 200},
        )
    return val


def piterbarg_point_asymptotic(
    n: int,
    eta: float,
    alpha: float,
    a_matrix,
    c_matrix,
    constant=None,
    boundary: str = "interior",
) -> AsymptoticValue:
    """Tail law at a unique variance maximizer with local scales A and C.

    Variance behaves like 1 - ||A(t - t0)||^eta and correlation like
    1 - ||C(t - s)||^alpha near the maximizer t0.  Three regimes:

    * alpha < eta: Pickands constant times the integral of exp(-||AC^{-1}t||^eta),
      u^{2N/alpha - 2N/eta} Psi(u); a boundary maximizer halves the prefactor.
    * alpha = eta: Piterbarg constant with drift ||AC^{-1} t||^alpha, Psi(u);
      a boundary maximizer swaps in the one-sided mixed constant instead.
    * alpha > eta: Psi(u) exactly.
    """
    if n < 1:
        raise DomainError(f"N = {n} must be >= 1")
    if not 0.0 < alpha <= 2.0 or eta <= 0.0:
        raise DomainError("need alpha in (0, 2] and eta > 0")
    if boundary not in ("interior", "boundary"):
        raise ConfigurationError(f"unknown boundary flag {boundary!r}")
    if alpha > eta:
        return AsymptoticValue(1.0, 0.0, 1.0)
    a_m = np.atleast_2d(np.asarray(a_matrix, dtype=float))
    c_m = np.atleast_2d(np.asarray(c_matrix, dtype=float))
    if a_m.shape != (n, n) or c_m.shape != (n, n):
        raise DomainError("A and C must be N x N")
    if abs(np.linalg.det(a_m)) < 1e-300 or abs(np.linalg.det(c_m)) < 1e-300:
        raise DomainError("A and C must be nondegenerate")
    m = a_m @ np.linalg.inv(c_m)
    if alpha == eta:
        kind = "M_hat" if boundary == "boundary" else "piterbarg"
        c = _constant_value(constant, (kind,), f"alpha = eta regime ({boundary})")
        return AsymptoticValue(c, 0.0, 1.0)
    scalar = np.allclose(m, m[0, 0] * np.eye(n), rtol=1e-12, atol=1e-14)
    integral = _norm_decay_integral(m, eta, "radial" if scalar else "cubature")
    c = _constant_value(constant, ("pickands",), "alpha < eta regime")
    pref = c * integral
    if boundary == "boundary":
        pref *= 0.5
    return AsymptoticValue(pref, 2.0 * n / alpha - 2.0 * n / eta, 1.0)


@dataclass(frozen=True)
class EuclideanSpec:
    """Rectangle field whose variance peaks on the face/slice t_1 = t1_star.

    ``h`` and each entry of ``c_tail`` may be plain numbers or callables of
    the tail coordinates t_hat = (t_2, ..., t_N); ``c1`` is the first-axis
    correlation weight.  ``bounds`` is the list of N (lo, hi) pairs and
    ``interior`` says whether t1_star sits strictly inside (lo_1, hi_1).
    """

    n: int
    gamma_power: float
    beta: float
    h: object
    c1: float
    c_tail: tuple
    bounds: tuple
    interior: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("N must be >= 1")
        if not self.gamma_power > 0.0:
            raise DomainError("gamma must be > 0")
        if not 0.0 < self.beta < 1.0:
            raise DomainError("beta must lie in (0, 1)")
        if not self.c1 > 0.0:
            raise DomainError("c1 must be > 0")
        if len(self.c_tail) != self.n - 1 or len(self.bounds) != self.n:
            raise DomainError("need N-1 tail weights and N bounds")


def _as_fn(v):
    return v if callable(v) else (lambda *_args, _v=float(v): _v)


def _tail_integral(spec: EuclideanSpec, weight_fn) -> float:
    """Integral over the t_hat rectangle of weight(t_hat) * prod sqrt(c_i)."""
    fns = [_as_fn(c) for c in spec.c_tail]

    def integrand(*th):
        w = weight_fn(*th)
        for f in fns:
            w *= sqrt(f(*th))
        return w

    if spec.n == 1:
        return integrand()
    val, _ = integrate.nquad(
        integrand,
        [tuple(b) for b in spec.bounds[1:]],
        opts={"epsabs": 1e-13, "epsrel": 1e-11, "limit": 200},
    )
    return val


def euclidean_extension_asymptotic(spec: EuclideanSpec, constant) -> AsymptoticValue:
    """Tail law for a variance maximum attained on a whole rectangle face.

    Regimes split on beta versus gamma/2:

    * beta < gamma/2: sqrt(c1) Gamma(1/gamma + 1) H * integral of
      h^{-1/gamma} prod sqrt(c_i) over the face, u^{N/beta - 2/gamma} Psi(u);
      an interior slice doubles the Pickands constant.
    * beta = gamma/2: integral of Mhat^{g} prod sqrt(c_i), u^{(N-1)/beta} Psi(u)
      with drift g(t) = c1^{-beta} h(t_hat) |t_1|^gamma; an interior slice
      uses the two-sided mixed constant.  ``constant`` is the number (h
      constant) or a table [(h_value, constant_value), ...] interpolated in
      h(t_hat).
    * beta > gamma/2: H^{N-1} times the face integral, u^{(N-1)/beta} Psi(u),
      with the 0-dimensional constant equal to 1 by convention at N = 1.
    """
    g2 = spec.gamma_power / 2.0
    h_fn = _as_fn(spec.h)
    if spec.beta < g2:
        c = _constant_value(constant, ("pickands",), "face regime beta < gamma/2")
        if spec.interior:
            c *= 2.0
        j = _tail_integral(spec, lambda *th: h_fn(*th) ** (-1.0 / spec.gamma_power))
        pref = sqrt(spec.c1) * gamma(1.0 / spec.gamma_power + 1.0) * c * j
        return AsymptoticValue(
            pref, spec.n / spec.beta - 2.0 / spec.gamma_power, 1.0
        )
    if spec.beta == g2:
        kinds = ("M",) if spec.interior else ("M_hat",)
        if isinstance(constant, (list, tuple)) and constant and isinstance(
            constant[0], (list, tuple)
        ):
            hs = np.asarray([row[0] for row in constant], dtype=float)
            vs = np.asarray(
                [_constant_value(row[1], kinds, "mixed-constant table") for row in constant]
            )
            order = np.argsort(hs)
            hs, vs = hs[order], vs[order]
            const_of_h = lambda hv: float(np.interp(hv, hs, vs))
        else:
            cv = _constant_value(constant, kinds, "boundary regime beta = gamma/2")
            const_of_h = lambda _hv: cv
        j = _tail_integral(spec, lambda *th: const_of_h(h_fn(*th)))
        return AsymptoticValue(j, (spec.n - 1.0) / spec.beta, 1.0)
    # beta > gamma/2: the face alone drives the tail
    if spec.n == 1:
        c = 1.0 if constant is None else _constant_value(constant, None, "degenerate")
    else:
        c = _constant_value(constant, ("pickands",), "face regime beta > gamma/2")
    j = _tail_integral(spec, lambda *th: 1.0)
    return AsymptoticValue(c * j, (spec.n - 1.0) / spec.beta, 1.0)


def disc_euclidean_spec(n: int, beta: float, a: float) -> EuclideanSpec:
    """The rectangle spec produced by the disc expansion lemma.

    Feeding this to ``euclidean_extension_asymptotic`` and rescaling by
    a^{-beta} must reproduce ``disc_asymptotic`` exactly; the acceptance
    suite checks the identity to 1e-10.
    """
    if not 0.0 < a < pi:
        raise DomainError(f"disc radius {a} outside (0, pi)")
    scale = (2.0 * a ** (2.0 * beta)) ** (-1.0 / beta)
    c_tail = []
    for j in range(2, n + 1):
        if j == 2:
            c_tail.append(scale * np.sin(a) ** 2)
        else:
            idx = tuple(range(j - 2))  # tail angles t_2 .. t_{j-1}

            def cj(*th, _idx=idx, _s=scale * np.sin(a) ** 2):
                v = _s
                for i in _idx:
                    v *= np.sin(th[i]) ** 2
                return v

            c_tail.append(cj)
    bounds = [(0.0, a)] + [(0.0, pi)] * max(n - 2, 0) + ([(0.0, 2.0 * pi)] if n >= 2 else [])
    return EuclideanSpec(
        n=n,
        gamma_power=1.0,
        beta=beta,
        h=beta / a,
        c1=scale,
        c_tail=tuple(c_tail),
        bounds=tuple(bounds),
        interior=False,
    )


def disc_via_extension_theorem(n: int, beta: float, a: float, constant) -> AsymptoticValue:
    """Disc tail law assembled from the rectangle extension theorem.

    The coordinate rectangle [0, a] x angles covers the cap once for n >= 2;
    for n = 1 the disc is the two-sided arc, i.e. two copies of [0, a] each
    with a boundary maximizer, so the rectangle law is doubled.  Rescaling by
    a^{-beta} converts from the normalized level to u.  Must agree with
    ``disc_asymptotic`` to 1e-10.
    """
    spec = disc_euclidean_spec(n, beta, a)
    base = euclidean_extension_asymptotic(spec, constant)
    if n == 1:
        base = AsymptoticValue(2.0 * base.prefactor, base.u_exponent, base.tail_argument_scale)
    return base.rescaled(a ** (-beta))


def sphere_prefactor_via_point_lemma(n: int, beta: float, constant) -> AsymptoticValue:
    """Sphere case (i) assembled through the point-maximizer lemma.

    Used as a pipeline consistency check against ``sphere_asymptotic``: apply
    the lemma with A = beta/pi I, C = 2^{-1/(2 beta)}/pi I at level u/pi^beta.
    """
    a_m = (beta / pi) * np.eye(n)
    c_m = (2.0 ** (-1.0 / (2.0 * beta)) / pi) * np.eye(n)
    base = piterbarg_point_asymptotic(n, 1.0, 2.0 * beta, a_m, c_m, constant)
    return base.rescaled(pi ** (-beta))
