"""Per-mode Klein-Gordon evolution with asymptotic positive-frequency data.

Flat picture:    chi'' + (k^2 + M^2(tau)) chi = 0
Curved picture:  phi'' + 2 (a'/a) phi' + (k^2 + a^2 m_g^2(tau)) phi = 0,
                 reported through chi = a phi

Both are integrated as first-order complex systems with an adaptive
Dormand-Prince 8(5,3) pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import MatchingError, StiffnessError, UnstableInitialDataError

DEFAULT_TOL = 1e-10
STATIC_TOL = 1e-8
_METHOD = "DOP853"


class FlatMassProfile:
    """M^2(tau) = a^2 m^2 + (6 xi - 1) a''/a built from a scale-factor profile.

    With ``xi = 0`` this is the flat-picture mass of a minimally coupled field.
    Instances are picklable so spectra can be farmed out to worker processes.
    """

    def __init__(self, scale, m, xi=0.0):
        self.scale = scale
        self.m2 = float(m) ** 2
        self.xi = float(xi)

    def __call__(self, tau):
        a, _, a2 = self.scale.derivs(tau)
        return a * a * self.m2 + (6.0 * self.xi - 1.0) * a2 / a

    def static_range(self, margin=30.0):
        return self.scale.static_range(margin)

    def describe(self):
        return {"scale": self.scale.to_dict(), "m2": self.m2, "xi": self.xi}


def _scale_derivs(scale):
    if hasattr(scale, "derivs"):
        return scale.derivs
    if hasattr(scale, "time_derivs"):
        return scale.time_derivs
    return scale


def relative_variation(omega2, tau_a, tau_b, samples=17):
    """Relative spread of ``omega2`` over ``[tau_a, tau_b]``."""
    vals = np.array([omega2(float(t)) for t in np.linspace(tau_a, tau_b, samples)])
    ref = abs(vals[0]) if vals[0] != 0 else 1.0
    return float((vals.max() - vals.min()) / ref)


def check_static(omega2, tau, direction, static_tol=STATIC_TOL, what="profile"):
    """Raise :class:`MatchingError` unless omega^2 is flat over one local period.

    ``direction`` is +1 to look forward from ``tau`` and -1 to look back.
    """
    w2 = omega2(tau)
    if not w2 > 0:
        raise UnstableInitialDataError(f"{what}: omega^2 = {w2} <= 0 at tau = {tau}")
    period = 2.0 * math.pi / math.sqrt(w2)
    var = relative_variation(omega2, tau, tau + direction * period)
    if var >= static_tol:
        raise MatchingError(
            f"{what}: relative variation {var:.3e} of omega^2 near tau = {tau} exceeds {static_tol:.1e}"
        )
    return w2


def positive_frequency(omega, tau):
    """``(chi, chi')`` of e^{-i omega tau} / sqrt(2 omega)."""
    chi = np.exp(-1j * omega * tau) / math.sqrt(2.0 * omega)
    return chi, -1j * omega * chi


@dataclass(frozen=True, eq=False)
class ModeSolution:
    """Mode function samples at the integrator's accepted steps."""

    k: float
    tau: np.ndarray
    chi: np.ndarray
    dchi: np.ndarray
    omega_in: float
    omega_out: float
    wronskian_drift: float
    picture: str = "flat"
    omega2: object = field(default=None, repr=False)
    _states: np.ndarray = field(default=None, repr=False)
    _advance: object = field(default=None, repr=False)
    _observe: object = field(default=None, repr=False)

    def state_at(self, tau):
        """``(chi, chi')`` at ``tau``, continuing from the nearest sample if needed."""
        idx = int(np.searchsorted(self.tau, tau))
        if idx < len(self.tau) and self.tau[idx] == tau:
            return complex(self.chi[idx]), complex(self.dchi[idx])
        if not self.tau[0] <= tau <= self.tau[-1]:
            raise ValueError(f"tau = {tau} outside the integrated range")
        start = max(idx - 1, 0)
        y = self._advance(self._states[start], float(self.tau[start]), float(tau))
        return self._observe(float(tau), y)


def wronskian(sol, tau_index):
    """i (chi* chi' - chi chi'*) at one sample; equals the mode norm (chi, chi)."""
    c = sol.chi[tau_index]
    d = sol.dchi[tau_index]
    return float(-2.0 * np.imag(np.conj(c) * d))


def _solve(rhs, y0, tau_start, tau_end, tol):
    res = solve_ivp(rhs, (tau_start, tau_end), y0, method=_METHOD, rtol=tol, atol=1e-2 * tol)
    if res.status != 0:
        raise StiffnessError(f"integrator stopped at tau = {res.t[-1]}: {res.message}")
    return res


def _advance_fn(rhs, tol):
    def advance(y, t0, t1):
        if t0 == t1:
            return np.asarray(y)
        return _solve(rhs, np.asarray(y), t0, t1, tol).y[:, -1]
    return advance


def _finish(k, res, observe, omega_in, omega_out, picture, omega2, advance):
    chi, dchi = observe(res.t, res.y)
    w = -2.0 * np.imag(np.conj(chi) * dchi)
    return ModeSolution(
        k=float(k), tau=res.t, chi=chi, dchi=dchi,
        omega_in=omega_in, omega_out=omega_out,
        wronskian_drift=float(np.max(np.abs(w - w[0]))),
        picture=picture, omega2=omega2,
        _states=res.y.T.copy(), _advance=advance, _observe=observe,
    )


def integrate_mode(k, mass_profile, tau_start, tau_end, tol=DEFAULT_TOL, *,
                   initial=None, static_tol=STATIC_TOL):
    """Evolve chi'' + (k^2 + M^2) chi = 0 from the static past.

    Initial data defaults to the positive-frequency solution of the starting
    frequency; pass ``initial=(chi, chi')`` to override it.
    """
    if not tau_start < tau_end:
        raise ValueError("tau_start must precede tau_end")
    k2 = float(k) ** 2

    def omega2(tau):
        return k2 + mass_profile(tau)

    w2_in = omega2(tau_start)
    if not w2_in > 0:
        raise UnstableInitialDataError(f"omega_in^2 = {w2_in} <= 0 for k = {k}")
    check_static(omega2, tau_start, +1, static_tol, "initial region")
    w2_out = omega2(tau_end)
    if not w2_out > 0:
        raise UnstableInitialDataError(f"omega_out^2 = {w2_out} <= 0 for k = {k}")
    omega_in = math.sqrt(w2_in)
    y0 = np.array(initial if initial is not None else positive_frequency(omega_in, tau_start),
                  dtype=complex)

    def rhs(tau, y):
        return np.array([y[1], -(k2 + mass_profile(tau)) * y[0]])

    def observe(tau, y):
        return (y[0], y[1]) if np.ndim(tau) else (complex(y[0]), complex(y[1]))

    res = _solve(rhs, y0, tau_start, tau_end, tol)
    return _finish(k, res, observe, omega_in, math.sqrt(w2_out), "flat", omega2,
                   _advance_fn(rhs, tol))


def integrate_curved_mode(k, scale, m2, tau_start, tau_end, tol=DEFAULT_TOL, *,
                          xi=0.0, mass_on_metric=None, initial=None, static_tol=STATIC_TOL):
    """Evolve the field phi on a(tau)^2 * Minkowski and report chi = a phi.

    The mass term on the curved metric is ``m2 + xi R`` with R = 6 a''/a^3,
    unless ``mass_on_metric(tau)`` supplies it directly.  ``scale`` is a
    scale-factor profile, a closed-form conformal factor, or a callable
    returning ``(a, a', a'')``.
    """
    if not tau_start < tau_end:
        raise ValueError("tau_start must precede tau_end")
    derivs = _scale_derivs(scale)
    k2 = float(k) ** 2
    if mass_on_metric is None:
        def mass_on_metric(tau, _d=derivs):
            a, _, a2 = _d(tau)
            return m2 + xi * 6.0 * a2 / (a * a * a)

    def omega2(tau):
        # frequency of chi = a phi: k^2 + a^2 m_g^2 - a''/a
        a, _, a2 = derivs(tau)
        return k2 + a * a * mass_on_metric(tau) - a2 / a

    w2_in = omega2(tau_start)
    if not w2_in > 0:
        raise UnstableInitialDataError(f"omega_in^2 = {w2_in} <= 0 for k = {k}")
    check_static(omega2, tau_start, +1, static_tol, "initial region")
    w2_out = omega2(tau_end)
    if not w2_out > 0:
        raise UnstableInitialDataError(f"omega_out^2 = {w2_out} <= 0 for k = {k}")
    omega_in = math.sqrt(w2_in)
    chi0, dchi0 = initial if initial is not None else positive_frequency(omega_in, tau_start)
    a0, da0, _ = derivs(tau_start)
    phi0 = chi0 / a0
    y0 = np.array([phi0, (dchi0 - da0 * phi0) / a0], dtype=complex)

    def rhs(tau, y):
        a, da, _ = derivs(tau)
        return np.array([y[1], -2.0 * (da / a) * y[1] - (k2 + a * a * mass_on_metric(tau)) * y[0]])

    def observe(tau, y):
        a, da, _ = derivs(tau)
        chi = a * y[0]
        dchi = da * y[0] + a * y[1]
        if np.ndim(tau):
            return chi, dchi
        return complex(chi), complex(dchi)

    res = _solve(rhs, y0, tau_start, tau_end, tol)
    return _finish(k, res, observe, omega_in, math.sqrt(w2_out), "curved", omega2,
                   _advance_fn(rhs, tol))
