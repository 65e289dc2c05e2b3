"""Named invariance checks producing report entries.

Each check measures one defect and compares it with a tolerance; the CLI
collects them into a machine-readable report.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1

from .bogoliubov import analytic_tanh_spectrum, spectrum
from .confmap import SpacetimeTriple, apply_conformal, apply_conformal_flrw, to_flat_picture
from .geometry import ConformalFactor, FLRWMetric, Grid, ScaleFactorProfile
from .kgfield import GridField, kg_residual
from .modes import FlatMassProfile
from .qrfstate import (
    Branch,
    BranchState,
    MassTerm,
    branch_expectation_nk,
    frame_change_g_to_m,
    frame_change_m_to_g,
)

CONFORMAL_XI = 1.0 / 6.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    defect: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "defect": self.defect,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "detail": self.detail,
        }


def below(name, defect, tol, detail=""):
    defect = float(defect)
    return CheckResult(name, defect, float(tol), bool(defect < tol), detail)


def within(name, value, lo, hi, detail=""):
    """Pass when ``value`` lies in ``[lo, hi]``; the defect is the distance outside."""
    value = float(value)
    dist = max(lo - value, value - hi, 0.0)
    return CheckResult(name, dist, 0.0, bool(lo <= value <= hi), detail or f"value={value!r}")


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------

def check_unitarity(profile, m, ks, tol, *, xi=0.0, workers=1, limit=1e-8):
    sp = spectrum(profile, m, ks, tol, xi=xi, workers=workers)
    return below("unitarity", sp.max_unitarity_defect, limit), sp


def check_analytic_oracle(profile, m, ks, tol, *, workers=1, limit=1e-6, floor=1e-10):
    """Conformally coupled flat-picture spectrum against the tanh closed form."""
    num = spectrum(FlatMassProfile(profile, m, CONFORMAL_XI), m, ks, tol, workers=workers)
    ref = analytic_tanh_spectrum(profile.a_in, profile.a_out, m, profile.rho, ks)
    mask = ref.n > floor
    rel = np.abs(num.n[mask] - ref.n[mask]) / ref.n[mask] if mask.any() else np.zeros(1)
    return below("analytic_oracle", rel.max(), limit, f"{int(mask.sum())} modes above {floor:g}")


def compare_pictures(profile, m, ks, tol, *, xi=0.0, workers=1):
    curved = spectrum(profile, m, ks, tol, xi=xi, workers=workers)
    flat = spectrum(FlatMassProfile(profile, m, xi), m, ks, tol, workers=workers)
    return curved, flat


def check_pictures(profile, m, ks, tol, *, xi=0.0, workers=1, limit=1e-10):
    curved, flat = compare_pictures(profile, m, ks, tol, xi=xi, workers=workers)
    return below("picture_agreement", np.max(np.abs(curved.n - flat.n)), limit)


def check_static_profile(a, m, ks, tol, *, workers=1, limit=1e-12):
    sp = spectrum(ScaleFactorProfile.tanh(a, a, 1.0), m, ks, tol, workers=workers)
    return below("static_no_production", sp.n.max(), limit)


def check_massless(profile, ks, tol, *, workers=1, limit=1e-12):
    sp = spectrum(profile, 0.0, ks, tol, xi=CONFORMAL_XI, workers=workers)
    return below("massless_no_production", sp.n.max(), limit)


# --------------------------------------------------------------------------
# classical maps
# --------------------------------------------------------------------------

def de_sitter_mode(H, m2, k):
    """Exact de Sitter plane wave (-eta)^{3/2} H1_nu(-k eta) e^{ikx}, cosmic time."""
    nu2 = 2.25 - m2 / (H * H)
    if nu2 < 0:
        raise ValueError("this mode family needs m^2 <= 9 H^2 / 4")
    nu = math.sqrt(nu2)

    def phi(T, X):
        eta = -np.exp(-H * T) / H
        return (-eta) ** 1.5 * hankel1(nu, -k * eta) * np.exp(1j * k * X)

    return phi


def kg_convergence(H=1.0, m2=1.0, spacings=(1e-2, 5e-3, 2.5e-3), t_end=0.5):
    """Residuals of the flat-picture image of an exact de Sitter mode."""
    k = 2.0 * math.pi
    phi = de_sitter_mode(H, m2, k)
    metric = FLRWMetric.de_sitter(H)
    residuals = []
    for d in spacings:
        grid = Grid.from_ranges((0.0, t_end), int(round(t_end / d)) + 1, (0.0, 1.0),
                                int(round(1.0 / d)), periodic_x=True)
        triple = SpacetimeTriple.from_functions(metric, grid, phi, m2)
        out = apply_conformal(triple, to_flat_picture(H))
        residuals.append(kg_residual(GridField(out.field, grid), out.metric, out.mass2))
    orders = [math.log(r0 / r1) / math.log(d0 / d1)
              for r0, r1, d0, d1 in zip(residuals, residuals[1:], spacings, spacings[1:])]
    return residuals, orders


def check_kg_convergence(H=1.0, m2=1.0):
    residuals, orders = kg_convergence(H, m2)
    worst = max(orders, key=lambda p: abs(p - 2.0))
    detail = "orders=" + ",".join(repr(p) for p in orders)
    return within("kg_convergence_order", worst, 1.8, 2.2, detail)


def transform_mass(H, m2, t):
    """Numerical flat-picture mass of a de Sitter triple next to the closed form."""
    grid = Grid.from_ranges((float(t[0]), float(t[-1])), len(t), (0.0, 1.0), 5, periodic_x=True)
    triple = SpacetimeTriple(FLRWMetric.de_sitter(H), np.ones(grid.shape), m2, grid)
    out = apply_conformal(triple, to_flat_picture(H))
    closed = np.exp(2.0 * H * grid.t) * (m2 - 2.0 * H * H)
    return grid.t, out.mass2[:, 0], closed


def check_transform(H, m2, t, limit=1e-10):
    _, num, closed = transform_mass(H, m2, t)
    scale = np.maximum(1.0, np.abs(closed))
    return below("flat_picture_mass", np.max(np.abs(num - closed) / scale), limit)


def check_exponential_composition(H1=0.3, m2=1.0, h1=0.2, h2=-0.45, limit=1e-14):
    t = np.linspace(0.0, 1.0, 11)
    Ha, ma = apply_conformal_flrw(h1, H1, m2, t)
    Hb, mb = apply_conformal_flrw(h2, Ha, ma, t)
    Hc, mc = apply_conformal_flrw(h1 + h2, H1, m2, t)
    defect = max(abs(Hb - Hc), float(np.max(np.abs(mb - mc) / np.maximum(1.0, np.abs(mc)))))
    return below("exponential_composition", defect, limit)


# --------------------------------------------------------------------------
# superpositions
# --------------------------------------------------------------------------

def superposition_report(state, ks, tol, tau_range=None):
    """Frame-change round trip and observable invariance for ``state``."""
    metric_frame = frame_change_m_to_g(state)
    back = frame_change_g_to_m(metric_frame)
    before = branch_expectation_nk(state, ks, tol, tau_range)
    after = branch_expectation_nk(metric_frame, ks, tol, tau_range)
    obs = max(abs(a[1] - b[1]) for a, b in zip(before, after)) if len(ks) else 0.0
    labels_ok = all(b0.labels_equal(b1) for b0, b1 in zip(state.branches, back.branches))
    amps_ok = np.array_equal(state.amplitudes, metric_frame.amplitudes) and np.array_equal(
        state.amplitudes, back.amplitudes)
    checks = [
        below("norm_defect", abs(metric_frame.norm - state.norm), 1e-12),
        below("round_trip_labels", 0.0 if labels_ok else 1.0, 0.5),
        below("amplitudes_preserved", 0.0 if amps_ok else 1.0, 0.5),
        below("observable_invariance", obs, 1e-10),
    ]
    return checks, metric_frame, before, after


def check_linearity(profile, m, ks, tol, *, xi=0.0, limit=1e-10):
    """Equal superposition of a static and a non-static branch gives half the spectrum."""
    static = ScaleFactorProfile.tanh(profile.a_in, profile.a_in, profile.rho)
    amp = math.sqrt(0.5)
    mass = MassTerm(m * m, xi)
    state = BranchState((
        Branch(amp, ConformalFactor.from_scale(profile), mass),
        Branch(amp, ConformalFactor.from_scale(static), mass),
    ), "mass")
    avg = np.array([v for _, v in branch_expectation_nk(state, ks, tol, profile.static_range())])
    single = spectrum(profile, m, ks, tol, xi=xi).n
    return below("superposition_linearity", np.max(np.abs(avg - 0.5 * single)), limit)
