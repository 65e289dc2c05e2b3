"""Branch superpositions and the quantum conformal frame change.

Every branch lives in the conformal-time chart of one conformal class with
Minkowski as representative.  A branch carries

* ``omega``  - its metric is ``omega**2 * eta``;
* ``mass``   - a :class:`MassTerm`;
* ``amplitude``.

Mass-definite states share one mass label and superpose metrics; after the
frame change every branch has the representative metric and the masses are
in superposition instead.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bogoliubov import Spectrum, extract_bogoliubov
from .confmap import compose, invert
from .errors import ConfKGError, SpectrumError, UsageError
from .geometry import ConformalFactor
from .modes import DEFAULT_TOL, STATIC_TOL, integrate_curved_mode, integrate_mode

FRAMES = ("mass", "metric")
NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MassTerm:
    """Mass term reached from a constant ``m2`` (plus ``xi R``) by ``F_m(omega)``.

    On a branch with metric ``Omega**2 * eta`` the term started out constant
    on the metric ``(Omega / omega)**2 * eta``; applying a further factor
    ``L`` to the branch multiplies ``omega`` by ``L``.
    """

    m2: float
    xi: float = 0.0
    omega: ConformalFactor = field(default_factory=ConformalFactor.identity)

    def __eq__(self, other):
        if not isinstance(other, MassTerm):
            return NotImplemented
        return self.m2 == other.m2 and self.xi == other.xi and self.omega == other.omega

    __hash__ = None

    def transformed(self, factor):
        return MassTerm(self.m2, self.xi, compose(self.omega, factor))

    def same_class(self, other):
        return self.m2 == other.m2 and self.xi == other.xi

    def representative(self, metric_omega):
        """Callable tau -> mass term on the representative (flat picture)."""
        return _RepresentativeMass(self, metric_omega)

    def on_metric(self, metric_omega):
        """Callable tau -> mass term on the branch metric ``metric_omega**2 * eta``."""
        return _MassOnMetric(self.representative(metric_omega), metric_omega)

    def to_dict(self):
        return {"m2": self.m2, "xi": self.xi, "omega": self.omega.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["m2"]), float(d.get("xi", 0.0)), ConformalFactor.from_dict(d["omega"]))


class _RepresentativeMass:
    # S = metric_omega / omega is the metric on which m2 + xi R was constant;
    # its flat-picture image is S^2 m2 + (6 xi - 1) S''/S.
    def __init__(self, mass, metric_omega):
        self.mass = mass
        self.source = compose(metric_omega, invert(mass.omega))
        if not self.source.is_closed_form:
            raise UsageError("mode evolution needs closed-form conformal factors")

    def __call__(self, tau):
        s, _, s2 = self.source.time_derivs(tau)
        return s * s * self.mass.m2 + (6.0 * self.mass.xi - 1.0) * s2 / s


class _MassOnMetric:
    # F_m(Omega)[M_rep] on eta: Omega^-2 (M_rep + Omega''/Omega)
    def __init__(self, rep, metric_omega):
        self.rep = rep
        self.metric_omega = metric_omega

    def __call__(self, tau):
        w, _, w2 = self.metric_omega.time_derivs(tau)
        return (self.rep(tau) + w2 / w) / (w * w)


@dataclass(frozen=True, eq=False)
class Branch:
    amplitude: complex
    omega: ConformalFactor
    mass: MassTerm

    @property
    def field_label(self):
        """Handle of the field solution; modes are derived on demand from it."""
        return FieldHandle(self.omega, self.mass)

    def labels_equal(self, other, atol=0.0):
        return _factor_close(self.omega, other.omega, atol) and (
            self.mass.same_class(other.mass) and _factor_close(self.mass.omega, other.mass.omega, atol)
        )


@dataclass(frozen=True, eq=False)
class FieldHandle:
    """Field labelled by ``(metric, mass)``; solves for modes when asked."""

    omega: ConformalFactor
    mass: MassTerm

    def mode(self, k, tau_range, tol=DEFAULT_TOL, static_tol=STATIC_TOL):
        if self.omega.is_identity:
            return integrate_mode(k, self.mass.representative(self.omega), *tau_range, tol,
                                  static_tol=static_tol)
        return integrate_curved_mode(k, self.omega, None, *tau_range, tol,
                                     mass_on_metric=self.mass.on_metric(self.omega),
                                     static_tol=static_tol)


def _factor_close(a, b, atol):
    if atol == 0.0 or a.is_closed_form != b.is_closed_form:
        return a == b
    if a.is_closed_form:
        return abs(a.h - b.h) <= atol and _powers_close(a, b, atol)
    return a.grid == b.grid and bool(np.allclose(a.samples, b.samples, rtol=0.0, atol=atol))


def _powers_close(a, b, atol):
    pa, pb = dict(a.factors), dict(b.factors)
    keys = set(pa) | set(pb)
    return all(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) <= atol for k in keys)


@dataclass(frozen=True, eq=False)
class BranchState:
    """Normalized, orthogonal superposition of branches in one frame."""

    branches: tuple
    frame: str = "mass"

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}")
        if not self.branches:
            raise ValueError("a state needs at least one branch")
        if abs(self.norm - 1.0) > NORM_TOL:
            raise ValueError(f"amplitudes are not normalized: sum |a|^2 = {self.norm!r}")
        bs = self.branches
        if self.frame == "mass":
            if any(b.mass != bs[0].mass for b in bs[1:]):
                raise ValueError("mass-definite branches must share one mass label")
            labels = [b.omega for b in bs]
        else:
            if any(b.omega != bs[0].omega for b in bs[1:]):
                raise ValueError("metric-definite branches must share one metric label")
            labels = [b.mass for b in bs]
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                if labels[i] == labels[j]:
                    raise ValueError(f"branches {i} and {j} carry the same label")

    @property
    def norm(self):
        return math.fsum(abs(b.amplitude) ** 2 for b in self.branches)

    @property
    def amplitudes(self):
        return np.array([b.amplitude for b in self.branches], dtype=complex)

    def __len__(self):
        return len(self.branches)

    # JSON -------------------------------------------------------------------
    def to_dict(self):
        return {
            "frame": self.frame,
            "branches": [
                {
                    "re_amp": complex(b.amplitude).real,
                    "im_amp": complex(b.amplitude).imag,
                    "omega": b.omega.to_dict(),
                    "mass": b.mass.to_dict(),
                }
                for b in self.branches
            ],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        branches = tuple(
            Branch(
                complex(b["re_amp"], b["im_amp"]),
                ConformalFactor.from_dict(b["omega"]),
                MassTerm.from_dict(b["mass"]),
            )
            for b in d["branches"]
        )
        return cls(branches, d["frame"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def frame_change_m_to_g(state, target=None):
    """Apply F(target / Omega_i) in branch i, making the metric definite."""
    if state.frame != "mass":
        raise UsageError("frame_change_m_to_g expects a mass-definite state")
    target = ConformalFactor.identity() if target is None else target
    out = []
    for b in state.branches:
        factor = compose(target, invert(b.omega))
        out.append(Branch(b.amplitude, target, b.mass.transformed(factor)))
    return BranchState(tuple(out), "metric")


def frame_change_g_to_m(state):
    """Inverse frame change: undo the factor recorded in each mass label."""
    if state.frame != "metric":
        raise UsageError("frame_change_g_to_m expects a metric-definite state")
    first = state.branches[0].mass
    if any(not b.mass.same_class(first) for b in state.branches[1:]):
        raise UsageError("branch masses do not come from one common mass term")
    out = []
    for b in state.branches:
        omega = compose(b.omega, invert(b.mass.omega))
        out.append(Branch(b.amplitude, omega, MassTerm(b.mass.m2, b.mass.xi)))
    return BranchState(tuple(out), "mass")


def _default_tau_range(state, margin=30.0):
    half = 0.0
    for b in state.branches:
        for factor in (b.omega, b.mass.omega):
            if not factor.is_closed_form or factor.h != 0.0:
                raise UsageError("pass tau_range explicitly for non-tanh branch profiles")
            for prof, _ in factor.factors:
                if prof.kind == "tanh":
                    half = max(half, margin / prof.rho)
                elif prof.kind != "constant":
                    raise UsageError("pass tau_range explicitly for non-tanh branch profiles")
    half = half or margin
    return (-half, half)


def branch_spectra(state, k_list, tol=DEFAULT_TOL, tau_range=None, static_tol=STATIC_TOL):
    """Per-branch spectra, each computed in the branch's own current picture."""
    if tau_range is None:
        tau_range = _default_tau_range(state)
    spectra = []
    for i, b in enumerate(state.branches):
        handle = b.field_label
        pairs = []
        for k in k_list:
            try:
                pairs.append(extract_bogoliubov(handle.mode(float(k), tau_range, tol, static_tol),
                                                static_tol=static_tol))
            except ConfKGError as exc:
                raise SpectrumError(k, f"branch {i}: {exc}") from exc
        spectra.append(Spectrum(tuple(pairs), {"branch": i, "frame": state.frame}))
    return spectra


def branch_expectation_nk(state, k_list, tol=DEFAULT_TOL, tau_range=None, static_tol=STATIC_TOL):
    """Superposition average sum_i |amp_i|^2 |beta_{k,i}|^2 for every k."""
    spectra = branch_spectra(state, k_list, tol, tau_range, static_tol)
    weights = [abs(b.amplitude) ** 2 for b in state.branches]
    out = []
    for j, k in enumerate(k_list):
        out.append((float(k), math.fsum(w * s.pairs[j].n for w, s in zip(weights, spectra))))
    return out
