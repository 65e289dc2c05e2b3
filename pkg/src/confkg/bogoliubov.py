"""Bogoliubov coefficients and particle spectra.

Homogeneous, spatially flat backgrounds do not mix wavenumbers, so every
coefficient matrix is diagonal and the occupation of mode k is |beta_k|^2.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfKGError, SpectrumError
from .geometry import ScaleFactorProfile
from .modes import (
    DEFAULT_TOL,
    STATIC_TOL,
    FlatMassProfile,
    check_static,
    integrate_curved_mode,
    integrate_mode,
)

CSV_HEADER = ("k", "re_alpha", "im_alpha", "re_beta", "im_beta", "n_k", "unitarity_defect")


@dataclass(frozen=True)
class BogoliubovPair:
    k: float
    alpha: complex
    beta: complex
    unitarity_defect: float

    @property
    def n(self):
        """Mean number of out-particles in the in-vacuum, |beta|^2."""
        return abs(self.beta) ** 2


@dataclass(frozen=True)
class Spectrum:
    pairs: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ks = [p.k for p in self.pairs]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("spectrum wavenumbers must be strictly increasing")

    @property
    def entries(self):
        return [(p.k, p.n, p.unitarity_defect) for p in self.pairs]

    @property
    def k(self):
        return np.array([p.k for p in self.pairs])

    @property
    def n(self):
        return np.array([p.n for p in self.pairs])

    @property
    def max_unitarity_defect(self):
        return max((p.unitarity_defect for p in self.pairs), default=0.0)

    def __len__(self):
        return len(self.pairs)

    def to_csv(self, path=None):
        """CSV text (17 significant digits); also written to ``path`` if given."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p in self.pairs:
            row = (p.k, p.alpha.real, p.alpha.imag, p.beta.real, p.beta.imag, p.n, p.unitarity_defect)
            writer.writerow([format(float(v), ".17g") for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        pairs = tuple(
            BogoliubovPair(
                float(r["k"]),
                complex(float(r["re_alpha"]), float(r["im_alpha"])),
                complex(float(r["re_beta"]), float(r["im_beta"])),
                float(r["unitarity_defect"]),
            )
            for r in rows
        )
        return cls(pairs)


def extract_bogoliubov(sol, tau_match=None, static_tol=STATIC_TOL):
    """Project a late-time mode onto the out-region plane waves.

    Solves chi = alpha f + beta f*, chi' = -i w alpha f + i w beta f* with
    f = e^{-i w tau} / sqrt(2 w) at a single static time ``tau_match``
    (default: the end of the run).
    """
    if tau_match is None:
        tau_match = float(sol.tau[-1])
    w2 = check_static(sol.omega2, tau_match, -1, static_tol, "matching region")
    w = math.sqrt(w2)
    chi, dchi = sol.state_at(tau_match)
    f = np.exp(-1j * w * tau_match) / math.sqrt(2.0 * w)
    system = np.array([[f, np.conj(f)], [-1j * w * f, 1j * w * np.conj(f)]])
    try:
        alpha, beta = np.linalg.solve(system, np.array([chi, dchi]))
    except np.linalg.LinAlgError as exc:
        raise ConfKGError(f"singular matching system at tau = {tau_match}") from exc
    alpha, beta = complex(alpha), complex(beta)
    defect = abs(abs(alpha) ** 2 - abs(beta) ** 2 - 1.0)
    return BogoliubovPair(sol.k, alpha, beta, defect)


def _log_sinh(x):
    return x + math.log1p(-math.exp(-2.0 * x)) - math.log(2.0)


def analytic_tanh_n(a_in, a_out, m, rho, k):
    """|beta_k|^2 for a^2 = A + B tanh(rho tau) with conformal coupling."""
    w_in = math.sqrt(k * k + (a_in * m) ** 2)
    w_out = math.sqrt(k * k + (a_out * m) ** 2)
    w_minus = 0.5 * abs(w_out - w_in)
    if w_minus == 0.0:
        return 0.0
    x = math.pi / rho
    return math.exp(2.0 * _log_sinh(x * w_minus) - _log_sinh(x * w_in) - _log_sinh(x * w_out))


def analytic_tanh_spectrum(a_in, a_out, m, rho, k_list):
    """Closed-form occupations for the tanh profile.

    Reference values for a conformally coupled field, whose flat-picture mass
    is exactly m^2 a^2(tau).  Phases are not part of the closed form, so the
    returned coefficients are the real, non-negative representatives.
    """
    if not (a_in > 0 and a_out > 0 and m > 0 and rho > 0):
        raise ValueError("a_in, a_out, m and rho must all be positive")
    pairs = []
    for k in k_list:
        n = analytic_tanh_n(a_in, a_out, m, rho, float(k))
        alpha, beta = math.sqrt(1.0 + n), math.sqrt(n)
        pairs.append(BogoliubovPair(float(k), complex(alpha), complex(beta),
                                    abs(alpha * alpha - beta * beta - 1.0)))
    meta = {"source": "analytic", "a_in": a_in, "a_out": a_out, "m": m, "rho": rho}
    return Spectrum(tuple(pairs), meta)


def _one_mode(job):
    picture, profile, m, k, tau_range, tol, xi, static_tol = job
    try:
        if picture == "curved":
            sol = integrate_curved_mode(k, profile, m * m, *tau_range, tol, xi=xi,
                                        static_tol=static_tol)
        else:
            sol = integrate_mode(k, profile, *tau_range, tol, static_tol=static_tol)
        return extract_bogoliubov(sol, static_tol=static_tol)
    except ConfKGError as exc:
        raise SpectrumError(k, exc) from exc


def spectrum(profile, m, k_list, tol=DEFAULT_TOL, *, xi=0.0, tau_range=None,
             static_tol=STATIC_TOL, workers=1):
    """Particle spectrum |beta_k|^2 for each k in ``k_list``.

    ``profile`` selects the picture: a :class:`ScaleFactorProfile` integrates
    the field on the curved metric (mass ``m``, coupling ``xi``); a callable
    ``M^2(tau)`` integrates the flat picture and ignores ``m`` and ``xi``.
    """
    if isinstance(profile, ScaleFactorProfile):
        picture = "curved"
        described = {"scale": profile.to_dict(), "m": float(m), "xi": float(xi)}
    else:
        picture = "flat"
        described = profile.describe() if hasattr(profile, "describe") else {"mass_profile": repr(profile)}
    if tau_range is None:
        if not hasattr(profile, "static_range"):
            raise ValueError("tau_range is required for bare mass-profile callables")
        tau_range = profile.static_range()
    tau_range = (float(tau_range[0]), float(tau_range[1]))
    ks = [float(k) for k in k_list]
    jobs = [(picture, profile, float(m), k, tau_range, tol, float(xi), static_tol) for k in ks]
    workers = _resolve_workers(workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_one_mode, jobs))
    else:
        pairs = [_one_mode(j) for j in jobs]
    meta = {
        "picture": picture,
        **described,
        "tau_range": list(tau_range),
        "tol": tol,
        "static_tol": static_tol,
    }
    return Spectrum(tuple(pairs), meta)


def _resolve_workers(workers):
    if workers is None or workers == 0:
        return os.cpu_count() or 1
    return max(1, int(workers))


def flat_mass_profile(scale, m, xi=0.0):
    return FlatMassProfile(scale, m, xi)
