"""Classical conformal transformation of (metric, field, mass) triples.

A triple lives on a :class:`~confkg.geometry.Grid`.  Its metric is stored as
``omega**2 * base`` where ``base`` is an FLRW metric with analytic
Christoffel symbols and ``omega`` is the accumulated conformal factor, so
every triple can be mapped back to the class representative ``base``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError
from .geometry import (
    SPACETIME_DIM,
    ConformalFactor,
    FLRWMetric,
    Grid,
    _warn_if_negative,
    diff1,
    diff2,
)


@dataclass(frozen=True)
class ConformalMetric:
    """Metric ``omega**2 * base`` with ``base`` a spatially flat FLRW metric."""

    base: FLRWMetric
    omega: ConformalFactor = field(default_factory=ConformalFactor.identity)

    @property
    def chart(self):
        return self.base.chart

    def diagonal(self, grid):
        """Diagonal components ``g_mm`` and ``g^mm`` on ``grid``, shape (nt, nx, 4)."""
        lapse, a, _ = self.base.lapse_scale(grid.t)
        g = np.empty(grid.shape + (SPACETIME_DIM,))
        g[..., 0] = -(lapse**2)[:, None]
        g[..., 1:] = (a**2)[:, None, None]
        w2 = self.omega.on_grid(grid).value ** 2
        return g * w2[..., None], 1.0 / (g * w2[..., None])

    def christoffel_diag(self, grid):
        """``G[..., rho, mu] = Gamma^rho_{mu mu}`` of the full metric on ``grid``.

        The base symbols are analytic; the conformal part follows
        Gamma~^k_ij = Gamma^k_ij + d_i^k dj ln w + d_j^k di ln w - g_ij g^kl dl ln w.
        Only ``mu == nu`` is needed because every metric here is diagonal.
        """
        lapse, a, _ = self.base.lapse_scale(grid.t)
        gam_full = self.base.christoffel_grid(grid.t)
        idx = np.arange(SPACETIME_DIM)
        gam = np.broadcast_to(
            gam_full[:, None, :, idx, idx], grid.shape + (SPACETIME_DIM, SPACETIME_DIM)
        ).copy()
        if self.omega.is_identity:
            return gam
        w = self.omega.on_grid(grid)
        dlog = np.zeros(grid.shape + (SPACETIME_DIM,))
        dlog[..., 0] = w.d_t / w.value
        dlog[..., 1] = w.d_x / w.value
        g_base = np.empty(grid.shape + (SPACETIME_DIM,))
        g_base[..., 0] = -(lapse**2)[:, None]
        g_base[..., 1:] = (a**2)[:, None, None]
        for mu in range(SPACETIME_DIM):
            gam[..., mu, mu] += 2.0 * dlog[..., mu]
            # - g_mm g^{rho rho} d_rho ln w, for every rho
            gam[..., :, mu] -= g_base[..., mu, None] / g_base * dlog
        return gam

    def box(self, grid, first, second):
        """d'Alembertian g^{mn}(d_m d_n f - Gamma^r_mn d_r f) from supplied derivatives.

        ``first = (f_T, f_x)`` and ``second = (f_TT, f_xx)``; derivatives along
        the two transverse directions vanish by symmetry.
        """
        _, ginv = self.diagonal(grid)
        gam = self.christoffel_diag(grid)
        grad = (first[0], first[1])
        out = ginv[..., 0] * second[0] + ginv[..., 1] * second[1]
        for rho in range(2):
            contracted = np.einsum("...m,...m->...", ginv, gam[..., rho, :])
            out = out - contracted * grad[rho]
        return out

    def box_sampled(self, grid, values):
        """d'Alembertian of sampled ``values`` with second-order differences."""
        first = (diff1(values, grid.dt, 0), diff1(values, grid.dx, 1))
        second = (diff2(values, grid.dt, 0), diff2(values, grid.dx, 1))
        return self.box(grid, first, second)


@dataclass(frozen=True)
class SpacetimeTriple:
    """Metric, complex field samples and mass-term samples on one grid."""

    metric: ConformalMetric
    field: np.ndarray
    mass2: np.ndarray
    grid: Grid

    def __post_init__(self):
        fld = np.asarray(self.field, dtype=complex)
        m2 = np.broadcast_to(np.asarray(self.mass2, dtype=float), self.grid.shape).copy()
        if fld.shape != self.grid.shape:
            raise ShapeError(f"field shape {fld.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "field", fld)
        object.__setattr__(self, "mass2", m2)
        if isinstance(self.metric, FLRWMetric):
            object.__setattr__(self, "metric", ConformalMetric(self.metric))

    @classmethod
    def from_functions(cls, metric, grid, field_fn, mass2):
        T, X = grid.mesh()
        m2 = mass2(T, X) if callable(mass2) else mass2
        return cls(metric, field_fn(T, X), m2, grid)

    @property
    def omega(self):
        """Accumulated factor relating this triple's metric to the representative."""
        return self.metric.omega

    @property
    def has_negative_mass(self):
        return bool(np.any(self.mass2 < 0))


def apply_conformal(triple, omega):
    """Map ``(g, phi, m^2)`` to ``(omega^2 g, phi / omega, F_m(omega)[m^2])``.

    F_m(omega)[m^2] = omega^-2 [m^2 - g^{mn}(d_m d_n omega - Gamma^r_mn d_r omega) / omega]
    is evaluated on the *current* metric of the triple.
    """
    grid = triple.grid
    data = omega.on_grid(grid)
    if np.any(data.value <= 0) or not np.all(np.isfinite(data.value)):
        raise DomainError("conformal factor must be positive on the grid")
    box_omega = triple.metric.box(grid, (data.d_t, data.d_x), (data.d_tt, data.d_xx))
    mass2 = (triple.mass2 - box_omega / data.value) / data.value**2
    _warn_if_negative(mass2)
    metric = ConformalMetric(triple.metric.base, compose(triple.metric.omega, omega, grid))
    return SpacetimeTriple(metric, triple.field / data.value, mass2, grid)


def apply_conformal_flrw(h, H1, m1_2, t):
    """Exponential-family map FLRW(H1) -> FLRW(H1 + h) on the mass term.

    The result is the composite of mapping FLRW(H1) to the flat picture and
    then the flat picture to FLRW(H1 + h); it forms a representation of the
    additive group in ``h``.
    """
    H2 = H1 + h
    mass2 = np.exp(-2.0 * h * np.asarray(t, dtype=float)) * (m1_2 - 2.0 * H1 * H1) + 2.0 * H2 * H2
    return H2, (mass2 if np.ndim(mass2) else float(mass2))


def compose(omega1, omega2, grid=None):
    """Pointwise product of two conformal factors.

    Closed forms combine parameters (exponents add).  When either factor is
    sampled the other is sampled on the same grid; ``grid`` is only needed
    to check congruence.
    """
    if omega1.is_closed_form and omega2.is_closed_form:
        return ConformalFactor(h=omega1.h + omega2.h, factors=omega1.factors + omega2.factors)
    target = omega1.grid if not omega1.is_closed_form else omega2.grid
    if grid is not None and grid != target:
        raise ShapeError("conformal factor sampled on a different grid")
    if omega1.is_identity:
        return omega2.sample(target)
    if omega2.is_identity:
        return omega1.sample(target)
    s1 = omega1.sample(target).samples
    s2 = omega2.sample(target).samples
    return ConformalFactor.sampled(target, s1 * s2)


def invert(omega):
    """Pointwise reciprocal; closed forms negate every exponent."""
    if omega.is_closed_form:
        return ConformalFactor(h=-omega.h, factors=tuple((p, -w) for p, w in omega.factors))
    return ConformalFactor.sampled(omega.grid, 1.0 / omega.samples)


def to_flat_picture(H):
    """Conformal factor exp(-H t) taking de Sitter expansion to the flat picture."""
    return ConformalFactor.exponential(-H)
