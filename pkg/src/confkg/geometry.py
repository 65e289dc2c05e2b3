"""Spatially flat FLRW geometry, scale-factor profiles and conformal factors.

Everything lives on 3+1 dimensional spacetimes whose fields depend on the
time coordinate and a single spatial coordinate ``x`` (plane-wave symmetry
in ``y`` and ``z``).  Sampled quantities therefore sit on a uniform
``(time, x)`` grid, while index contractions keep all four dimensions.

Two time charts are used:

``"cosmic"``     ds^2 = -dt^2 + a(t)^2 dx^2
``"conformal"``  ds^2 = a(tau)^2 (-dtau^2 + dx^2)
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import DomainError, ShapeError, UsageError

CHARTS = ("cosmic", "conformal")
SPACETIME_DIM = 4


class NegativeMassWarning(UserWarning):
    """An effective mass term M^2 came out negative (allowed, but flagged)."""


def _warn_if_negative(value):
    if np.any(np.asarray(value) < 0):
        warnings.warn("effective mass squared is negative", NegativeMassWarning, stacklevel=3)


# --------------------------------------------------------------------------
# grids and finite differences
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform ``(time, x)`` grid; ``values[i, j]`` sits at ``(t[i], x[j])``."""

    t0: float
    dt: float
    nt: int
    x0: float
    dx: float
    nx: int

    def __post_init__(self):
        if self.nt < 3 or self.nx < 3:
            raise ShapeError(f"grid needs at least 3 points per axis, got {self.shape}")
        if not (self.dt > 0 and self.dx > 0):
            raise ShapeError("grid spacings must be positive")

    @classmethod
    def from_ranges(cls, t_range, nt, x_range, nx, periodic_x=False):
        """Grid covering ``t_range`` with ``nt`` points (endpoints included).

        With ``periodic_x`` the right end of ``x_range`` is excluded, so that a
        field periodic on the box is sampled exactly once per period.
        """
        t_a, t_b = t_range
        x_a, x_b = x_range
        dx = (x_b - x_a) / (nx if periodic_x else nx - 1)
        return cls(float(t_a), (t_b - t_a) / (nt - 1), int(nt), float(x_a), dx, int(nx))

    @property
    def shape(self):
        return (self.nt, self.nx)

    @property
    def t(self):
        return self.t0 + self.dt * np.arange(self.nt)

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.nx)

    def mesh(self):
        return np.meshgrid(self.t, self.x, indexing="ij")


def diff1(values, spacing, axis):
    """First derivative: central interior, one-sided second order at the edges."""
    return np.gradient(values, spacing, axis=axis, edge_order=2)


def diff2(values, spacing, axis):
    """Second derivative with the same accuracy as :func:`diff1`.

    Edges use the one-sided stencil (2, -5, 4, -1) when four points are
    available and fall back to the first-order three-point stencil otherwise.
    """
    v = np.moveaxis(np.asarray(values), axis, 0)
    out = np.empty_like(v)
    out[1:-1] = v[2:] - 2.0 * v[1:-1] + v[:-2]
    if v.shape[0] >= 4:
        out[0] = 2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]
        out[-1] = 2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]
    else:
        out[0] = out[1]
        out[-1] = out[1]
    return np.moveaxis(out / spacing**2, 0, axis)


# --------------------------------------------------------------------------
# scale factors
# --------------------------------------------------------------------------

def _sech2(x):
    # 4 e^{-2|x|} / (1 + e^{-2|x|})^2 stays accurate deep in the tails
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class ScaleFactorProfile:
    """Scale factor ``a`` as a function of conformal time.

    Kinds
    -----
    constant     a = a_in = a_out
    exponential  a(t) = exp(H t) in cosmic time, i.e. a(tau) = 1 / (1 - H tau)
                 with tau(t=0) = 0
    tanh         a^2 = (a_out^2 + a_in^2)/2 + (a_out^2 - a_in^2)/2 * tanh(rho tau)
    sampled      cubic spline through uniform samples ``values`` starting at
                 ``tau0`` with spacing ``dtau``
    """

    kind: str
    a_in: float = 1.0
    a_out: float = 1.0
    rho: float = 1.0
    hubble: float = 0.0
    tau0: float = 0.0
    dtau: float = 1.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "exponential", "tanh", "sampled"):
            raise ValueError(f"unknown scale-factor kind {self.kind!r}")
        if self.kind in ("constant", "tanh") and not (self.a_in > 0 and self.a_out > 0):
            raise DomainError("asymptotic scale factors must be positive")
        if self.kind == "constant" and self.a_in != self.a_out:
            raise ValueError("constant profile needs a_in == a_out")
        if self.kind == "tanh" and not self.rho > 0:
            raise DomainError("tanh transition rate rho must be positive")
        if self.kind == "sampled":
            if len(self.values) < 4 or not self.dtau > 0:
                raise ShapeError("sampled scale factor needs >= 4 uniform samples")
            if min(self.values) <= 0:
                raise DomainError("sampled scale factor must be positive")

    # constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, value):
        return cls("constant", a_in=float(value), a_out=float(value))

    @classmethod
    def exponential(cls, hubble):
        return cls("exponential", hubble=float(hubble))

    @classmethod
    def tanh(cls, a_in, a_out, rho):
        return cls("tanh", a_in=float(a_in), a_out=float(a_out), rho=float(rho))

    @classmethod
    def sampled(cls, tau0, dtau, values):
        values = tuple(float(v) for v in values)
        return cls("sampled", a_in=values[0], a_out=values[-1],
                   tau0=float(tau0), dtau=float(dtau), values=values)

    # descriptors ------------------------------------------------------------
    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "a": self.a_in}
        if self.kind == "exponential":
            return {"kind": "exponential", "H": self.hubble}
        if self.kind == "tanh":
            return {"kind": "tanh", "a_in": self.a_in, "a_out": self.a_out, "rho": self.rho}
        return {"kind": "sampled", "tau0": self.tau0, "dtau": self.dtau, "values": list(self.values)}

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == "constant":
            return cls.constant(d["a"])
        if kind == "exponential":
            return cls.exponential(d["H"])
        if kind == "tanh":
            return cls.tanh(d["a_in"], d["a_out"], d["rho"])
        if kind == "sampled":
            return cls.sampled(d["tau0"], d["dtau"], d["values"])
        raise ValueError(f"unknown scale-factor kind {kind!r}")

    @property
    def is_asymptotically_static(self):
        return self.kind in ("constant", "tanh", "sampled")

    def static_range(self, margin=30.0):
        """Symmetric conformal-time window whose ends are static to ~e^{-2 margin}."""
        if self.kind == "tanh":
            return (-margin / self.rho, margin / self.rho)
        if self.kind == "sampled":
            return (self.tau0, self.tau0 + self.dtau * (len(self.values) - 1))
        if self.kind == "constant":
            return (-margin, margin)
        raise UsageError("exponential expansion has no static asymptotic region")

    @cached_property
    def _spline(self):
        tau = self.tau0 + self.dtau * np.arange(len(self.values))
        return CubicSpline(tau, np.array(self.values))

    # evaluation -----------------------------------------------------------
    def derivs(self, tau):
        """Return ``(a, a', a'')`` at conformal time ``tau`` (scalar or array)."""
        scalar = np.ndim(tau) == 0
        if self.kind == "constant":
            if scalar:
                return self.a_in, 0.0, 0.0
            tau = np.asarray(tau, dtype=float)
            return np.full_like(tau, self.a_in), np.zeros_like(tau), np.zeros_like(tau)
        if self.kind == "exponential":
            H = self.hubble
            u = 1.0 - H * np.asarray(tau, dtype=float)
            if np.any(u <= 0):
                raise DomainError("conformal time beyond the future boundary tau = 1/H")
            out = (1.0 / u, H / u**2, 2.0 * H * H / u**3)
            return tuple(float(v) for v in out) if scalar else out
        if self.kind == "tanh":
            if scalar:
                return _tanh_derivs_scalar(self.a_in, self.a_out, self.rho, float(tau))
            return _tanh_derivs(self.a_in, self.a_out, self.rho, np.asarray(tau, dtype=float))
        lo, hi = self.static_range()
        if np.any(np.asarray(tau) < lo - 1e-12) or np.any(np.asarray(tau) > hi + 1e-12):
            raise DomainError("conformal time outside the sampled range")
        s = self._spline
        out = (s(tau), s(tau, 1), s(tau, 2))
        if scalar:
            out = tuple(float(v) for v in out)
        if np.any(np.asarray(out[0]) <= 0):
            raise DomainError("interpolated scale factor is not positive")
        return out

    def __call__(self, tau):
        return self.derivs(tau)[0]

    def cosmic(self, t):
        """Return ``(a, da/dt, d2a/dt2)`` in cosmic time.

        Only the constant and exponential kinds have a closed-form cosmic-time
        representation; the others are defined directly in conformal time.
        """
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.a_in), np.zeros_like(t), np.zeros_like(t)
        if self.kind == "exponential":
            H = self.hubble
            a = np.exp(H * t)
            return a, H * a, H * H * a
        raise UsageError(f"{self.kind} profile is defined in conformal time only")


def _tanh_derivs(a_in, a_out, rho, tau):
    A = 0.5 * (a_out**2 + a_in**2)
    B = 0.5 * (a_out**2 - a_in**2)
    th = np.tanh(rho * tau)
    s2 = _sech2(rho * tau)
    a2 = A + B * th
    d1 = B * rho * s2
    d2 = -2.0 * B * rho * rho * s2 * th
    a = np.sqrt(a2)
    return a, d1 / (2.0 * a), d2 / (2.0 * a) - d1 * d1 / (4.0 * a**3)


def _tanh_derivs_scalar(a_in, a_out, rho, tau):
    A = 0.5 * (a_out * a_out + a_in * a_in)
    B = 0.5 * (a_out * a_out - a_in * a_in)
    x = rho * tau
    th = math.tanh(x)
    e = math.exp(-2.0 * abs(x))
    s2 = 4.0 * e / ((1.0 + e) * (1.0 + e))
    a = math.sqrt(A + B * th)
    d1 = B * rho * s2
    d2 = -2.0 * B * rho * rho * s2 * th
    return a, d1 / (2.0 * a), d2 / (2.0 * a) - d1 * d1 / (4.0 * a * a * a)


@dataclass(frozen=True)
class FLRWMetric:
    """Spatially flat FLRW metric written in one of the two time charts."""

    scale: ScaleFactorProfile
    chart: str = "cosmic"

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f"chart must be one of {CHARTS}")

    @classmethod
    def de_sitter(cls, hubble):
        return cls(ScaleFactorProfile.exponential(hubble), "cosmic")

    @classmethod
    def minkowski(cls, chart="conformal"):
        return cls(ScaleFactorProfile.constant(1.0), chart)

    @property
    def hubble(self):
        if self.scale.kind != "exponential":
            raise UsageError("a constant Hubble rate exists only for exponential expansion")
        return self.scale.hubble

    @property
    def is_flat(self):
        return self.scale.kind == "constant" and self.scale.a_in == 1.0

    def lapse_scale(self, T):
        """Lapse ``N`` and spatial scale ``a`` so that ds^2 = -N^2 dT^2 + a^2 dx^2."""
        if self.chart == "cosmic":
            a, da, _ = self.scale.cosmic(T)
            return np.ones_like(a), a, da
        a, da, _ = self.scale.derivs(np.asarray(T, dtype=float))
        return a, a, da

    def christoffel_grid(self, T):
        """Christoffel symbols ``G[..., rho, mu, nu]`` at the times ``T``."""
        T = np.asarray(T, dtype=float)
        _, a, da = self.lapse_scale(T)
        gam = np.zeros(T.shape + (SPACETIME_DIM,) * 3)
        if self.chart == "cosmic":
            spatial = a * da          # Gamma^0_ij = a adot delta_ij
            mixed = da / a            # Gamma^i_0j = (adot / a) delta^i_j
        else:
            hc = da / a
            gam[..., 0, 0, 0] = hc
            spatial = hc
            mixed = hc
        for i in range(1, SPACETIME_DIM):
            gam[..., 0, i, i] = spatial
            gam[..., i, 0, i] = mixed
            gam[..., i, i, 0] = mixed
        return gam


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def conformal_time(scale, t, t_ref=0.0):
    """Conformal time elapsed from ``t_ref`` to ``t``: integral of dt / a(t)."""
    if t == t_ref:
        return 0.0

    def integrand(s):
        a = float(scale.cosmic(s)[0])
        if not a > 0:
            raise DomainError(f"scale factor {a} is not positive at t={s}")
        return 1.0 / a

    lo, hi = sorted((t_ref, t))
    for s in (lo, 0.5 * (lo + hi), hi):
        integrand(s)
    value, _ = quad(integrand, t_ref, t, epsabs=1e-12, epsrel=1e-12, limit=200)
    return value


def christoffel(metric, point):
    """Christoffel symbols ``G[rho, mu, nu]`` of ``metric`` at ``point``.

    ``point`` is ``(time, x, y, z)`` or just the time coordinate; the metric is
    homogeneous so only the time matters.
    """
    T = point if np.ndim(point) == 0 else point[0]
    return metric.christoffel_grid(np.asarray(float(T)))


def effective_mass_flrw(m2, H, t):
    """Flat-picture mass e^{2Ht}(m^2 - 2H^2) of a field on de Sitter expansion."""
    out = np.exp(2.0 * H * np.asarray(t, dtype=float)) * (m2 - 2.0 * H * H)
    _warn_if_negative(out)
    return out if np.ndim(out) else float(out)


def effective_mass_conformal(scale, m2, tau, xi=0.0):
    """Flat-picture mass a^2 m^2 - a''/a for a field on a(tau)^2 times Minkowski.

    ``xi`` adds a curvature coupling xi R to the curved-side mass term; with
    R = 6 a''/a^3 this turns the result into a^2 m^2 + (6 xi - 1) a''/a, so
    ``xi = 1/6`` is the conformally coupled case.
    """
    a, _, a2 = scale.derivs(tau)
    out = a * a * m2 + (6.0 * xi - 1.0) * a2 / a
    _warn_if_negative(out)
    return out


# --------------------------------------------------------------------------
# conformal factors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorData:
    """Conformal factor and its partial derivatives sampled on a grid."""

    value: np.ndarray
    d_t: np.ndarray
    d_x: np.ndarray
    d_tt: np.ndarray
    d_tx: np.ndarray
    d_xx: np.ndarray


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """Positive factor Omega relating conformally equivalent metrics.

    Closed form: ``Omega(T) = exp(h T) * prod_j a_j(T)**p_j`` with ``a_j``
    scale-factor profiles evaluated at the chart time ``T``.  Sampled form:
    values on a :class:`Grid`, derivatives by second-order finite differences.
    """

    h: float = 0.0
    factors: tuple = ()
    grid: Grid | None = None
    samples: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.samples is not None:
            s = np.asarray(self.samples, dtype=float)
            if self.grid is None or s.shape != self.grid.shape:
                raise ShapeError("sampled conformal factor must match its grid")
            if not np.all(np.isfinite(s)) or np.any(s <= 0):
                raise DomainError("conformal factor must be finite and positive")
            s.setflags(write=False)
            object.__setattr__(self, "samples", s)
        merged = {}
        for prof, p in self.factors:
            merged[prof] = merged.get(prof, 0.0) + float(p)
        object.__setattr__(self, "factors", tuple((k, v) for k, v in merged.items() if v != 0.0))
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def exponential(cls, h):
        return cls(h=h)

    @classmethod
    def from_scale(cls, profile, power=1.0):
        return cls(factors=((profile, power),))

    @classmethod
    def sampled(cls, grid, values):
        return cls(grid=grid, samples=values)

    @property
    def kind(self):
        if self.samples is not None:
            return "sampled"
        if not self.factors:
            return "exponential"
        if all(p.kind == "tanh" for p, _ in self.factors):
            return "tanh"
        return "scale"

    @property
    def is_closed_form(self):
        return self.samples is None

    @property
    def is_identity(self):
        if self.samples is not None:
            return bool(np.all(self.samples == 1.0))
        return self.h == 0.0 and not self.factors

    def __eq__(self, other):
        if not isinstance(other, ConformalFactor):
            return NotImplemented
        if self.is_closed_form != other.is_closed_form:
            return False
        if self.is_closed_form:
            return self.h == other.h and dict(self.factors) == dict(other.factors)
        return self.grid == other.grid and np.array_equal(self.samples, other.samples)

    __hash__ = None

    def time_derivs(self, T):
        """``(Omega, dOmega/dT, d2Omega/dT2)`` of a closed-form factor."""
        if not self.is_closed_form:
            raise UsageError("time_derivs needs a closed-form factor; use on_grid")
        if np.ndim(T) == 0:
            T = float(T)
            l1, l2, log_val = self.h, 0.0, self.h * T
            for prof, p in self.factors:
                a, da, dda = prof.derivs(T)
                r = da / a
                l1 += p * r
                l2 += p * (dda / a - r * r)
                log_val += p * math.log(a)
            val = math.exp(log_val)
            return val, val * l1, val * (l1 * l1 + l2)
        T = np.asarray(T, dtype=float)
        l1 = np.full_like(T, self.h)
        l2 = np.zeros_like(T)
        log_val = self.h * T
        for prof, p in self.factors:
            a, da, dda = prof.derivs(T)
            r = da / a
            l1 = l1 + p * r
            l2 = l2 + p * (dda / a - r * r)
            log_val = log_val + p * np.log(a)
        val = np.exp(log_val)
        return val, val * l1, val * (l1 * l1 + l2)

    def __call__(self, T, X=None):
        if self.is_closed_form:
            val = self.time_derivs(T)[0]
            return val if X is None else val + 0.0 * np.asarray(X)
        raise UsageError("evaluate sampled factors through on_grid")

    def on_grid(self, grid):
        """Values and first/second partial derivatives on ``grid``."""
        if self.is_closed_form:
            v, d1, d2 = self.time_derivs(grid.t)
            shape = grid.shape
            col = lambda arr: np.broadcast_to(arr[:, None], shape).copy()
            zero = np.zeros(shape)
            return FactorData(col(v), col(d1), zero, col(d2), zero.copy(), zero.copy())
        if grid != self.grid:
            raise ShapeError("conformal factor sampled on a different grid")
        # Differentiate u = ln(Omega): differences are linear in u, so products
        # of sampled factors obey the composition law exactly on the grid.
        s = self.samples
        u = np.log(s)
        u_t, u_x = diff1(u, grid.dt, 0), diff1(u, grid.dx, 1)
        return FactorData(
            s.copy(), s * u_t, s * u_x,
            s * (diff2(u, grid.dt, 0) + u_t * u_t),
            s * (diff1(u_t, grid.dx, 1) + u_t * u_x),
            s * (diff2(u, grid.dx, 1) + u_x * u_x),
        )

    def sample(self, grid):
        """Sampled copy on ``grid`` (identity if already sampled there)."""
        if not self.is_closed_form:
            if grid != self.grid:
                raise ShapeError("conformal factor sampled on a different grid")
            return self
        return ConformalFactor.sampled(grid, self.on_grid(grid).value)

    # descriptors ------------------------------------------------------------
    def to_dict(self):
        if self.is_closed_form:
            return {
                "kind": self.kind,
                "h": self.h,
                "factors": [{"profile": p.to_dict(), "power": w} for p, w in self.factors],
            }
        g = self.grid
        return {
            "kind": "sampled",
            "grid": {"t0": g.t0, "dt": g.dt, "nt": g.nt, "x0": g.x0, "dx": g.dx, "nx": g.nx},
            "values": self.samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "sampled":
            return cls.sampled(Grid(**d["grid"]), np.array(d["values"], dtype=float))
        factors = tuple(
            (ScaleFactorProfile.from_dict(f["profile"]), f["power"]) for f in d.get("factors", ())
        )
        return cls(h=d.get("h", 0.0), factors=factors)
