"""Sampled Klein-Gordon fields: residual checks and the pseudo inner product."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .confmap import ConformalMetric
from .errors import ShapeError, UsageError
from .geometry import CHARTS, FLRWMetric, Grid

MIN_POINTS = 5
TRANSVERSE_VOLUME = 1.0

_MAGIC = b"CKGF"
_VERSION = 1
_HEADER = struct.Struct("<4sII QQ dddd")


@dataclass(frozen=True)
class GridField:
    """Complex scalar samples ``values[i, j]`` at ``(grid.t[i], grid.x[j])``."""

    values: np.ndarray
    grid: Grid
    chart: str = "cosmic"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if self.chart not in CHARTS:
            raise ValueError(f"chart must be one of {CHARTS}")
        if v.shape != self.grid.shape:
            raise ShapeError(f"values {v.shape} do not match grid {self.grid.shape}")
        if min(v.shape) < MIN_POINTS:
            raise ShapeError(f"grid fields need >= {MIN_POINTS} points per axis")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn, grid, chart="cosmic"):
        T, X = grid.mesh()
        return cls(fn(T, X), grid, chart)

    def __mul__(self, other):
        if isinstance(other, GridField):
            _check_same_grid(self, other)
            return GridField(self.values * other.values, self.grid, self.chart)
        return GridField(self.values * np.asarray(other), self.grid, self.chart)

    __rmul__ = __mul__

    def conj(self):
        return GridField(self.values.conj(), self.grid, self.chart)

    # binary layout ----------------------------------------------------------
    def to_bytes(self):
        g = self.grid
        header = _HEADER.pack(
            _MAGIC, _VERSION, CHARTS.index(self.chart), g.nt, g.nx, g.t0, g.dt, g.x0, g.dx
        )
        return header + self.values.astype("<c16").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data):
        magic, version, chart, nt, nx, t0, dt, x0, dx = _HEADER.unpack_from(data)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError("not a confkg grid-field payload")
        payload = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
        if payload.size != nt * nx:
            raise ShapeError("payload size does not match header dimensions")
        return cls(payload.reshape(nt, nx).astype(complex), Grid(t0, dt, nt, x0, dx, nx), CHARTS[chart])

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _check_same_grid(a, b):
    if a.grid != b.grid or a.chart != b.chart:
        raise ShapeError("fields live on different grids or charts")


def _as_metric(metric):
    if isinstance(metric, FLRWMetric):
        return ConformalMetric(metric)
    if isinstance(metric, ConformalMetric):
        return metric
    raise TypeError(f"expected FLRWMetric or ConformalMetric, got {type(metric).__name__}")


def _mass_samples(mass2, grid):
    if callable(mass2):
        T, X = grid.mesh()
        mass2 = mass2(T, X)
    return np.broadcast_to(np.asarray(mass2, dtype=float), grid.shape)


def kg_residual(field, metric, mass2):
    """Max-norm of box_g phi - m^2 phi over interior grid points.

    Derivatives are second-order central differences, so exact solutions give
    residuals of order spacing**2.
    """
    metric = _as_metric(metric)
    if metric.chart != field.chart:
        raise UsageError(f"field chart {field.chart!r} does not match metric chart {metric.chart!r}")
    grid = field.grid
    box = metric.box_sampled(grid, field.values)
    res = box - _mass_samples(mass2, grid) * field.values
    return float(np.max(np.abs(res[1:-1, 1:-1])))


_STENCILS = {
    2: (np.array([-0.5, 0.0, 0.5]), 1),
    4: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 2),
}


def _time_derivative(values, i, dt, order):
    weights, half = _STENCILS[order]
    block = values[i - half:i + half + 1]
    return np.tensordot(weights, block, axes=(0, 0)) / dt


def pseudo_inner_product(phi1, phi2, slice_index, metric, order=4):
    """Hermitian form i * int dx sqrt(h) n^T (phi1* d_T phi2 - phi2 d_T phi1*).

    For ``g = omega**2 * base`` with base lapse ``N`` and scale ``a`` the
    slice weight is (omega a)^3 / (omega N): a^3 in cosmic time, a^2 in
    conformal time, 1 on Minkowski.  The spatial integral is the periodic
    rectangle rule times a unit transverse volume.
    """
    _check_same_grid(phi1, phi2)
    metric = _as_metric(metric)
    if metric.chart != phi1.chart:
        raise UsageError("field chart does not match metric chart")
    if order not in _STENCILS:
        raise ValueError("order must be 2 or 4")
    grid = phi1.grid
    half = _STENCILS[order][1]
    if not half <= slice_index < grid.nt - half:
        raise UsageError(f"slice {slice_index} too close to the grid boundary for order {order}")
    f1 = phi1.values
    f2 = phi2.values
    d1 = _time_derivative(f1, slice_index, grid.dt, order)
    d2 = _time_derivative(f2, slice_index, grid.dt, order)
    lapse, a, _ = metric.base.lapse_scale(grid.t[slice_index:slice_index + 1])
    w = metric.omega.on_grid(grid).value[slice_index]
    weight = (w * a[0]) ** 3 / (w * lapse[0])
    a1 = f1[slice_index].conj()
    a2 = f2[slice_index]
    integrand = weight * (a1 * d2 - a2 * d1.conj())
    return complex(1j * np.sum(integrand) * grid.dx * TRANSVERSE_VOLUME)
