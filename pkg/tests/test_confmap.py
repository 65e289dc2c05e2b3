import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confkg.confmap import (
    ConformalMetric,
    SpacetimeTriple,
    apply_conformal,
    apply_conformal_flrw,
    compose,
    invert,
    to_flat_picture,
)
from confkg.errors import DomainError, ShapeError
from confkg.geometry import ConformalFactor, FLRWMetric, Grid, NegativeMassWarning, ScaleFactorProfile

pytestmark = pytest.mark.filterwarnings("ignore::confkg.geometry.NegativeMassWarning")


def _grid(n=21, t=(0.0, 1.0)):
    return Grid.from_ranges(t, n, (0.0, 1.0), n, periodic_x=True)


def _triple(metric, grid, m2=1.0):
    T, X = grid.mesh()
    return SpacetimeTriple(metric, np.exp(1j * 2 * math.pi * X) * (1 + T), m2, grid)


def test_identity_factor_leaves_triple_unchanged():
    g = _grid()
    tr = _triple(FLRWMetric.de_sitter(0.7), g)
    out = apply_conformal(tr, ConformalFactor.identity())
    assert np.array_equal(out.field, tr.field)
    assert np.allclose(out.mass2, tr.mass2, rtol=0, atol=1e-15)
    assert out.omega.is_identity


def test_flat_picture_mass_of_de_sitter():
    # published value M^2(t) = e^{2Ht}(m^2 - 2H^2)
    H, m2 = 1.0, 1.0
    g = _grid(41)
    with pytest.warns(NegativeMassWarning):
        out = apply_conformal(_triple(FLRWMetric.de_sitter(H), g, m2), to_flat_picture(H))
    T, _ = g.mesh()
    assert np.allclose(out.mass2, np.exp(2 * H * T) * (m2 - 2 * H * H), rtol=1e-13, atol=1e-13)
    assert np.allclose(out.field, np.exp(H * T) * _triple(FLRWMetric.de_sitter(H), g).field, rtol=1e-14)


@pytest.mark.parametrize("h", [0.2, -0.35, 1.1])
def test_covariant_map_of_exponential_factor(h):
    # DERIVED: box_g e^{ht} / e^{ht} = -(h^2 + 3 H h) on de Sitter, hence
    # F_m(e^{ht})[m^2] = e^{-2ht}(m^2 + h^2 + 3 H h)
    H, m2 = 0.6, 2.0
    g = _grid(31)
    out = apply_conformal(_triple(FLRWMetric.de_sitter(H), g, m2), ConformalFactor.exponential(h))
    T, _ = g.mesh()
    assert np.allclose(out.mass2, np.exp(-2 * h * T) * (m2 + h * h + 3 * H * h), rtol=1e-13)


def test_conformal_chart_flat_picture_of_tanh():
    # Omega = 1/a on a(tau)^2 eta gives M^2 = a^2 m^2 - a''/a
    prof = ScaleFactorProfile.tanh(1.0, 2.0, 1.0)
    g = Grid.from_ranges((-2.0, 2.0), 41, (0.0, 1.0), 8, periodic_x=True)
    tr = _triple(FLRWMetric(prof, "conformal"), g, 1.0)
    out = apply_conformal(tr, ConformalFactor.from_scale(prof, -1.0))
    a, _, dda = prof.derivs(g.t)
    assert np.allclose(out.mass2[:, 0], a * a - dda / a, rtol=1e-13, atol=1e-13)
    assert out.omega == ConformalFactor.from_scale(prof, -1.0)


def test_exponential_family_value():
    # DERIVED: e^0 (1 - 2*0.09) + 2*0.25 = 1.32
    H2, m2 = apply_conformal_flrw(0.2, 0.3, 1.0, 0.0)
    assert H2 == pytest.approx(0.5, abs=1e-15)
    assert m2 == pytest.approx(1.32, abs=1e-15)


def test_exponential_family_identity_and_flat_picture():
    t = np.linspace(0, 2, 7)
    H2, m2 = apply_conformal_flrw(0.0, 0.4, 1.5, t)
    assert H2 == 0.4 and np.allclose(m2, 1.5, rtol=0, atol=1e-15)
    # h = -H lands on the flat picture e^{2Ht}(m^2 - 2H^2)
    H0, flat = apply_conformal_flrw(-0.4, 0.4, 1.5, t)
    assert H0 == 0.0
    assert np.allclose(flat, np.exp(0.8 * t) * (1.5 - 0.32), rtol=1e-14)


finite = st.floats(-1.0, 1.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(h1=finite, h2=finite, H1=finite, m2=st.floats(0.0, 3.0), t=st.floats(0.0, 1.0))
def test_exponential_family_composition(h1, h2, H1, m2, t):
    Ha, ma = apply_conformal_flrw(h1, H1, m2, t)
    Hb, mb = apply_conformal_flrw(h2, Ha, ma, t)
    Hc, mc = apply_conformal_flrw(h1 + h2, H1, m2, t)
    assert abs(Hb - Hc) <= 1e-14 * max(1.0, abs(Hc))
    assert abs(mb - mc) <= 1e-14 * max(1.0, abs(mc)) * 8


@settings(max_examples=100, deadline=None)
@given(h=finite, H1=finite, m2=st.floats(0.0, 3.0), t=st.floats(0.0, 1.0))
def test_exponential_family_inverse(h, H1, m2, t):
    Ha, ma = apply_conformal_flrw(h, H1, m2, t)
    Hb, mb = apply_conformal_flrw(-h, Ha, ma, t)
    assert abs(Hb - H1) <= 1e-15 * 4
    assert abs(mb - m2) <= 1e-13


def _smooth_factors(g):
    T, X = g.mesh()
    w1 = ConformalFactor.sampled(g, np.exp(0.3 * np.sin(T + X)))
    w2 = ConformalFactor.sampled(g, np.exp(0.3 * np.cos(T - 0.5 * X)))
    return w1, w2


@pytest.mark.parametrize("base", [FLRWMetric.de_sitter(1.0), FLRWMetric.minkowski("conformal")])
def test_sampled_mass_sector_composition(base):
    g = Grid.from_ranges((0, 0.5), 51, (0, 0.5), 51)
    w1, w2 = _smooth_factors(g)
    tr = SpacetimeTriple(base, np.ones(g.shape), 1.0, g)
    two_step = apply_conformal(apply_conformal(tr, w1), w2)
    one_step = apply_conformal(tr, compose(w1, w2))
    assert np.max(np.abs(two_step.mass2 - one_step.mass2)) < 1e-8
    assert np.allclose(two_step.field, one_step.field, rtol=1e-14)


def test_mixed_closed_and_sampled_composition():
    g = Grid.from_ranges((0, 0.5), 51, (0, 0.5), 51)
    w1, _ = _smooth_factors(g)
    w2 = ConformalFactor.exponential(0.4)
    tr = SpacetimeTriple(FLRWMetric.de_sitter(0.5), np.ones(g.shape), 1.0, g)
    two_step = apply_conformal(apply_conformal(tr, w1), w2)
    one_step = apply_conformal(tr, compose(w1, w2))
    assert np.max(np.abs(two_step.mass2 - one_step.mass2)) < 1e-8


@pytest.mark.parametrize("kind", ["sampled", "closed"])
def test_round_trip_apply_invert(kind):
    g = Grid.from_ranges((0, 0.5), 51, (0, 0.5), 51)
    prof = ScaleFactorProfile.tanh(1.0, 2.0, 1.0)
    w = _smooth_factors(g)[0] if kind == "sampled" else ConformalFactor(h=0.3, factors=((prof, 2.0),))
    tr = _triple(FLRWMetric.de_sitter(0.8), g, 1.3)
    back = apply_conformal(apply_conformal(tr, w), invert(w))
    assert np.max(np.abs(back.mass2 - tr.mass2)) < 1e-10
    assert np.max(np.abs(back.field - tr.field)) < 1e-10
    if kind == "closed":
        assert back.omega.is_identity


def test_compose_and_invert_closed_forms():
    prof = ScaleFactorProfile.tanh(1.0, 2.0, 1.0)
    a = ConformalFactor(h=0.25, factors=((prof, 1.0),))
    b = ConformalFactor(h=-0.5)
    assert compose(a, b) == ConformalFactor(h=-0.25, factors=((prof, 1.0),))
    assert compose(a, invert(a)).is_identity
    assert invert(invert(a)) == a


def test_compose_rejects_grid_mismatch():
    g1 = Grid.from_ranges((0, 1), 6, (0, 1), 6)
    g2 = Grid.from_ranges((0, 1), 7, (0, 1), 6)
    w = ConformalFactor.sampled(g1, np.ones(g1.shape))
    with pytest.raises(ShapeError):
        compose(w, ConformalFactor.identity(), g2)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonpositive_closed_factor_rejected():
    g = _grid()
    tr = _triple(FLRWMetric.de_sitter(0.5), g)
    with pytest.raises(DomainError):
        apply_conformal(tr, ConformalFactor.exponential(1e6))


def test_box_of_constant_is_zero_and_metric_diagonal():
    g = _grid()
    cm = ConformalMetric(FLRWMetric.de_sitter(0.5), ConformalFactor.exponential(-0.5))
    assert np.allclose(cm.box_sampled(g, np.ones(g.shape)), 0.0, atol=1e-12)
    lower, upper = cm.diagonal(g)
    assert np.allclose(lower * upper, 1.0)
    # e^{-2*0.5 t} e^{2*0.5 t} = 1 on spatial components
    assert np.allclose(lower[..., 1], 1.0)
