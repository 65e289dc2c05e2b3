import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confkg.bogoliubov import spectrum
from confkg.errors import UsageError
from confkg.geometry import ConformalFactor, Grid, ScaleFactorProfile
from confkg.modes import FlatMassProfile
from confkg.qrfstate import (
    Branch,
    BranchState,
    MassTerm,
    branch_expectation_nk,
    frame_change_g_to_m,
    frame_change_m_to_g,
)

R = math.sqrt(0.5)
TANH = ScaleFactorProfile.tanh(1.0, 2.0, 1.0)
TANH2 = ScaleFactorProfile.tanh(1.0, 1.5, 2.0)
KS = [0.2, 1.0, 3.0]


def two_branch(xi=0.0, amps=(R, R)):
    mass = MassTerm(1.0, xi)
    return BranchState((
        Branch(amps[0], ConformalFactor.from_scale(TANH), mass),
        Branch(amps[1], ConformalFactor.from_scale(TANH2), mass),
    ), "mass")


def test_normalization_enforced():
    with pytest.raises(ValueError, match="normalized"):
        two_branch(amps=(0.7, 0.7))
    with pytest.raises(ValueError):
        BranchState((), "mass")


def test_distinct_and_shared_labels_enforced():
    f = ConformalFactor.from_scale(TANH)
    with pytest.raises(ValueError, match="same label"):
        BranchState((Branch(R, f, MassTerm(1.0)), Branch(R, f, MassTerm(1.0))), "mass")
    with pytest.raises(ValueError, match="share one mass"):
        BranchState((Branch(R, f, MassTerm(1.0)),
                     Branch(R, ConformalFactor.from_scale(TANH2), MassTerm(2.0))), "mass")
    with pytest.raises(ValueError, match="share one metric"):
        BranchState((Branch(R, f, MassTerm(1.0)),
                     Branch(R, ConformalFactor.identity(), MassTerm(2.0))), "metric")
    with pytest.raises(ValueError):
        BranchState((Branch(1.0, f, MassTerm(1.0)),), "nonsense")


def test_frame_mismatch_is_usage_error():
    s = two_branch()
    with pytest.raises(UsageError):
        frame_change_g_to_m(s)
    with pytest.raises(UsageError):
        frame_change_m_to_g(frame_change_m_to_g(s))


def test_single_de_sitter_branch_maps_to_flat_picture():
    # published value M^2(t) = e^{2Ht}(m^2 - 2H^2); conformal time tau = (1 - e^{-Ht})/H
    H, m2 = 0.5, 1.0
    ds = ScaleFactorProfile.exponential(H)
    s = BranchState((Branch(1.0, ConformalFactor.from_scale(ds), MassTerm(m2)),), "mass")
    g = frame_change_m_to_g(s)
    assert g.frame == "metric" and g.branches[0].omega.is_identity
    rep = g.branches[0].mass.representative(g.branches[0].omega)
    for t in (0.0, 0.7, 2.0):
        tau = (1 - math.exp(-H * t)) / H
        assert rep(tau) == pytest.approx(math.exp(2 * H * t) * (m2 - 2 * H * H), rel=1e-12)


def test_two_branches_become_metric_definite():
    g = frame_change_m_to_g(two_branch())
    assert all(b.omega.is_identity for b in g.branches)
    assert g.branches[0].mass != g.branches[1].mass
    assert np.array_equal(g.amplitudes, two_branch().amplitudes)


def test_round_trip_is_label_exact():
    s = two_branch(amps=(0.6, 0.8j))
    back = frame_change_g_to_m(frame_change_m_to_g(s))
    assert back.frame == "mass"
    for a, b in zip(s.branches, back.branches):
        assert a.omega == b.omega and a.mass == b.mass
    assert np.array_equal(back.amplitudes, s.amplitudes)


def test_round_trip_with_sampled_factors():
    g = Grid.from_ranges((0, 1), 21, (0, 1), 21)
    T, X = g.mesh()
    f1 = ConformalFactor.sampled(g, np.exp(0.2 * np.sin(T + X)))
    f2 = ConformalFactor.sampled(g, 1.5 + 0.1 * np.cos(T * X))
    s = BranchState((Branch(R, f1, MassTerm(1.0)), Branch(-R, f2, MassTerm(1.0))), "mass")
    target = ConformalFactor.exponential(0.3)
    back = frame_change_g_to_m(frame_change_m_to_g(s, target))
    for a, b in zip(s.branches, back.branches):
        assert a.labels_equal(b, atol=1e-10)


def test_metric_to_mass_with_a_nontrivial_target():
    target = ConformalFactor.exponential(0.25)
    g = frame_change_m_to_g(two_branch(), target)
    assert all(b.omega == target for b in g.branches)
    back = frame_change_g_to_m(g)
    for a, b in zip(two_branch().branches, back.branches):
        assert a.labels_equal(b, atol=1e-15)


def test_metric_definite_state_needs_common_mass_class():
    s = BranchState((Branch(R, ConformalFactor.identity(), MassTerm(1.0)),
                     Branch(R, ConformalFactor.identity(), MassTerm(2.0))), "metric")
    with pytest.raises(UsageError):
        frame_change_g_to_m(s)


def test_constant_mass_branch_is_unchanged():
    s = BranchState((Branch(1.0, ConformalFactor.identity(), MassTerm(1.0)),), "metric")
    back = frame_change_g_to_m(s)
    assert back.branches[0].omega.is_identity and back.branches[0].mass == MassTerm(1.0)


def test_single_branch_expectation_equals_spectrum():
    s = BranchState((Branch(1.0, ConformalFactor.from_scale(TANH), MassTerm(1.0)),), "mass")
    got = np.array([v for _, v in branch_expectation_nk(s, KS)])
    ref = spectrum(TANH, 1.0, KS).n
    assert np.allclose(got, ref, rtol=0, atol=1e-12)
    flat = np.array([v for _, v in branch_expectation_nk(frame_change_m_to_g(s), KS)])
    assert np.allclose(flat, spectrum(FlatMassProfile(TANH, 1.0), 1.0, KS).n, rtol=0, atol=1e-12)


def test_static_branch_halves_the_spectrum():
    static = ScaleFactorProfile.tanh(1.0, 1.0, 1.0)
    mass = MassTerm(1.0)
    s = BranchState((Branch(R, ConformalFactor.from_scale(TANH), mass),
                     Branch(R, ConformalFactor.from_scale(static), mass)), "mass")
    got = np.array([v for _, v in branch_expectation_nk(s, KS)])
    assert np.allclose(got, 0.5 * spectrum(TANH, 1.0, KS).n, rtol=0, atol=1e-12)


@pytest.mark.parametrize("xi", [0.0, 1.0 / 6.0])
def test_expectation_is_frame_invariant(xi):
    s = two_branch(xi)
    before = branch_expectation_nk(s, KS)
    after = branch_expectation_nk(frame_change_m_to_g(s), KS)
    assert max(abs(a[1] - b[1]) for a, b in zip(before, after)) < 1e-10


def test_default_range_requires_static_profiles():
    ds = ConformalFactor.from_scale(ScaleFactorProfile.exponential(1.0))
    s = BranchState((Branch(1.0, ds, MassTerm(1.0)),), "mass")
    with pytest.raises(UsageError):
        branch_expectation_nk(s, KS)


def test_json_round_trip_and_field_names():
    s = two_branch(amps=(0.6, -0.8j))
    doc = json.loads(s.to_json())
    assert doc["frame"] == "mass"
    assert set(doc["branches"][0]) == {"re_amp", "im_amp", "omega", "mass"}
    back = BranchState.from_json(s.to_json())
    assert back.to_json() == s.to_json()
    assert np.array_equal(back.amplitudes, s.amplitudes)
    g = frame_change_m_to_g(s)
    assert BranchState.from_json(g.to_json()).to_json() == g.to_json()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=5)
       .filter(lambda v: sum(a * a + b * b for a, b in v) > 1e-3))
def test_frame_changes_preserve_amplitudes(raw):
    amps = np.array([complex(a, b) for a, b in raw])
    amps = amps / math.sqrt(math.fsum(abs(a) ** 2 for a in amps))
    if abs(math.fsum(abs(a) ** 2 for a in amps) - 1) > 1e-12:
        return
    branches = tuple(Branch(a, ConformalFactor.exponential(0.1 * i), MassTerm(1.0))
                     for i, a in enumerate(amps))
    s = BranchState(branches, "mass")
    g = frame_change_m_to_g(s)
    back = frame_change_g_to_m(g)
    assert np.array_equal(g.amplitudes, s.amplitudes)
    assert np.array_equal(back.amplitudes, s.amplitudes)
    assert g.norm == s.norm
    assert len({json.dumps(b.mass.to_dict()) for b in g.branches}) == len(s)
