import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from lsmcf import (BoundaryRegime, CertificationFailure, Constant, GridSpec, InitialDataSpec,
                   NeumannHalfBump, RadialBump, SpecError, TwoBumps, build,
                   certify_well_prepared)
from lsmcf.fields import gradient
from lsmcf.initial_data import RadialProfile, approximate_curvature_mass, check_margin

from oracles import radial_curvature_mass, smooth_bump

CIRCLE = InitialDataSpec(RadialBump((0.0, 0.0), 0.4, 0.2))


def grid2(n=129, regime=BoundaryRegime.FAR_FIELD_CONSTANT):
    return GridSpec(2, 1.0, n, regime)


# --- profile ----------------------------------------------------------------------

def test_profile_cap_and_zero_crossing():
    p = CIRCLE.shape.profile
    assert float(p(0.0)) == pytest.approx(0.2, abs=1e-15)
    assert float(p(0.4)) == pytest.approx(0.0, abs=1e-12)
    assert float(p.deriv(0.4)) == pytest.approx(-1.0, abs=1e-15)
    assert float(p(p.support_radius)) == pytest.approx(-0.2, abs=1e-15)
    assert float(p(5.0)) == -0.2


def test_profile_matches_integrated_slope():
    # psi(r) = cap - int_0^r w, with w the smoothstep plateau written independently
    p = RadialProfile(0.4, 0.2, 0.1)
    r1, r2, b = 0.4 - 0.2 - 0.05, 0.4 + 0.2 + 0.05, 0.1

    def w(r):
        return np.minimum(1.0 - smooth_bump((r - r1) / b), 1.0 - smooth_bump((r2 - r) / b))

    rr = np.linspace(0, 0.8, 8001)
    wr = w(rr)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (wr[1:] + wr[:-1]) * np.diff(rr))])
    np.testing.assert_allclose(p(rr), 0.2 - cum, atol=1e-8)


def test_profile_is_c3_across_blend_junctions():
    p = RadialProfile(0.4, 0.2, 0.1)
    for x in (p.ramp_start, p.ramp_start + p.blend, p.support_radius - p.blend, p.support_radius):
        for k, f in enumerate((p, p.deriv, p.second_deriv)):
            a, b = float(f(x - 1e-9)), float(f(x + 1e-9))
            assert a == pytest.approx(b, abs=1e-6), (x, k)
        # one-sided difference quotients of the second derivative agree in the limit
        def jump(d):
            left = (float(p.second_deriv(x)) - float(p.second_deriv(x - d))) / d
            right = (float(p.second_deriv(x + d)) - float(p.second_deriv(x))) / d
            return abs(left - right)
        assert jump(1e-6) <= 0.2 * jump(1e-5) + 1e-6


@pytest.mark.parametrize("level", [-0.05, 0.13, -0.17, 0.19])
def test_level_radius_matches_bisection_oracle(level):
    p = CIRCLE.shape.profile
    r_ref = brentq(lambda r: float(p(r)) - level, 0.0, p.support_radius, xtol=1e-15)
    assert CIRCLE.level_radius(level) == pytest.approx(r_ref, abs=1e-12)


def test_level_radius_in_linear_zone_is_closed_form():
    assert CIRCLE.level_radius(-0.05) == pytest.approx(0.45, abs=1e-15)
    spec = InitialDataSpec(RadialBump((0.0, 0.0), 0.4, 0.2), level_offset=1.5)
    assert spec.level_radius(1.45) == pytest.approx(0.45, abs=1e-12)


def test_level_radius_rejects_out_of_range():
    with pytest.raises(SpecError):
        CIRCLE.level_radius(0.2)


@pytest.mark.parametrize("kw", [dict(cap=0.0), dict(blend=0.5), dict(inner_radius=0.1)])
def test_profile_rejects_bad_parameters(kw):
    args = dict(inner_radius=0.4, cap=0.2, blend=0.1)
    args.update(kw)
    with pytest.raises(SpecError):
        RadialProfile(**args)


# --- build ------------------------------------------------------------------------

def test_build_radial_bump_values():
    g = grid2(201)
    u = build(CIRCLE, g).values
    assert u[100, 100] == pytest.approx(0.2, abs=1e-15)   # centre
    assert u[140, 100] == pytest.approx(0.0, abs=1e-12)   # |x| = 0.4
    X, Y = g.coords
    outside = np.sqrt(X * X + Y * Y) > CIRCLE.shape.profile.support_radius
    assert np.all(u[outside] == CIRCLE.far_field_value)


def test_build_is_monotone_along_rays():
    g = grid2(201)
    u = build(CIRCLE, g).values
    for ray in (u[100, 100:], u[100:, 100], np.diagonal(u)[100:]):
        assert np.all(np.diff(ray) <= 1e-15)


def test_build_far_field_with_offset():
    spec = InitialDataSpec(RadialBump((0.1, -0.05), 0.3, 0.1), level_offset=2.0)
    u = build(spec, grid2())
    assert spec.far_field_value == pytest.approx(1.9)
    assert u.values[0, 0] == pytest.approx(1.9, abs=1e-15)
    assert u.values.max() == pytest.approx(2.1, abs=1e-3)


def test_two_bumps_are_disjoint_sums():
    a = RadialBump((-0.33, 0.0), 0.2, 0.1)
    b = RadialBump((0.33, 0.0), 0.2, 0.1)
    g = grid2()
    both = build(InitialDataSpec(TwoBumps(a, b)), g).values
    ua = build(InitialDataSpec(a), g).values
    ub = build(InitialDataSpec(b), g).values
    np.testing.assert_allclose(both, ua + ub + 0.1, atol=1e-15)


def test_two_bumps_overlap_rejected():
    a = RadialBump((-0.1, 0.0), 0.2, 0.1)
    b = RadialBump((0.1, 0.0), 0.2, 0.1)
    with pytest.raises(SpecError):
        build(InitialDataSpec(TwoBumps(a, b)), grid2())


def test_margin_violation_rejected():
    with pytest.raises(SpecError):
        build(InitialDataSpec(RadialBump((0.3, 0.0), 0.4, 0.2)), grid2())
    with pytest.raises(SpecError):  # dimension mismatch
        check_margin(InitialDataSpec(RadialBump((0.0, 0.0, 0.0), 0.4, 0.2)), grid2())


def test_constant_data():
    g = grid2(33)
    u = build(InitialDataSpec(Constant(), level_offset=0.3), g)
    assert np.all(u.values == 0.3)


def test_neumann_half_bump_symmetry_and_normal_derivative():
    g = grid2(129, BoundaryRegime.NEUMANN_BOX)
    spec = InitialDataSpec(NeumannHalfBump((-1.0, 0.0), 0.4, 0.2))
    u = build(spec, g)
    gx, gy = gradient(u).components
    assert np.all(gx[0, :] == 0.0) and np.all(gx[-1, :] == 0.0)
    assert np.all(gy[:, 0] == 0.0) and np.all(gy[:, -1] == 0.0)
    # the even extension across x = -1 is the full bump; first difference is symmetric
    np.testing.assert_allclose(u.values[1, :], u.values[1, ::-1], atol=1e-15)
    assert u.values[0, 64] == pytest.approx(0.2, abs=1e-15)


def test_neumann_half_bump_needs_neumann_regime_and_a_face():
    with pytest.raises(SpecError):
        build(InitialDataSpec(NeumannHalfBump((-1.0, 0.0), 0.4, 0.2)), grid2())
    with pytest.raises(SpecError):
        build(InitialDataSpec(NeumannHalfBump((0.0, 0.0), 0.4, 0.2)),
              grid2(regime=BoundaryRegime.NEUMANN_BOX))


def test_default_level_band_stays_in_linear_zone():
    lo, hi = CIRCLE.level_band()
    assert (lo, hi) == pytest.approx((-0.14, 0.14))
    p = CIRCLE.shape.profile
    for s in np.linspace(lo, hi, 9):
        assert float(p.deriv(CIRCLE.level_radius(s))) == -1.0


@settings(max_examples=40, deadline=None)
@given(r0=st.floats(0.2, 0.5), cap=st.floats(0.02, 0.15), frac=st.floats(0.1, 1.0))
def test_profile_properties_hold_for_random_parameters(r0, cap, frac):
    blend = frac * cap
    p = RadialProfile(r0, cap, blend)
    rr = np.linspace(0.0, p.support_radius + 0.1, 2001)
    vals = p(rr)
    assert np.all(np.diff(vals) <= 1e-15)
    assert float(p(0.0)) == pytest.approx(cap, abs=1e-14)
    assert float(p(r0)) == pytest.approx(0.0, abs=1e-12)
    assert float(p(p.support_radius)) == pytest.approx(-cap, abs=1e-14)
    s = 0.5 * (cap - 0.5 * blend)
    assert float(p(p.radius_of_level(s))) == pytest.approx(s, abs=1e-12)


# --- certification ----------------------------------------------------------------

def test_certify_constant_is_zero():
    g = grid2(65)
    rep = certify_well_prepared(build(InitialDataSpec(Constant()), g))
    assert all(m == 0.0 for m in rep.masses)
    assert rep.passed


def test_certify_default_ladder():
    g = grid2(129)
    rep = certify_well_prepared(build(CIRCLE, g))
    assert rep.epsilons[0] == 1.0 and rep.epsilons[-1] >= max(g.spacing, 1 / 64) - 1e-15
    assert all(a / b == 2 for a, b in zip(rep.epsilons, rep.epsilons[1:]))
    assert rep.growth <= 3.0


@pytest.mark.parametrize("eps", [1.0, 0.25, 1 / 32])
def test_curvature_mass_matches_radial_quadrature(eps):
    g = grid2(257)
    p = CIRCLE.shape.profile
    ref = radial_curvature_mass(p, p.deriv, p.second_deriv, eps, p.support_radius + 0.01)
    assert approximate_curvature_mass(build(CIRCLE, g), eps) == pytest.approx(ref, rel=0.02)


def test_curvature_mass_ratio_between_h_and_one():
    g = grid2(129)
    u = build(CIRCLE, g)
    ratio = approximate_curvature_mass(u, g.spacing) / approximate_curvature_mass(u, 1.0)
    p = CIRCLE.shape.profile
    ref = (radial_curvature_mass(p, p.deriv, p.second_deriv, g.spacing, 0.7)
           / radial_curvature_mass(p, p.deriv, p.second_deriv, 1.0, 0.7))
    assert ratio <= 3.0
    assert ratio == pytest.approx(ref, rel=0.05)


def test_certification_failure_and_preconditions():
    g = grid2(65)
    u = build(CIRCLE, g)
    with pytest.raises(CertificationFailure):
        certify_well_prepared(u, max_growth=1.01)
    rep = certify_well_prepared(u, max_growth=1.01, raise_on_failure=False)
    assert not rep.passed
    with pytest.raises(SpecError):
        certify_well_prepared(u, [0.25, 0.5])
    with pytest.raises(SpecError):
        certify_well_prepared(u, [1.0, g.spacing / 8])
