import math

import numpy as np
import pytest

from lsmcf import (BlowupError, BoundaryRegime, Constant, GridSpec, InitialDataSpec,
                   NeumannHalfBump, RadialBump, SolverParams, SpecError, build, run)
from lsmcf.fields import integrate_array
from lsmcf.geometry import superlevel_volume
from lsmcf.solver import (approximate_curvature, approximate_normal, rhs_divergence_form,
                          rhs_hessian_form, snapshot_fields, step)

from conftest import circle_run
from oracles import radial_solve

CIRCLE = InitialDataSpec(RadialBump((0.0, 0.0), 0.4, 0.2))


# --- parameters -------------------------------------------------------------------

def test_time_step_respects_stability_and_cadence():
    g = GridSpec(2, 1.0, 129)
    p = SolverParams(g.spacing, 0.06, dt_safety=0.5, snapshot_interval=0.001)
    dt, every, steps = p.stepping(g)
    assert dt <= 0.5 * g.spacing ** 2 / 4 * (1 + 1e-12)
    assert every * dt == pytest.approx(0.001, rel=1e-12)
    assert steps * dt >= 0.06 - dt
    dt3, _, _ = SolverParams(0.1, 0.01).stepping(GridSpec(3, 1.0, 33))
    assert dt3 == pytest.approx(0.5 * (2 / 32) ** 2 / 6)


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(epsilon=1.5), dict(dt_safety=0.0),
                                dict(dt_safety=2.0), dict(t_end=-1.0),
                                dict(snapshot_interval=0.0)])
def test_solver_params_validation(kw):
    args = dict(epsilon=0.1, t_end=0.01)
    args.update(kw)
    with pytest.raises(SpecError):
        SolverParams(**args)


# --- right-hand sides -------------------------------------------------------------

def test_rhs_of_linear_is_zero():
    g = GridSpec(2, 1.0, 33)
    u = g.from_function(lambda x, y: 0.3 * x - 1.2 * y + 0.5)
    assert np.max(np.abs(rhs_hessian_form(u, 0.05).values)) < 1e-12
    assert np.max(np.abs(rhs_divergence_form(u, 0.05).values)) < 1e-12


def test_rhs_at_critical_point_is_laplacian():
    g = GridSpec(2, 1.0, 33)
    u = g.from_function(lambda x, y: 0.5 * (x * x + y * y))
    assert rhs_hessian_form(u, 1.0).values[16, 16] == pytest.approx(2.0, abs=1e-12)


def test_rhs_matches_radial_reduction_on_the_band():
    # d = 2: u_t = psi'' eps^2 / (psi'^2 + eps^2) + psi' / r for u = psi(|x|)
    g = GridSpec(2, 1.0, 257)
    eps = 0.01
    u = build(CIRCLE, g)
    p = CIRCLE.shape.profile
    X, Y = g.coords
    r = np.sqrt(X * X + Y * Y)
    band = (r > 0.3) & (r < 0.5)
    d1, d2 = p.deriv(r[band]), p.second_deriv(r[band])
    ref = d2 * eps ** 2 / (d1 ** 2 + eps ** 2) + d1 / r[band]
    np.testing.assert_allclose(rhs_hessian_form(u, eps).values[band], ref, atol=2e-3)
    # on the unit-slope band the speed is -1/r (inward motion)
    assert np.all(rhs_hessian_form(u, eps).values[band] < 0)


def test_divergence_form_agrees_with_hessian_form_at_rate_h():
    diffs = []
    for n in (65, 129, 257):
        g = GridSpec(2, 1.0, n)
        u = build(CIRCLE, g)
        eps = g.spacing
        f = snapshot_fields(u, eps)
        band = f.grad_norm > eps
        d = np.abs(rhs_hessian_form(u, eps).values - rhs_divergence_form(u, eps).values)
        diffs.append(d[band].max())
    assert diffs[1] / diffs[0] < 0.65 and diffs[2] / diffs[1] < 0.65


def test_normal_and_curvature_fields():
    g = GridSpec(2, 1.0, 129)
    u = build(CIRCLE, g)
    nu = approximate_normal(u, g.spacing)
    assert np.max(nu.norm()) < 1.0
    H = approximate_curvature(u, 1e-3).values
    X, Y = g.coords
    r = np.sqrt(X * X + Y * Y)
    band = np.abs(r - 0.4) < 0.05
    # H of a circle of radius r, nu pointing outwards of the super-level set
    np.testing.assert_allclose(H[band], 1.0 / r[band], rtol=1e-2)


# --- single step ------------------------------------------------------------------

@pytest.mark.parametrize("regime", list(BoundaryRegime))
def test_step_keeps_constant_fixed(regime):
    g = GridSpec(2, 1.0, 33, regime)
    u = build(InitialDataSpec(Constant(), level_offset=-0.7), g)
    assert np.all(step(u, SolverParams(0.1, 0.01)).values == -0.7)


def test_step_lowers_u_on_the_initial_circle_and_keeps_sup_norm():
    g = GridSpec(2, 1.0, 129)
    u = build(CIRCLE, g)
    p = SolverParams(g.spacing, 0.01)
    v = step(u, p)
    X, Y = g.coords
    ring = np.abs(np.sqrt(X * X + Y * Y) - 0.4) < g.spacing
    assert np.all(v.values[ring] < u.values[ring])
    assert v.sup_norm() <= u.sup_norm() + 1e-12
    assert np.all(v.values[g.faces] == u.values[g.faces])


def test_step_blowup_is_detected():
    g = GridSpec(2, 1.0, 33)
    u = build(CIRCLE, g)
    with pytest.raises(BlowupError):
        step(u, SolverParams(1.0, 0.01), dt=50 * g.spacing ** 2)


def test_run_blowup_reports_time(monkeypatch):
    g = GridSpec(2, 1.0, 33)
    u = build(CIRCLE, g)
    unstable = 20 * g.spacing ** 2
    monkeypatch.setattr(SolverParams, "stepping", lambda self, grid: (unstable, 1, 50))
    with pytest.raises(BlowupError) as info:
        run(u, SolverParams(1.0, 1.0))
    assert info.value.time is not None and info.value.time > 0


# --- trajectories -----------------------------------------------------------------

def test_run_with_zero_horizon():
    g = GridSpec(2, 1.0, 33)
    u = build(CIRCLE, g)
    traj = run(u, SolverParams(0.1, 0.0))
    assert traj.times == [0.0] and traj.snapshots[0] is u


def test_run_snapshot_bookkeeping(circle65):
    t = np.asarray(circle65.times)
    assert t[0] == 0.0 and np.all(np.diff(t) > 0)
    assert t[-1] >= 0.06 - circle65.dt
    steps = t / circle65.dt
    np.testing.assert_allclose(steps, np.round(steps), atol=1e-6)
    assert circle65.index_of(0.03) == 30
    with pytest.raises(SpecError):
        circle65.index_of(0.0305)


def test_maximum_principle(circle129):
    g0 = circle129.initial.values
    lo, hi = g0.min() - 1e-12, g0.max() + 1e-12
    for u in circle129.snapshots:
        assert lo <= u.values.min() and u.values.max() <= hi


def test_matches_one_dimensional_radial_oracle():
    errs = []
    for n in (65, 129):
        traj = circle_run(n, t_end=0.02, interval=0.005)
        g = traj.grid
        r, ref = radial_solve(CIRCLE.shape.profile, 1.0, g.spacing / 4, traj.epsilon, 0.02,
                              far=CIRCLE.far_field_value)
        c = (n - 1) // 2
        ray = traj.snapshots[-1].values[c:, c]
        xs = g.axis[c:]
        band = (xs > 0.25) & (xs < 0.55)
        errs.append(np.max(np.abs(ray - np.interp(xs, r, ref))[band]))
    assert errs[1] < 1e-3
    assert errs[1] < errs[0]


def test_shrinking_circle_radius_law_small_grid(circle129):
    for t in (0.02, 0.04, 0.06):
        area = superlevel_volume(circle129.at(t), 0.0)
        assert math.sqrt(area / math.pi) == pytest.approx(math.sqrt(0.16 - 2 * t), rel=0.01)


def test_comparison_principle_nested_radii():
    g = GridSpec(2, 1.0, 65)
    p = SolverParams(g.spacing, 0.04, snapshot_interval=0.002)
    low = run(build(InitialDataSpec(RadialBump((0.0, 0.0), 0.3, 0.2)), g), p)
    high = run(build(InitialDataSpec(RadialBump((0.0, 0.0), 0.4, 0.2)), g), p)
    assert np.all(low.initial.values <= high.initial.values)
    gap = max(float(np.max(a.values - b.values)) for a, b in zip(low.snapshots, high.snapshots))
    assert gap <= 1e-8


def test_neumann_half_circle_is_the_reflected_full_circle():
    n = 129
    gN = GridSpec(2, 1.0, n, BoundaryRegime.NEUMANN_BOX)
    gF = GridSpec(2, 1.0, n)
    p = SolverParams(gN.spacing, 0.03, snapshot_interval=0.01)
    half = run(build(InitialDataSpec(NeumannHalfBump((-1.0, 0.0), 0.4, 0.2)), gN), p)
    full = run(build(CIRCLE, gF), p)
    c = (n - 1) // 2
    for a, b in zip(half.snapshots, full.snapshots):
        # node (i, j) of the half box sits at distance i*h from the face centre
        assert np.max(np.abs(a.values[:c + 1, :] - b.values[c:, :])) < 1e-3


# --- far field --------------------------------------------------------------------

def _shell_deviation(traj, width=5):
    shell = traj.grid.face_mask(width)
    far = traj.initial.values[0, 0]
    return max(float(np.max(np.abs(u.values[shell] - far))) for u in traj.snapshots)


def test_far_field_drift_is_the_physical_diffusive_tail(circle129):
    # the unconstrained radial problem shows the same outward spreading of the tail
    g = circle129.grid
    r, ref = radial_solve(CIRCLE.shape.profile, 1.5, g.spacing / 2, circle129.epsilon, 0.06,
                          far=CIRCLE.far_field_value)
    outer = r >= g.half_width - 5 * g.spacing
    tail = float(np.max(np.abs(ref[outer] - CIRCLE.far_field_value)))
    dev = _shell_deviation(circle129)
    assert 1e-5 < dev <= tail


@pytest.mark.xfail(strict=True, reason="tolerance below the diffusive tail of the exact viscous solution")
def test_far_field_literal_tolerance(circle129):
    assert _shell_deviation(circle129) <= 1e-6


# --- energy -----------------------------------------------------------------------

def test_viscous_energy_is_monotone_and_dissipation_identity_holds(circle129):
    _, E, D = circle129.energy_log.as_arrays()
    assert np.max(np.diff(E)) <= 1e-8 * E[0]
    defect = np.sum(np.diff(E) + circle129.dt * D[:-1])
    assert abs(defect) <= 0.05 * (E[0] - E[-1])


def test_energy_drop_matches_level_integrated_circle_law(circle129):
    # E(t) is about sum over levels of 2 pi R_s(t) ds on the unit-slope band
    _, E, _ = circle129.energy_log.as_arrays()
    p = CIRCLE.shape.profile
    s = np.linspace(-0.14, 0.14, 2001)
    R0 = np.array([p.radius_of_level(v) for v in s])
    R1 = np.sqrt(np.maximum(R0 ** 2 - 0.12, 0.0))
    band_drop = np.trapezoid(2 * np.pi * (R0 - R1), s)
    assert E[0] - E[-1] > band_drop
    assert E[0] - E[-1] < 1.5 * band_drop


def test_near_critical_set_stillness_improves_with_epsilon():
    g = GridSpec(2, 1.0, 129)
    X, Y = g.coords
    inside = np.sqrt(X * X + Y * Y) < 0.4
    values = []
    for k in (4, 2, 1):
        eps = k * g.spacing
        traj = run(build(CIRCLE, g), SolverParams(eps, 0.03, snapshot_interval=0.005))
        rate = [integrate_array(np.abs(f.u_t) * ((f.grad_norm < eps / 10) & inside), g)
                for f in traj.iter_fields()]
        values.append(np.trapezoid(rate, traj.times))
    assert values[0] > values[1] > values[2]
