"""Residuals and defects of the BV-solution identities on a computed trajectory.

Each identity is evaluated in a single pass over the snapshots, for a whole
family of test objects at once.  Space integrals use the grid quadrature (or
sub-cell fractions and contours for the level-set variants); time integrals
use the trapezoid rule over snapshots.  The ``d_t zeta`` term is integrated
exactly in time against the piecewise-linear interpolant of the snapshots,
``sum_i (tau(t_{i+1}) - tau(t_i)) (S_i + S_{i+1}) / 2``, so it reproduces the
fundamental theorem of calculus when ``u`` does not move.

Test-function derivatives always come from the closed-form profiles.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateTest, EmptyLevelSet, SpecError
from .fields import ScalarField, integrate_array
from .geometry import (cell_centers, cell_fractions, contour_integral, extract_contour,
                       velocity_field)
from .solver import run

DEGENERATE_NORM = 1e-12
MIN_WINDOW_SNAPSHOTS = 8

CSV_COLUMNS = ["identity", "test_id", "raw", "norm", "rel", "n", "epsilon", "level", "t_window"]


@dataclass
class ResidualReport:
    identity: str
    test_id: str
    raw: float
    norm: float
    n: int
    epsilon: float
    level: Optional[float] = None
    t_window: tuple = (0.0, 0.0)
    terms: dict = field(default_factory=dict)

    @property
    def degenerate(self):
        return not self.norm >= DEGENERATE_NORM

    @property
    def rel(self):
        return float("nan") if self.degenerate else abs(self.raw) / self.norm

    def row(self):
        return {
            "identity": self.identity, "test_id": self.test_id,
            "raw": repr(float(self.raw)), "norm": repr(float(self.norm)),
            "rel": repr(float(self.rel)), "n": self.n, "epsilon": repr(float(self.epsilon)),
            "level": "" if self.level is None else repr(float(self.level)),
            "t_window": f"{self.t_window[0]:g}:{self.t_window[1]:g}",
        }


def write_reports(path, reports):
    """Write reports as CSV with the fixed column set."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def median_relative(reports):
    rel = [r.rel for r in reports if not r.degenerate]
    return float(np.median(rel)) if rel else float("nan")


# --- shared plumbing ------------------------------------------------------------

def _report(identity, test, traj, terms, level=None, strict=True):
    raw = float(sum(terms.values()))
    norm = float(sum(abs(v) for v in terms.values()))
    rep = ResidualReport(identity, test.label or identity, raw, norm, traj.grid.n,
                         traj.epsilon, level, tuple(_base(test).time_window), dict(terms))
    if strict and rep.degenerate:
        raise DegenerateTest(f"{identity}/{rep.test_id}: normalization {norm:.3g} below {DEGENERATE_NORM}")
    return rep


def _base(test):
    return getattr(test, "base", test)


def _check_cadence(traj, tests):
    times = np.asarray(traj.times)
    for t in tests:
        ta, tb = _base(t).time_window
        if tb > times[-1] + 1e-12:
            raise SpecError(f"time window {(ta, tb)} exceeds the trajectory end {times[-1]:g}")
        inside = np.count_nonzero((times >= ta - 1e-12) & (times <= tb + 1e-12))
        if inside < MIN_WINDOW_SNAPSHOTS:
            raise SpecError(f"time window {(ta, tb)} spans only {inside} snapshots")


def _exact_time_pairing(times, tau, series):
    """``integral tau'(t) S(t) dt`` with ``S`` piecewise linear between snapshots."""
    tau = np.asarray(tau)
    series = np.asarray(series)
    return float(np.sum(np.diff(tau) * 0.5 * (series[1:] + series[:-1])))


def _cutoff(traj, cutoff):
    return traj.epsilon / 10.0 if cutoff is None else cutoff


def _contour(u, s, V, time):
    try:
        return extract_contour(u, s, attach={"V": V}, time=time)
    except EmptyLevelSet:
        return None


# --- the four identities ---------------------------------------------------------

def residual_distV_family(traj, tests, cutoff=None, strict=True):
    """``int int d_t zeta u + int int zeta V |grad u| + int g zeta(., 0)`` for each test."""
    _check_cadence(traj, tests)
    grid, times = traj.grid, np.asarray(traj.times)
    coords = grid.coords
    cut = _cutoff(traj, cutoff)
    space = [t.amplitude * t.space(coords) for t in tests]
    tau = np.array([[t.time(ti) for ti in times] for t in tests])
    S = np.zeros((len(tests), len(times)))
    B = np.zeros_like(S)
    for i, f in enumerate(traj.iter_fields()):
        V = velocity_field(f.u_t, f.grad, cut)
        flux = V * f.grad_norm
        for k, b in enumerate(space):
            S[k, i] = integrate_array(b * f.u.values, grid)
            if tau[k, i] != 0.0:
                B[k, i] = integrate_array(b * flux, grid)
    reports = []
    for k, t in enumerate(tests):
        terms = {
            "dt_zeta_u": _exact_time_pairing(times, tau[k], S[k]),
            "zeta_V_grad": float(np.trapezoid(tau[k] * B[k], times)),
            "initial": float(tau[k, 0] * S[k, 0]),
        }
        reports.append(_report("distV", t, traj, terms, strict=strict))
    return reports


def residual_distMC_family(traj, tests, cutoff=None, strict=True):
    """``int int (div xi - nu.grad xi nu)|grad u| + int int xi.nu V |grad u|`` per test."""
    _check_cadence(traj, tests)
    grid, times = traj.grid, np.asarray(traj.times)
    coords = grid.coords
    cut = _cutoff(traj, cutoff)
    P = np.zeros((len(tests), len(times)))
    Q = np.zeros_like(P)
    for i, f in enumerate(traj.iter_fields()):
        active = [k for k, t in enumerate(tests) if t.active(f.time)]
        if not active:
            continue
        V = velocity_field(f.u_t, f.grad, cut)
        for k in active:
            xi = tests[k]
            P[k, i] = integrate_array(xi.tangential_divergence(coords, f.time, f.nu) * f.grad_norm, grid)
            Q[k, i] = integrate_array(xi.dot(coords, f.time, f.nu) * V * f.grad_norm, grid)
    reports = []
    for k, t in enumerate(tests):
        terms = {"tangential_div": float(np.trapezoid(P[k], times)),
                 "xi_nu_V": float(np.trapezoid(Q[k], times))}
        reports.append(_report("distMC", t, traj, terms, strict=strict))
    return reports


def _require_2d(traj):
    if traj.grid.dimension != 2:
        raise SpecError("level-set identities are evaluated in 2D only")


def residual_level_V_family(traj, s, tests, cutoff=None, strict=True):
    """``int int_{Omega_s} d_t zeta + int int_{Sigma_s} zeta V + int_{Omega_s(0)} zeta(., 0)``."""
    _require_2d(traj)
    _check_cadence(traj, tests)
    grid, times = traj.grid, np.asarray(traj.times)
    cut = _cutoff(traj, cutoff)
    centres = cell_centers(grid)
    cell_area = grid.spacing ** 2
    space = [t.amplitude * t.space(centres) for t in tests]
    tau = np.array([[t.time(ti) for ti in times] for t in tests])
    S = np.zeros((len(tests), len(times)))
    B = np.zeros_like(S)
    for i, f in enumerate(traj.iter_fields()):
        frac = cell_fractions(f.u, s)
        for k, b in enumerate(space):
            S[k, i] = float(np.sum(frac * b)) * cell_area
        live = [k for k in range(len(tests)) if tau[k, i] != 0.0]
        if not live:
            continue
        c = _contour(f.u, s, velocity_field(f.u_t, f.grad, cut), f.time)
        if c is None:
            continue
        mid = c.midpoints
        pts = (mid[:, 0], mid[:, 1])
        for k in live:
            zeta = tests[k].amplitude * tests[k].space(pts)
            B[k, i] = contour_integral(c, zeta * c.fields["V"])
    reports = []
    for k, t in enumerate(tests):
        terms = {
            "dt_zeta_volume": _exact_time_pairing(times, tau[k], S[k]),
            "zeta_V_surface": float(np.trapezoid(tau[k] * B[k], times)),
            "initial": float(tau[k, 0] * S[k, 0]),
        }
        reports.append(_report("lvlV", t, traj, terms, level=s, strict=strict))
    return reports


def residual_level_MC_family(traj, s, tests, cutoff=None, strict=True):
    """``int int_{Sigma_s} (div xi - nu.grad xi nu) + int int_{Sigma_s} xi.nu V`` per test."""
    _require_2d(traj)
    _check_cadence(traj, tests)
    times = np.asarray(traj.times)
    cut = _cutoff(traj, cutoff)
    P = np.zeros((len(tests), len(times)))
    Q = np.zeros_like(P)
    for i, f in enumerate(traj.iter_fields()):
        active = [k for k, t in enumerate(tests) if t.active(f.time)]
        if not active:
            continue
        c = _contour(f.u, s, velocity_field(f.u_t, f.grad, cut), f.time)
        if c is None:
            continue
        mid = c.midpoints
        pts = (mid[:, 0], mid[:, 1])
        nu = (c.normals[:, 0], c.normals[:, 1])
        for k in active:
            xi = tests[k]
            P[k, i] = contour_integral(c, xi.tangential_divergence(pts, f.time, nu))
            Q[k, i] = contour_integral(c, xi.dot(pts, f.time, nu) * c.fields["V"])
    reports = []
    for k, t in enumerate(tests):
        terms = {"tangential_div": float(np.trapezoid(P[k], times)),
                 "xi_nu_V": float(np.trapezoid(Q[k], times))}
        reports.append(_report("lvlMC", t, traj, terms, level=s, strict=strict))
    return reports


def residual_distV(traj, zeta, **kw):
    return residual_distV_family(traj, [zeta], **kw)[0]


def residual_distMC(traj, xi, **kw):
    return residual_distMC_family(traj, [xi], **kw)[0]


def residual_level_V(traj, s, zeta, **kw):
    return residual_level_V_family(traj, s, [zeta], **kw)[0]


def residual_level_MC(traj, s, xi, **kw):
    return residual_level_MC_family(traj, s, [xi], **kw)[0]


# --- dissipation and curvature bounds -------------------------------------------

def _window(traj, t1, t2):
    i1, i2 = traj.index_of(t1), traj.index_of(t2)
    if i1 > i2:
        raise SpecError("t1 must not exceed t2")
    return i1, i2


def dissipation_defect(traj, t1, t2, cutoff=None):
    """``E(t2) + int int V^2 |grad u| - E(t1)`` with ``E = integral |grad u|``.

    Also returns the regularized energies ``E_eps`` at both times.
    """
    i1, i2 = _window(traj, t1, t2)
    grid = traj.grid
    cut = _cutoff(traj, cutoff)
    E, E_eps, rate = [], [], []
    for i in range(i1, i2 + 1):
        f = traj.fields(i)
        V = velocity_field(f.u_t, f.grad, cut)
        E.append(integrate_array(f.grad_norm, grid))
        E_eps.append(integrate_array(f.speed, grid))
        rate.append(integrate_array(V * V * f.grad_norm, grid))
    D = float(np.trapezoid(rate, traj.times[i1:i2 + 1])) if i2 > i1 else 0.0
    return {"E_t1": E[0], "E_t2": E[-1], "E_eps_t1": E_eps[0], "E_eps_t2": E_eps[-1],
            "D": D, "defect": E[-1] + D - E[0]}


def level_dissipation_defect(traj, s, t1, t2, cutoff=None):
    """``L(t2) + int int_{Sigma_s} V^2 - L(t1)`` with ``L`` the contour length (0 if empty)."""
    _require_2d(traj)
    i1, i2 = _window(traj, t1, t2)
    cut = _cutoff(traj, cutoff)
    L, rate = [], []
    for i in range(i1, i2 + 1):
        f = traj.fields(i)
        c = _contour(f.u, s, velocity_field(f.u_t, f.grad, cut), f.time)
        L.append(0.0 if c is None else c.length)
        rate.append(0.0 if c is None else contour_integral(c, c.fields["V"] ** 2))
    D = float(np.trapezoid(rate, traj.times[i1:i2 + 1])) if i2 > i1 else 0.0
    return {"L_t1": L[0], "L_t2": L[-1], "D": D, "defect": L[-1] + D - L[0]}


@dataclass
class CurvatureMassSeries:
    times: np.ndarray
    mass: np.ndarray

    @property
    def max_relative_increase(self):
        """Largest ``(m_{i+1} - m_i) / m_i`` over consecutive snapshots (0 if none)."""
        m = self.mass
        if len(m) < 2:
            return 0.0
        base = np.where(m[:-1] > 0, m[:-1], np.inf)
        return float(max(0.0, np.max(np.diff(m) / base)))

    @property
    def peak(self):
        return float(np.max(self.mass))


def curvature_mass_series(traj):
    """``integral |H_eps| dx`` at every snapshot."""
    grid = traj.grid
    mass = [integrate_array(np.abs(f.curvature), grid) for f in traj.iter_fields()]
    return CurvatureMassSeries(np.asarray(traj.times, dtype=float), np.asarray(mass))


def hsq_weighted_mass(traj):
    """Trapezoid-in-time integral of ``integral H_eps^2 sqrt(|grad u|^2 + eps^2) dx``."""
    grid = traj.grid
    rate = [integrate_array(f.curvature ** 2 * f.speed, grid) for f in traj.iter_fields()]
    return float(np.trapezoid(rate, traj.times)) if len(rate) > 1 else 0.0


def l1_continuity_check(traj, s, t0, t1, cutoff=None, slack=0.10):
    """Symmetric-difference volume of ``Omega_s`` against its Cauchy-Schwarz bound.

    ``lhs = |Omega_s(t0) sym-diff Omega_s(t1)|`` from cell fractions.  The
    bound is ``sqrt(int_{t0}^{t1} P dt) * sqrt(int_{t0}^{t1} int_Sigma V^2)``
    with ``P`` the contour length.  ``literal_rhs`` is the weaker-looking form
    ``sqrt(t1 - t0) * sqrt(total V^2 dissipation)`` without the perimeter
    factor, which is not a valid bound in general and is reported only.
    ``passed`` uses ``lhs <= rhs (1 + slack) + h P(t0)``.
    """
    _require_2d(traj)
    i0, i1 = _window(traj, t0, t1)
    grid = traj.grid
    cut = _cutoff(traj, cutoff)
    times = np.asarray(traj.times)
    perim, rate = np.zeros(len(times)), np.zeros(len(times))
    for i, f in enumerate(traj.iter_fields()):
        c = _contour(f.u, s, velocity_field(f.u_t, f.grad, cut), f.time)
        if c is not None:
            perim[i] = c.length
            rate[i] = contour_integral(c, c.fields["V"] ** 2)
    frac0 = cell_fractions(traj.snapshots[i0], s)
    frac1 = cell_fractions(traj.snapshots[i1], s)
    lhs = float(np.sum(np.abs(frac1 - frac0))) * grid.spacing ** 2
    sl = slice(i0, i1 + 1)
    win_P = float(np.trapezoid(perim[sl], times[sl])) if i1 > i0 else 0.0
    win_D = float(np.trapezoid(rate[sl], times[sl])) if i1 > i0 else 0.0
    total_D = float(np.trapezoid(rate, times)) if len(times) > 1 else 0.0
    rhs = np.sqrt(win_P * win_D)
    literal = np.sqrt((times[i1] - times[i0]) * total_D)
    allowance = grid.spacing * perim[i0]
    return {"lhs": lhs, "rhs": float(rhs), "literal_rhs": float(literal),
            "allowance": float(allowance),
            "passed": bool(lhs <= rhs * (1 + slack) + allowance),
            "literal_passed": bool(lhs <= literal * (1 + slack) + allowance)}


# --- relabeling -------------------------------------------------------------------

@dataclass(frozen=True)
class TanhRelabel:
    """``Phi(s) = s + a tanh(b s)``; ``a b > -1`` keeps ``Phi' > 0``."""

    a: float = 0.3
    b: float = 1.0

    def __post_init__(self):
        if not self.a * self.b > -1.0:
            raise SpecError("TanhRelabel needs a*b > -1 for a monotone profile")

    def __call__(self, s):
        return s + self.a * np.tanh(self.b * s)

    def deriv(self, s):
        return 1.0 + self.a * self.b / np.cosh(self.b * s) ** 2


@dataclass(frozen=True)
class AffineRelabel:
    slope: float = 2.0
    shift: float = 1.0

    def __post_init__(self):
        if not self.slope > 0:
            raise SpecError("affine relabeling needs a positive slope")

    def __call__(self, s):
        return self.slope * s + self.shift

    def deriv(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.slope)


def _relabeled(g, phi):
    return ScalarField(g.grid, phi(g.values), f"phi({g.name})")


def _sup_deviation(a, b, phi):
    return max(float(np.max(np.abs(ub.values - phi(ua.values))))
               for ua, ub in zip(a.snapshots, b.snapshots))


def epsilon_ladder(grid, factors=(4, 2, 1)):
    return [f * grid.spacing for f in factors]


def relabel_compare(g, phi, params, epsilons=None, base_runs=None):
    """``sup |u_{Phi(g)} - Phi(u_g)|`` over grid and snapshots, per epsilon.

    Both runs share every solver parameter.  ``base_runs`` may map epsilons to
    already computed trajectories from ``g``.  Returns ``{epsilon: deviation}``.
    """
    epsilons = [params.epsilon] if epsilons is None else list(epsilons)
    base_runs = base_runs or {}
    g2 = _relabeled(g, phi)
    out = {}
    for eps in epsilons:
        p = params.with_epsilon(eps)
        base = base_runs.get(eps) or run(g, p)
        out[eps] = _sup_deviation(base, run(g2, p), phi)
    return out


def affine_rescaling_deviation(g, params, relabel=AffineRelabel()):
    """Deviation between ``Phi(u_g)`` at ``eps`` and ``u_{Phi(g)}`` at ``slope * eps``.

    The regularized equation is invariant under ``u -> a u + b, eps -> a eps``,
    so this is zero up to rounding.
    """
    base = run(g, params)
    scaled = run(_relabeled(g, relabel), params.with_epsilon(relabel.slope * params.epsilon))
    return _sup_deviation(base, scaled, relabel)


def comparison_gap(traj_low, traj_high):
    """``max (u_low - u_high)`` over all shared snapshots."""
    if len(traj_low) != len(traj_high):
        raise SpecError("trajectories must share their snapshot times")
    return max(float(np.max(a.values - b.values))
               for a, b in zip(traj_low.snapshots, traj_high.snapshots))
