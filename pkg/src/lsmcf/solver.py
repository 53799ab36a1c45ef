"""Explicit time stepping for the eps-regularized level set equation

    u_t = Laplace(u) - (grad u . Hess(u) grad u) / (|grad u|^2 + eps^2)
        = -H_eps * sqrt(|grad u|^2 + eps^2),   H_eps = div(nu_eps),
    nu_eps = -grad u / sqrt(|grad u|^2 + eps^2).

Steps use the Hessian form; H_eps for diagnostics uses the divergence form.
Cost is O(n^d) per step with O(n^2) steps, i.e. O(n^4) for a 2D run.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BlowupError, SpecError
from .fields import (ScalarField, VectorField, derivative_arrays, divergence_arrays,
                     gradient_arrays, integrate_array)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverParams:
    epsilon: float
    t_end: float
    dt_safety: float = 0.5
    snapshot_interval: Optional[float] = None  # None: every 10 steps

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise SpecError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0 < self.dt_safety <= 1:
            raise SpecError(f"dt_safety must lie in (0, 1], got {self.dt_safety}")
        if self.t_end < 0:
            raise SpecError("t_end must be non-negative")
        if self.snapshot_interval is not None and not self.snapshot_interval > 0:
            raise SpecError("snapshot_interval must be positive")

    def stepping(self, grid):
        """Return ``(dt, steps_per_snapshot, n_steps)`` for ``grid``.

        ``dt <= dt_safety * h^2 / (2d)`` and is shrunk so that the snapshot
        interval is an integer number of steps.
        """
        dt_max = self.dt_safety * grid.spacing ** 2 / (2 * grid.dimension)
        if self.snapshot_interval is None:
            dt, every = dt_max, 10
        else:
            every = max(1, math.ceil(self.snapshot_interval / dt_max * (1 - 1e-12)))
            dt = self.snapshot_interval / every
        n_steps = math.ceil(self.t_end / dt * (1 - 1e-12)) if self.t_end > 0 else 0
        return dt, every, n_steps

    def with_epsilon(self, epsilon):
        return SolverParams(epsilon, self.t_end, self.dt_safety, self.snapshot_interval)


def _speed(grads, eps):
    return np.sqrt(sum(c * c for c in grads) + eps * eps)


def _rhs_hessian(values, grid, eps):
    grads, hess = derivative_arrays(values, grid)
    d = grid.dimension
    lap = sum(hess[(i, i)] for i in range(d))
    quad = sum(grads[i] * grads[i] * hess[(i, i)] for i in range(d))
    for i in range(d):
        for j in range(i + 1, d):
            quad = quad + 2.0 * grads[i] * grads[j] * hess[(i, j)]
    return lap - quad / (sum(c * c for c in grads) + eps * eps)


def _curvature(grads, grid, eps):
    speed = _speed(grads, eps)
    nu = [-c / speed for c in grads]
    return divergence_arrays(nu, grid), nu, speed


def rhs_hessian_form(u, epsilon):
    """Pointwise ``Lap u - grad u . Hess u grad u / (|grad u|^2 + eps^2)``."""
    return ScalarField(u.grid, _rhs_hessian(u.values, u.grid, epsilon), "u_t")


def approximate_normal(u, epsilon):
    grads = gradient_arrays(u.values, u.grid)
    speed = _speed(grads, epsilon)
    return VectorField(u.grid, [-c / speed for c in grads], "nu_eps")


def approximate_curvature(u, epsilon):
    """``H_eps = div(nu_eps)``."""
    H, _, _ = _curvature(gradient_arrays(u.values, u.grid), u.grid, epsilon)
    return ScalarField(u.grid, H, "H_eps")


def rhs_divergence_form(u, epsilon):
    """``-H_eps * sqrt(|grad u|^2 + eps^2)``."""
    H, _, speed = _curvature(gradient_arrays(u.values, u.grid), u.grid, epsilon)
    return ScalarField(u.grid, -H * speed, "u_t_div")


def _advance(values, grid, dt, eps):
    new = values + dt * _rhs_hessian(values, grid, eps)
    if not grid.neumann:
        new[grid.faces] = values[grid.faces]
    return new


def step(u, params, dt=None):
    """One explicit Euler step.

    Under ``FarFieldConstant`` the face values are held at their current
    (frozen far-field) values; under ``NeumannBox`` the ghosts already carry
    the boundary condition.
    """
    grid = u.grid
    if dt is None:
        dt = params.stepping(grid)[0]
    new = _advance(u.values, grid, dt, params.epsilon)
    if not np.all(np.isfinite(new)):
        raise BlowupError("non-finite values after step")
    if np.max(np.abs(new)) > 2.0 * max(u.sup_norm(), np.finfo(float).tiny):
        raise BlowupError("sup-norm more than doubled in one step")
    return ScalarField(grid, new, u.name)


@dataclass
class SnapshotFields:
    """Derived quantities of one snapshot."""

    time: float
    u: ScalarField
    grad: tuple
    grad_norm: np.ndarray
    speed: np.ndarray      # sqrt(|grad u|^2 + eps^2)
    nu: tuple              # nu_eps
    curvature: np.ndarray  # H_eps, divergence form
    u_t: np.ndarray        # Hessian-form right-hand side


def snapshot_fields(u, epsilon, time=0.0):
    grads = gradient_arrays(u.values, u.grid)
    H, nu, speed = _curvature(grads, u.grid, epsilon)
    return SnapshotFields(
        time=time, u=u, grad=grads, grad_norm=np.sqrt(sum(c * c for c in grads)),
        speed=speed, nu=tuple(nu), curvature=H,
        u_t=_rhs_hessian(u.values, u.grid, epsilon),
    )


@dataclass
class EnergyLog:
    """Per-step record of ``E_eps`` and its dissipation rate."""

    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)       # integral sqrt(|grad u|^2 + eps^2)
    dissipation: list = field(default_factory=list)  # integral H_eps^2 sqrt(...)

    def record(self, t, values, grid, eps):
        grads = gradient_arrays(values, grid)
        H, _, speed = _curvature(grads, grid, eps)
        self.times.append(t)
        self.energy.append(integrate_array(speed, grid))
        self.dissipation.append(integrate_array(H * H * speed, grid))

    def as_arrays(self):
        return np.array(self.times), np.array(self.energy), np.array(self.dissipation)


@dataclass
class Trajectory:
    grid: object
    params: SolverParams
    initial: ScalarField
    times: list
    snapshots: list
    dt: float
    energy_log: Optional[EnergyLog] = None

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(zip(self.times, self.snapshots))

    @property
    def epsilon(self):
        return self.params.epsilon

    def fields(self, i):
        return snapshot_fields(self.snapshots[i], self.epsilon, self.times[i])

    def iter_fields(self):
        for i in range(len(self.snapshots)):
            yield self.fields(i)

    def index_of(self, t, atol=None):
        """Index of the snapshot at time ``t`` (nearest within half a step)."""
        times = np.asarray(self.times)
        i = int(np.argmin(np.abs(times - t)))
        atol = 0.5 * self.dt if atol is None else atol
        if abs(times[i] - t) > atol + 1e-12:
            raise SpecError(f"no snapshot at t={t}")
        return i

    def at(self, t):
        return self.snapshots[self.index_of(t)]


def run(g, params, track_energy=False):
    """Integrate from ``g`` to ``params.t_end``, keeping snapshots at the configured cadence."""
    grid = g.grid
    dt, every, n_steps = params.stepping(grid)
    eps = params.epsilon
    bound = 2.0 * g.sup_norm() if g.sup_norm() > 0 else np.inf
    values = np.array(g.values, dtype=float)
    times, snaps = [0.0], [g]
    elog = EnergyLog() if track_energy else None
    if elog is not None:
        elog.record(0.0, values, grid, eps)
    log.debug("run: n=%d eps=%.4g dt=%.3g steps=%d", grid.n, eps, dt, n_steps)
    for k in range(1, n_steps + 1):
        values = _advance(values, grid, dt, eps)
        t = k * dt
        if k % every == 0 or k == n_steps:
            if not np.all(np.isfinite(values)):
                raise BlowupError(f"non-finite values at t={t:.6g}", time=t)
            if np.max(np.abs(values)) > bound:
                raise BlowupError(f"sup-norm exceeded twice the initial value at t={t:.6g}", time=t)
            times.append(t)
            snaps.append(ScalarField(grid, values, "u_eps"))
        if elog is not None:
            elog.record(t, values, grid, eps)
    return Trajectory(grid, params, g, times, snaps, dt, elog)
