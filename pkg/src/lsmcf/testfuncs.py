"""Compactly supported space-time test functions with closed-form derivatives.

A scalar test function is ``zeta(x, t) = amplitude * b(|x - c| / r) * tau(t)``
with ``b = 1 - smoothstep`` on [0, 1].  ``tau`` is either a bump supported in
``[t_a, t_b]`` or, for identities that carry an initial-time term, equal to one
up to ``t_a`` and decaying to zero at ``t_b``.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import SpecError
from .initial_data import smoothstep, smoothstep_deriv


@dataclass(frozen=True)
class TestScalar:
    __test__ = False  # not a pytest class

    center: tuple
    radius: float
    time_window: tuple
    amplitude: float = 1.0
    from_initial: bool = False
    label: str = ""

    def __post_init__(self):
        ta, tb = self.time_window
        if not self.radius > 0:
            raise SpecError("test function radius must be positive")
        if not (0 <= ta < tb):
            raise SpecError(f"bad time window {self.time_window}")

    def scaled(self, factor):
        return replace(self, amplitude=self.amplitude * factor)

    # space -----------------------------------------------------------------
    def _rho(self, coords):
        diff = [x - c for x, c in zip(coords, self.center)]
        dist = np.sqrt(sum(d * d for d in diff))
        return diff, dist

    def space(self, coords):
        _, dist = self._rho(coords)
        return 1.0 - smoothstep(dist / self.radius)

    def space_grad(self, coords):
        diff, dist = self._rho(coords)
        db = -smoothstep_deriv(dist / self.radius) / self.radius
        safe = np.where(dist > 0, dist, 1.0)
        return [db * d / safe for d in diff]

    # time ------------------------------------------------------------------
    def time(self, t):
        ta, tb = self.time_window
        if self.from_initial:
            return 1.0 - float(smoothstep((t - ta) / (tb - ta)))
        mid, half = 0.5 * (ta + tb), 0.5 * (tb - ta)
        return 1.0 - float(smoothstep(abs(t - mid) / half))

    def time_deriv(self, t):
        ta, tb = self.time_window
        if self.from_initial:
            return -float(smoothstep_deriv((t - ta) / (tb - ta))) / (tb - ta)
        mid, half = 0.5 * (ta + tb), 0.5 * (tb - ta)
        return -float(smoothstep_deriv(abs(t - mid) / half)) / half * np.sign(t - mid)

    # combined ----------------------------------------------------------------
    def value(self, coords, t):
        return self.amplitude * self.time(t) * self.space(coords)

    def dt(self, coords, t):
        return self.amplitude * self.time_deriv(t) * self.space(coords)

    def grad(self, coords, t):
        a = self.amplitude * self.time(t)
        return [a * g for g in self.space_grad(coords)]

    def active(self, t):
        return self.time(t) != 0.0 or self.time_deriv(t) != 0.0


@dataclass(frozen=True)
class TestVector:
    """``xi = zeta * e_axis`` or, with ``axis=None``, ``xi = (x - c) * zeta``."""

    __test__ = False

    base: TestScalar
    axis: Optional[int] = 0
    label: str = ""

    def scaled(self, factor):
        return replace(self, base=self.base.scaled(factor))

    def value(self, coords, t):
        z = self.base.value(coords, t)
        if self.axis is None:
            return [(x - c) * z for x, c in zip(coords, self.base.center)]
        return [z if k == self.axis else np.zeros_like(z) for k in range(len(coords))]

    def tangential_divergence(self, coords, t, nu):
        """``div xi - nu . (grad xi) nu`` for the given normal components."""
        z = self.base.value(coords, t)
        gz = self.base.grad(coords, t)
        g_dot_nu = sum(g * n for g, n in zip(gz, nu))
        if self.axis is None:
            diff = [x - c for x, c in zip(coords, self.base.center)]
            d = len(coords)
            div = d * z + sum(a * g for a, g in zip(diff, gz))
            nu_sq = sum(n * n for n in nu)
            return div - (z * nu_sq + sum(a * n for a, n in zip(diff, nu)) * g_dot_nu)
        return gz[self.axis] - nu[self.axis] * g_dot_nu

    def dot(self, coords, t, vec):
        return sum(a * b for a, b in zip(self.value(coords, t), vec))

    def active(self, t):
        return self.base.active(t)


def _aligned_axis(direction, forbidden=()):
    order = np.argsort(-np.abs(direction))
    for k in order:
        if int(k) not in forbidden:
            return int(k)
    return int(order[0])


def circle_family(center, radius, count=5, test_radius=0.15, window=(0.01, 0.05),
                  seed=None, from_initial=False, neumann_half_width=None, arc=None):
    """Scalar and vector bumps straddling a circle around ``center``.

    With ``seed=None`` the centres sit at angles ``2 pi k / count``, or evenly
    over the closed interval ``arc`` when given; otherwise angles (within
    ``arc``), radii and windows are drawn from ``numpy.random.default_rng(seed)``.
    Vector fields point along the axis most aligned with the circle normal.
    If ``neumann_half_width`` is given, axes normal to any box face that a
    support touches are excluded so that ``xi . n = 0`` on the boundary.
    """
    center = np.asarray(center, dtype=float)
    rng = None if seed is None else np.random.default_rng(seed)
    scalars, vectors = [], []
    if arc is None:
        fixed = 2.0 * np.pi * np.arange(count) / count
        lo, hi = 0.0, 2.0 * np.pi
    else:
        fixed = np.linspace(arc[0], arc[1], count)
        lo, hi = arc
    for k in range(count):
        if rng is None:
            angle, rad, win = fixed[k], test_radius, tuple(window)
        else:
            angle = rng.uniform(lo, hi)
            rad = rng.uniform(0.67, 1.33) * test_radius
            a = rng.uniform(window[0], 0.5 * (window[0] + window[1]))
            b = rng.uniform(0.5 * (window[0] + window[1]), window[1])
            win = (a, b)
        normal = np.zeros_like(center)
        normal[0], normal[1] = np.cos(angle), np.sin(angle)
        c = center + radius * normal
        forbidden = ()
        if neumann_half_width is not None:
            L = neumann_half_width
            c = np.clip(c, -L, L)
            forbidden = tuple(i for i in range(len(c)) if abs(c[i]) + rad > L)
        label = f"k{k}"
        zeta = TestScalar(tuple(c), rad, win, from_initial=from_initial, label=label)
        scalars.append(zeta)
        vectors.append(TestVector(replace(zeta, from_initial=False),
                                  _aligned_axis(normal, forbidden), label=label))
    return scalars, vectors
