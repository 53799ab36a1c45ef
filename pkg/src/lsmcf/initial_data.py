"""Well-prepared initial data: smooth radial bumps that are constant far away.

The radial profile ``psi`` is built from its slope.  ``-psi'`` is a C2 plateau
made of two quintic smoothstep ramps of width ``blend`` around a flat top of
height one, placed symmetrically about ``inner_radius``.  Hence ``psi`` is C3,
non-increasing, equals ``cap`` near the centre, crosses zero at
``inner_radius`` with slope -1, and equals ``-cap`` for

    r >= inner_radius + cap + blend / 2        (the support radius).

Between the ramps ``psi(r) = inner_radius - r`` exactly, so every level in
``(-cap + blend/2, cap - blend/2)`` is a sphere of radius ``inner_radius - s``.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from .errors import CertificationFailure, SpecError
from .fields import ScalarField, divergence_arrays, gradient_arrays, integrate_array


def smoothstep(t):
    """Quintic smoothstep, clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smoothstep_deriv(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (t - 1.0) ** 2, 0.0)


def _smoothstep_antideriv(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (t * (t - 3.0) + 2.5)


@dataclass(frozen=True)
class RadialProfile:
    inner_radius: float
    cap: float
    blend: float

    def __post_init__(self):
        if not (self.cap > 0 and self.blend > 0 and self.inner_radius > 0):
            raise SpecError("inner_radius, cap and blend must be positive")
        if self.blend > 2.0 * self.cap:
            raise SpecError("blend must not exceed twice the cap")
        if self.ramp_start <= 0.0:
            raise SpecError(
                f"profile needs inner_radius > cap + blend/2 "
                f"({self.inner_radius} <= {self.cap + self.blend / 2})"
            )

    @property
    def ramp_start(self):
        return self.inner_radius - self.cap - 0.5 * self.blend

    @property
    def support_radius(self):
        return self.inner_radius + self.cap + 0.5 * self.blend

    def slope_weight(self, r):
        """``-psi'(r)``, in [0, 1]."""
        r = np.asarray(r, dtype=float)
        r1, r2, b = self.ramp_start, self.support_radius, self.blend
        return np.minimum(smoothstep((r - r1) / b), smoothstep((r2 - r) / b))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        r1, r2, b = self.ramp_start, self.support_radius, self.blend
        rise = b * _smoothstep_antideriv((r - r1) / b)
        flat = np.clip(r - r1 - b, 0.0, r2 - r1 - 2.0 * b)
        fall = b * (0.5 - _smoothstep_antideriv((r2 - r) / b))
        fall = np.where(r > r2 - b, fall, 0.0)
        out = self.cap - (rise + flat + fall)
        # exact plateaus, so that the far field is bit-for-bit constant
        return np.where(r >= r2, -self.cap, np.where(r <= r1, self.cap, out))

    def deriv(self, r):
        return -self.slope_weight(r)

    def second_deriv(self, r):
        r = np.asarray(r, dtype=float)
        r1, r2, b = self.ramp_start, self.support_radius, self.blend
        rising = smoothstep_deriv((r - r1) / b) / b
        falling = -smoothstep_deriv((r2 - r) / b) / b
        return -np.where(r < 0.5 * (r1 + r2), rising, falling)

    def radius_of_level(self, value):
        """Radius where the profile takes ``value`` (open interval (-cap, cap))."""
        if not -self.cap < value < self.cap:
            raise SpecError(f"level {value} outside the open profile range")
        if abs(value) <= self.cap - 0.5 * self.blend:
            return self.inner_radius - value
        return brentq(lambda r: float(self(r)) - value, self.ramp_start, self.support_radius,
                      xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class RadialBump:
    center: tuple
    inner_radius: float
    cap: float
    blend: Optional[float] = None

    @property
    def profile(self):
        blend = 0.5 * self.cap if self.blend is None else self.blend
        return RadialProfile(self.inner_radius, self.cap, blend)


@dataclass(frozen=True)
class NeumannHalfBump(RadialBump):
    """A radial bump whose centre sits on a box face."""


@dataclass(frozen=True)
class TwoBumps:
    first: RadialBump
    second: RadialBump


@dataclass(frozen=True)
class Constant:
    """Spatially constant data (stationary runs)."""


Shape = Union[RadialBump, NeumannHalfBump, TwoBumps, Constant]


@dataclass(frozen=True)
class InitialDataSpec:
    """Preset geometry plus ``level_offset``.

    Radial bumps take the value ``level_offset + cap`` at the centre,
    ``level_offset`` on the sphere of radius ``inner_radius`` and the far-field
    constant ``level_offset - cap`` outside the support radius.
    """

    shape: Shape = field(default_factory=Constant)
    level_offset: float = 0.0

    @property
    def cap(self):
        if isinstance(self.shape, TwoBumps):
            return self.shape.first.cap
        if isinstance(self.shape, Constant):
            return 0.0
        return self.shape.cap

    @property
    def far_field_value(self):
        return self.level_offset - self.cap

    def bumps(self):
        if isinstance(self.shape, TwoBumps):
            return [self.shape.first, self.shape.second]
        if isinstance(self.shape, Constant):
            return []
        return [self.shape]

    def level_band(self, margin=None):
        """Open level interval ``(c - cap + margin, c + cap - margin)``.

        The default margin ``blend/2 + cap/20`` keeps every level inside the
        zone where the profile is exactly linear (unit gradient).
        """
        if margin is None:
            blend = max((b.profile.blend for b in self.bumps()), default=0.0)
            margin = 0.5 * blend + 0.05 * self.cap
        return (self.level_offset - self.cap + margin, self.level_offset + self.cap - margin)

    def level_radius(self, s):
        """Initial radius of the level set ``{g = s}`` around the first bump centre."""
        return self.bumps()[0].profile.radius_of_level(s - self.level_offset)


def check_margin(spec, grid):
    L = grid.half_width
    margin = L / 3.0
    for bump in spec.bumps():
        centre = np.asarray(bump.center, dtype=float)
        if centre.shape != (grid.dimension,):
            raise SpecError(f"centre {bump.center} does not match dimension {grid.dimension}")
        R = bump.profile.support_radius
        on_face = np.isclose(np.abs(centre), L, atol=1e-12 * L)
        if isinstance(bump, NeumannHalfBump):
            if not grid.neumann:
                raise SpecError("NeumannHalfBump requires the NeumannBox regime")
            if on_face.sum() != 1:
                raise SpecError("NeumannHalfBump centre must lie on exactly one box face")
        for k in range(grid.dimension):
            if isinstance(bump, NeumannHalfBump) and on_face[k]:
                if R > 2 * L - margin:
                    raise SpecError(f"support radius {R:.4g} reaches the opposite face margin")
                continue
            if abs(centre[k]) + R > L - margin + 1e-12:
                raise SpecError(
                    f"bump support (radius {R:.4g}) violates the {margin:.4g} face margin"
                )
    if isinstance(spec.shape, TwoBumps):
        a, b = spec.shape.first, spec.shape.second
        if not np.isclose(a.cap, b.cap):
            raise SpecError("TwoBumps requires equal caps")
        gap = np.linalg.norm(np.subtract(a.center, b.center))
        if gap <= a.profile.support_radius + b.profile.support_radius:
            raise SpecError("TwoBumps supports overlap")


def build(spec, grid):
    """Sample the initial data on ``grid``; raises :class:`SpecError` on margin violations."""
    check_margin(spec, grid)
    values = np.full(grid.shape, spec.far_field_value)
    for bump in spec.bumps():
        r = np.sqrt(sum((x - c) ** 2 for x, c in zip(grid.coords, bump.center)))
        values = values + (bump.profile(r) + bump.cap)
    return ScalarField(grid, values, "g")


def default_epsilon_ladder(grid):
    """``1, 1/2, 1/4, ...`` down to ``max(h, 1/64)``."""
    floor = max(grid.spacing, 1.0 / 64.0)
    ladder = [1.0]
    while ladder[-1] / 2.0 >= floor:
        ladder.append(ladder[-1] / 2.0)
    return ladder


def approximate_curvature_mass(g, epsilon):
    """``integral |div(grad g / sqrt(|grad g|^2 + eps^2))| dx``."""
    grads = gradient_arrays(g.values, g.grid)
    speed = np.sqrt(sum(c * c for c in grads) + epsilon * epsilon)
    div = divergence_arrays([c / speed for c in grads], g.grid)
    return integrate_array(np.abs(div), g.grid)


@dataclass
class CertificationReport:
    epsilons: list
    masses: list
    growth: float
    max_growth: float

    @property
    def max_mass(self):
        return max(self.masses) if self.masses else 0.0

    @property
    def passed(self):
        return self.growth <= self.max_growth


def certify_well_prepared(g, epsilons=None, max_growth=3.0, raise_on_failure=True):
    """Check that the approximate mean curvature mass stays bounded as eps decreases.

    ``growth`` is the largest mass over the ladder divided by the mass at the
    largest epsilon.  Constant data has zero mass and passes trivially.
    """
    grid = g.grid
    epsilons = default_epsilon_ladder(grid) if epsilons is None else list(epsilons)
    if any(not 0 < e <= 1 for e in epsilons):
        raise SpecError("epsilons must lie in (0, 1]")
    if sorted(epsilons, reverse=True) != epsilons:
        raise SpecError("epsilons must be sorted in descending order")
    if min(epsilons) < grid.spacing / 4:
        raise SpecError("smallest epsilon must be at least h/4")
    masses = [approximate_curvature_mass(g, e) for e in epsilons]
    tiny = 1e-12 * max(1.0, grid.box_volume)
    growth = 1.0 if masses[0] <= tiny else max(masses) / masses[0]
    report = CertificationReport(epsilons, masses, growth, max_growth)
    if raise_on_failure and not report.passed:
        raise CertificationFailure(
            f"approximate curvature mass grew by {growth:.3g}x (limit {max_growth}x)"
        )
    return report
