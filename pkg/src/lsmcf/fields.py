"""Uniform Cartesian grids, sampled fields and the discrete calculus on them.

Arrays are stored with shape ``(n,) * d`` and ``indexing='ij'``, so axis ``k``
is the ``k``-th coordinate direction.  Flattening with ``ravel()`` gives the
row-major layout used by the binary snapshot format: the flat index of node
``(i_0, ..., i_{d-1})`` is ``sum_k i_k * n**(d-1-k)``.

Boundary handling is done with one layer of ghost values:

* ``FarFieldConstant``: quadratic extrapolation ``g = 3 a_0 - 3 a_1 + a_2``.
  The central difference through that ghost is the one-sided second-order
  formula ``(-3 a_0 + 4 a_1 - a_2) / 2h``.
* ``NeumannBox``: even reflection ``a_{-1} = a_1`` for scalars, so the normal
  derivative is exactly zero on the faces.  Vector components normal to a face
  are reflected oddly (the even extension of a scalar has an odd normal
  gradient), which makes the discrete flux through the face vanish.
"""

import enum
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import SpecError


class BoundaryRegime(str, enum.Enum):
    FAR_FIELD_CONSTANT = "FarFieldConstant"
    NEUMANN_BOX = "NeumannBox"


@dataclass(frozen=True)
class GridSpec:
    """The box ``[-L, L]^d`` sampled with ``n`` nodes per axis."""

    dimension: int
    half_width: float
    points_per_axis: int
    boundary_regime: BoundaryRegime = BoundaryRegime.FAR_FIELD_CONSTANT

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise SpecError(f"dimension must be 2 or 3, got {self.dimension}")
        if not self.half_width > 0:
            raise SpecError(f"half_width must be positive, got {self.half_width}")
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < 16:
            raise SpecError(f"points_per_axis must be an integer >= 16, got {self.points_per_axis}")
        object.__setattr__(self, "boundary_regime", BoundaryRegime(self.boundary_regime))

    @property
    def n(self):
        return self.points_per_axis

    @property
    def spacing(self):
        return 2.0 * self.half_width / (self.points_per_axis - 1)

    h = spacing

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self):
        return self.points_per_axis ** self.dimension

    @property
    def box_volume(self):
        return (2.0 * self.half_width) ** self.dimension

    @property
    def neumann(self):
        return self.boundary_regime is BoundaryRegime.NEUMANN_BOX

    @cached_property
    def axis(self):
        return np.linspace(-self.half_width, self.half_width, self.points_per_axis)

    @cached_property
    def coords(self):
        """Tuple of coordinate arrays, one per axis."""
        mesh = np.meshgrid(*([self.axis] * self.dimension), indexing="ij")
        for m in mesh:
            m.flags.writeable = False
        return tuple(mesh)

    @cached_property
    def quadrature_weights(self):
        """Trapezoid weights: interior nodes get h^d, faces/edges/corners a fraction."""
        w1 = np.full(self.points_per_axis, self.spacing)
        w1[0] = w1[-1] = 0.5 * self.spacing
        w = w1
        for _ in range(self.dimension - 1):
            w = np.multiply.outer(w, w1)
        w.flags.writeable = False
        return w

    @cached_property
    def faces(self):
        mask = self.face_mask()
        mask.flags.writeable = False
        return mask

    def face_mask(self, width=1):
        """Boolean mask of nodes within ``width`` layers of the box faces."""
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.dimension):
            sl = [slice(None)] * self.dimension
            sl[k] = slice(0, width)
            mask[tuple(sl)] = True
            sl[k] = slice(self.points_per_axis - width, None)
            mask[tuple(sl)] = True
        return mask

    def scalar(self, values, name=""):
        return ScalarField(self, values, name)

    def from_function(self, func, name=""):
        return ScalarField(self, np.broadcast_to(func(*self.coords), self.shape), name)

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "half_width": self.half_width,
            "points_per_axis": self.points_per_axis,
            "boundary_regime": self.boundary_regime.value,
        }


def _frozen(values, shape):
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.shape != shape:
        if arr.size == int(np.prod(shape)):
            arr = arr.reshape(shape)
        else:
            raise SpecError(f"expected {int(np.prod(shape))} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise SpecError("field samples must be finite")
    arr.flags.writeable = False
    return arr


class ScalarField:
    """Real samples on every node of a grid.  Immutable."""

    __slots__ = ("grid", "values", "name")

    def __init__(self, grid, values, name=""):
        self.grid = grid
        self.values = _frozen(values, grid.shape)
        self.name = name

    def __repr__(self):
        return f"ScalarField({self.name or '?'}, n={self.grid.n}, d={self.grid.dimension})"

    @property
    def flat(self):
        return self.values.ravel()

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))

    def map(self, func, name=""):
        return ScalarField(self.grid, func(self.values), name)


class VectorField:
    """``d`` component arrays on a grid.  Immutable."""

    __slots__ = ("grid", "components", "name")

    def __init__(self, grid, components, name=""):
        if len(components) != grid.dimension:
            raise SpecError(
                f"vector field needs {grid.dimension} components, got {len(components)}"
            )
        self.grid = grid
        self.components = tuple(_frozen(c, grid.shape) for c in components)
        self.name = name

    def __repr__(self):
        return f"VectorField({self.name or '?'}, n={self.grid.n}, d={self.grid.dimension})"

    def norm(self):
        return np.sqrt(sum(c * c for c in self.components))

    def dot(self, other):
        return sum(a * b for a, b in zip(self.components, other.components))


# --- ghost layers -----------------------------------------------------------

def _ghost_axis(a, axis, kind):
    """Pad ``a`` by one ghost node on both ends of ``axis``."""
    first = np.take(a, [0, 1, 2], axis=axis)
    last = np.take(a, [-1, -2, -3], axis=axis)
    lo0, lo1, lo2 = (np.take(first, [i], axis=axis) for i in range(3))
    hi0, hi1, hi2 = (np.take(last, [i], axis=axis) for i in range(3))
    if kind == "extrap":
        lo = 3.0 * lo0 - 3.0 * lo1 + lo2
        hi = 3.0 * hi0 - 3.0 * hi1 + hi2
    elif kind == "even":
        lo, hi = lo1, hi1
    elif kind == "odd":
        lo, hi = 2.0 * lo0 - lo1, 2.0 * hi0 - hi1
    else:  # pragma: no cover
        raise ValueError(kind)
    return np.concatenate([lo, a, hi], axis=axis)


def _scalar_kind(grid):
    return "even" if grid.neumann else "extrap"


def _padded(a, grid, axes):
    kind = _scalar_kind(grid)
    for ax in axes:
        a = _ghost_axis(a, ax, kind)
    return a


def _central(a, axis, h, kind, d):
    p = _ghost_axis(a, axis, kind)
    sl_p = [slice(None)] * d
    sl_m = [slice(None)] * d
    sl_p[axis] = slice(2, None)
    sl_m[axis] = slice(0, -2)
    return (p[tuple(sl_p)] - p[tuple(sl_m)]) / (2.0 * h)


# --- discrete calculus ------------------------------------------------------

def gradient_arrays(values, grid):
    kind = _scalar_kind(grid)
    return tuple(_central(values, k, grid.spacing, kind, grid.dimension)
                 for k in range(grid.dimension))


def gradient(f):
    """Second-order central gradient with the grid's ghost policy."""
    return VectorField(f.grid, gradient_arrays(f.values, f.grid), f"grad({f.name})")


def _offset(p, offsets, d):
    sl = tuple(slice(1 + o, p.shape[k] - 1 + o) for k, o in enumerate(offsets))
    return p[sl]


def derivative_arrays(values, grid):
    """Gradient and upper-triangle Hessian from a single ghost-padded copy.

    Returns ``(grads, hess)`` with ``hess`` keyed by ``(i, j)``, ``i <= j``.
    """
    d = grid.dimension
    h = grid.spacing
    p = _padded(values, grid, range(d))

    def at(shift):
        off = [0] * d
        for k, o in shift:
            off[k] = o
        return _offset(p, off, d)

    grads, hess = [], {}
    for i in range(d):
        plus, minus = at([(i, 1)]), at([(i, -1)])
        grads.append((plus - minus) / (2.0 * h))
        hess[(i, i)] = (plus - 2.0 * values + minus) / (h * h)
    for i in range(d):
        for j in range(i + 1, d):
            cross = (at([(i, 1), (j, 1)]) - at([(i, 1), (j, -1)])
                     - at([(i, -1), (j, 1)]) + at([(i, -1), (j, -1)]))
            hess[(i, j)] = cross / (4.0 * h * h)
    return tuple(grads), hess


def hessian_arrays(values, grid):
    """Upper-triangle Hessian entries keyed by ``(i, j)``, ``i <= j``."""
    return derivative_arrays(values, grid)[1]


def hessian(f):
    """Symmetric Hessian as a dict ``{(i, j): ScalarField}`` for ``i <= j``."""
    return {k: ScalarField(f.grid, v, f"d{k[0]}d{k[1]}({f.name})")
            for k, v in hessian_arrays(f.values, f.grid).items()}


def divergence_arrays(components, grid):
    kind = "odd" if grid.neumann else "extrap"
    return sum(_central(c, k, grid.spacing, kind, grid.dimension)
               for k, c in enumerate(components))


def divergence(v):
    """Sum of central differences of each component along its own axis."""
    return ScalarField(v.grid, divergence_arrays(v.components, v.grid), f"div({v.name})")


def integrate(f, weight=None):
    """Trapezoid-weighted sum over the box, optionally times ``weight``."""
    values = f.values if isinstance(f, ScalarField) else np.asarray(f)
    grid = f.grid if isinstance(f, ScalarField) else weight.grid
    if weight is not None:
        wv = weight.values if isinstance(weight, ScalarField) else np.asarray(weight)
        values = values * wv
    return float(np.sum(values * grid.quadrature_weights))


def integrate_array(values, grid):
    return float(np.sum(values * grid.quadrature_weights))


# --- snapshot persistence ---------------------------------------------------

def write_snapshot(path, field, time=0.0, epsilon=None):
    """Write ``<path>.bin`` (little-endian float64, row-major) and ``<path>.json``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    field.values.astype("<f8").ravel(order="C").tofile(path.with_suffix(".bin"))
    meta = {
        "dimension": field.grid.dimension,
        "n": field.grid.n,
        "half_width": field.grid.half_width,
        "time": float(time),
        "epsilon": None if epsilon is None else float(epsilon),
        "name": field.name,
        "boundary_regime": field.grid.boundary_regime.value,
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns ``(field, metadata)``."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = GridSpec(
        meta["dimension"], meta["half_width"], meta["n"],
        meta.get("boundary_regime", BoundaryRegime.FAR_FIELD_CONSTANT.value),
    )
    raw = np.fromfile(path.with_suffix(".bin"), dtype="<f8")
    return ScalarField(grid, raw.reshape(grid.shape), meta.get("name", "")), meta
