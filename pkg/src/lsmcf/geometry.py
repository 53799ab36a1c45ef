"""Level sets, super-level volumes and perimeter estimates on grid data.

Cells are indexed by their lower-left node ``(i, j)``.  Corners run
counter-clockwise ``c0=(i,j), c1=(i+1,j), c2=(i+1,j+1), c3=(i,j+1)`` and edge
``e_k`` joins ``c_k`` to ``c_{k+1}``.  A corner is *inside* when ``u > s``.

Saddle cells (inside corners on one diagonal) are resolved by the cell
average: if the mean of the four corners exceeds ``s`` the inside corners are
connected through the centre.  Contours and cell area fractions use the same
rule, so the area fractions are exactly the areas cut out by the contour.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLevelSet, SpecError
from .fields import ScalarField, VectorField, gradient_arrays


def velocity_field(u_t, grad_u, cutoff):
    """``V = u_t / |grad u|`` where ``|grad u| >= cutoff``, zero elsewhere."""
    if not cutoff > 0:
        raise SpecError("cutoff must be positive")
    ut = u_t.values if isinstance(u_t, ScalarField) else np.asarray(u_t)
    comps = grad_u.components if isinstance(grad_u, VectorField) else grad_u
    norm = np.sqrt(sum(c * c for c in comps))
    active = norm >= cutoff
    V = np.zeros_like(ut)
    np.divide(ut, norm, out=V, where=active)
    return V


# --- cell corner bookkeeping ------------------------------------------------

def _corners(values):
    """Corner values ``(4, n-1, n-1)`` in counter-clockwise order."""
    return np.stack([values[:-1, :-1], values[1:, :-1], values[1:, 1:], values[:-1, 1:]])


def _edge_params(f):
    """Crossing parameter along each edge, measured from its starting corner."""
    g = np.roll(f, -1, axis=0)
    denom = f - g
    t = np.zeros_like(f)
    np.divide(f, denom, out=t, where=(f > 0) != (g > 0))
    return t


def _cell_fractions_2d(values, s):
    f = _corners(values) - s
    b = f > 0
    t = _edge_params(f)
    cross = b != np.roll(b, -1, axis=0)
    t_prev = np.roll(t, 1, axis=0)
    cross_prev = np.roll(cross, 1, axis=0)
    tri = np.where(cross & cross_prev, 0.5 * t * (1.0 - t_prev), 0.0)
    count = b.sum(axis=0)
    pos_tri = np.sum(np.where(b, tri, 0.0), axis=0)
    neg_tri = np.sum(np.where(~b, tri, 0.0), axis=0)
    b_next = np.roll(b, -1, axis=0)
    t_next = np.roll(t, -1, axis=0)
    trap = np.sum(np.where(b & b_next, 0.5 * ((1.0 - t_prev) + t_next), 0.0), axis=0)
    saddle = (count == 2) & (b[0] == b[2])
    connected = saddle & (f.mean(axis=0) > 0)
    area = np.select(
        [count == 0, count == 4, count == 1, count == 3, connected, saddle],
        [0.0, 1.0, pos_tri, 1.0 - neg_tri, 1.0 - neg_tri, pos_tri],
        default=trap,
    )
    return area


# Kuhn subdivision of the unit cube: one tetrahedron per axis permutation.
_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def _tet_fraction(v):
    """Volume fraction where a linear function is positive; ``v`` has shape (4, ...)."""
    p = np.sort(v, axis=0)
    a, b, c, d = p
    out = np.zeros(a.shape)
    out[a >= 0] = 1.0
    one_pos = (c <= 0) & (d > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        fr = d ** 3 / ((d - a) * (d - b) * (d - c))
        out = np.where(one_pos, fr, out)
        one_neg = (a < 0) & (b >= 0)
        fr = 1.0 - (-a) ** 3 / ((b - a) * (c - a) * (d - a))
        out = np.where(one_neg, fr, out)
        two = (b < 0) & (c > 0)
        na, nb = -a, -b
        num = c * d * (na * na + na * nb + nb * nb) + (c + d) * na * nb * (na + nb) + (na * nb) ** 2
        neg = num / ((c + na) * (d + na) * (c + nb) * (d + nb))
        out = np.where(two, 1.0 - neg, out)
    return out


def _cell_fractions_3d(values, s):
    f = values - s
    n = f.shape[0] - 1

    def corner(o):
        return f[o[0]:o[0] + n, o[1]:o[1] + n, o[2]:o[2] + n]

    corners = {o: corner(o) for o in np.ndindex(2, 2, 2)}
    lo = np.minimum.reduce(list(corners.values()))
    hi = np.maximum.reduce(list(corners.values()))
    total = (lo >= 0).astype(float)
    mixed = (lo < 0) & (hi > 0)
    if not mixed.any():
        return total
    # only cells straddling the level need the tetrahedral split
    acc = np.zeros(int(mixed.sum()))
    for perm in _PERMS:
        o = [0, 0, 0]
        verts = [corners[tuple(o)][mixed]]
        for ax in perm:
            o[ax] = 1
            verts.append(corners[tuple(o)][mixed])
        acc += _tet_fraction(np.stack(verts))
    total[mixed] = acc / len(_PERMS)
    return total


def cell_fractions(u, s):
    """Fraction of each grid cell where the piecewise-linear interpolant exceeds ``s``."""
    values = u.values if isinstance(u, ScalarField) else np.asarray(u)
    if values.ndim == 2:
        return _cell_fractions_2d(values, s)
    return _cell_fractions_3d(values, s)


def cell_centers(grid):
    c = 0.5 * (grid.axis[:-1] + grid.axis[1:])
    return np.meshgrid(*([c] * grid.dimension), indexing="ij")


def superlevel_volume(u, s):
    """Volume of ``{u > s}`` from sub-cell area fractions."""
    return float(np.sum(cell_fractions(u, s))) * u.grid.spacing ** u.grid.dimension


def superlevel_integral(u, s, cell_values):
    """``integral over {u > s}`` of a function sampled at cell centres."""
    return float(np.sum(cell_fractions(u, s) * cell_values)) * u.grid.spacing ** u.grid.dimension


def cell_gradient_norm(u):
    """``|grad|`` of the multilinear interpolant at each cell centre."""
    values = u.values if isinstance(u, ScalarField) else np.asarray(u)
    h = u.grid.spacing
    d = values.ndim
    comps = []
    for k in range(d):
        hi = [slice(None)] * d
        lo = [slice(None)] * d
        hi[k] = slice(1, None)
        lo[k] = slice(None, -1)
        diff = values[tuple(hi)] - values[tuple(lo)]
        for m in range(d):
            if m != k:
                a = [slice(None)] * d
                b = [slice(None)] * d
                a[m] = slice(1, None)
                b[m] = slice(None, -1)
                diff = 0.5 * (diff[tuple(a)] + diff[tuple(b)])
        comps.append(diff / h)
    return np.sqrt(sum(c * c for c in comps))


def coarea_density(u, levels, band_width):
    """Band-averaged perimeter ``(1/ds) * integral_{|u - s| < ds/2} |grad u| dx`` per level."""
    if not band_width > 0:
        raise SpecError("band_width must be positive")
    gnorm = cell_gradient_norm(u)
    vol = u.grid.spacing ** u.grid.dimension
    out = []
    for s in np.atleast_1d(levels):
        band = cell_fractions(u, s - 0.5 * band_width) - cell_fractions(u, s + 0.5 * band_width)
        out.append(float(np.sum(band * gnorm)) * vol / band_width)
    return np.array(out)


# --- contours ---------------------------------------------------------------

def bilinear(values, grid, points):
    """Bilinear interpolation of nodal ``values`` at ``points`` of shape (m, 2)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    h = grid.spacing
    rel = (points + grid.half_width) / h
    idx = np.clip(np.floor(rel).astype(int), 0, grid.n - 2)
    a = rel - idx
    i, j = idx[:, 0], idx[:, 1]
    ax, ay = a[:, 0], a[:, 1]
    return ((1 - ax) * (1 - ay) * values[i, j] + ax * (1 - ay) * values[i + 1, j]
            + ax * ay * values[i + 1, j + 1] + (1 - ax) * ay * values[i, j + 1])


@dataclass
class Contour:
    """Marching-squares approximation of ``{u = level}`` at one time."""

    level: float
    time: float
    segments: np.ndarray            # (m, 2, 2) endpoints
    edge_ids: np.ndarray            # (m, 2) global edge index of each endpoint
    normals: np.ndarray             # (m, 2) unit outer normal of the super-level set
    fields: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.segments)

    @property
    def midpoints(self):
        return 0.5 * (self.segments[:, 0] + self.segments[:, 1])

    @property
    def lengths(self):
        return np.linalg.norm(self.segments[:, 1] - self.segments[:, 0], axis=1)

    @property
    def length(self):
        return float(np.sum(self.lengths))

    def is_closed(self):
        """True when every edge crossing is shared by exactly two segments."""
        if len(self) == 0:
            return True
        _, counts = np.unique(self.edge_ids.ravel(), return_counts=True)
        return bool(np.all(counts == 2))

    def to_csv(self, path):
        names = sorted(self.fields)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"] + names + ["nu_x", "nu_y"])
            for k, (x, y) in enumerate(self.midpoints):
                w.writerow([repr(float(x)), repr(float(y))]
                           + [repr(float(self.fields[n][k])) for n in names]
                           + [repr(float(self.normals[k, 0])), repr(float(self.normals[k, 1]))])


# Segments per saddle configuration as pairs of local edges.
_AROUND = {0: (3, 0), 1: (0, 1), 2: (1, 2), 3: (2, 3)}


def _crossing_points(values, grid, s):
    """Crossing points on all x-edges and y-edges (NaN where no crossing)."""
    x = grid.axis
    h = grid.spacing
    f = values - s
    fa, fb = f[:-1, :], f[1:, :]
    cx = (fa > 0) != (fb > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(cx, fa / (fa - fb), np.nan)
    px = np.stack(np.broadcast_arrays(x[:-1, None] + tx * h, x[None, :] + 0 * tx), axis=-1)
    fa, fb = f[:, :-1], f[:, 1:]
    cy = (fa > 0) != (fb > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ty = np.where(cy, fa / (fa - fb), np.nan)
    py = np.stack(np.broadcast_arrays(x[:, None] + 0 * ty, x[None, :-1] + ty * h), axis=-1)
    return px, py


def extract_contour(u, s, attach=None, time=0.0):
    """Marching-squares contour of ``{u = s}`` (2D only).

    ``attach`` maps names to nodal arrays / ScalarFields that are sampled at
    segment midpoints by bilinear interpolation.  A VectorField attached under
    any name contributes one entry per component (``name_0``, ``name_1``).
    """
    grid = u.grid
    if grid.dimension != 2:
        raise SpecError("contour extraction is 2D only")
    values = u.values
    if not values.min() < s < values.max():
        raise EmptyLevelSet(f"level {s} not strictly inside [{values.min()}, {values.max()}]")
    n = grid.n
    px, py = _crossing_points(values, grid, s)
    # local edge k of cell (i, j) -> (point array, global id)
    ii, jj = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="ij")
    edge_pts = [px[ii, jj], py[ii + 1, jj], px[ii, jj + 1], py[ii, jj]]
    nx_edges = (n - 1) * n
    edge_ids = [ii * n + jj, nx_edges + (ii + 1) * (n - 1) + jj,
                (ii) * n + jj + 1, nx_edges + ii * (n - 1) + jj]

    f = _corners(values) - s
    b = f > 0
    cross = b != np.roll(b, -1, axis=0)
    ncross = cross.sum(axis=0)
    saddle = (ncross == 4)
    connected = f.mean(axis=0) > 0

    pairs = []  # (mask over cells, edge a, edge b)
    simple = ncross == 2
    for ea in range(4):
        for eb in range(ea + 1, 4):
            pairs.append((simple & cross[ea] & cross[eb], ea, eb))
    for positive_diag in (0, 1):
        diag = saddle & b[positive_diag]
        for corner in range(4):
            inside = (corner % 2) == positive_diag
            # connected -> segments wrap the outside corners, separated -> inside corners
            mask = diag & np.where(connected, not inside, inside)
            ea, eb = _AROUND[corner]
            pairs.append((mask, ea, eb))

    starts, ends, ids_a, ids_b = [], [], [], []
    for mask, ea, eb in pairs:
        if not mask.any():
            continue
        starts.append(edge_pts[ea][mask])
        ends.append(edge_pts[eb][mask])
        ids_a.append(edge_ids[ea][mask])
        ids_b.append(edge_ids[eb][mask])
    if starts:
        segs = np.stack([np.concatenate(starts), np.concatenate(ends)], axis=1)
        eids = np.stack([np.concatenate(ids_a), np.concatenate(ids_b)], axis=1)
    else:
        segs = np.zeros((0, 2, 2))
        eids = np.zeros((0, 2), dtype=int)
    # canonical order keeps outputs deterministic
    order = np.lexsort((eids[:, 1], eids[:, 0]))
    segs, eids = segs[order], eids[order]

    mid = 0.5 * (segs[:, 0] + segs[:, 1])
    gx, gy = gradient_arrays(values, grid)
    g = np.stack([bilinear(gx, grid, mid), bilinear(gy, grid, mid)], axis=1)
    gn = np.linalg.norm(g, axis=1, keepdims=True)
    normals = -g / np.where(gn > 0, gn, 1.0)

    sampled = {}
    for name, fld in (attach or {}).items():
        if isinstance(fld, VectorField):
            for k, c in enumerate(fld.components):
                sampled[f"{name}_{k}"] = bilinear(c, grid, mid)
        else:
            arr = fld.values if isinstance(fld, ScalarField) else np.asarray(fld)
            sampled[name] = bilinear(arr, grid, mid)
    return Contour(float(s), float(time), segs, eids, normals, sampled)


def contour_integral(contour, integrand):
    """Midpoint rule over segments: ``sum(value * length)``."""
    vals = np.broadcast_to(np.asarray(integrand, dtype=float), (len(contour),))
    return float(np.sum(vals * contour.lengths))


# --- level sweeps and disintegration checks -----------------------------------

@dataclass
class LevelSweep:
    """Per-level time series of super-level volume, contour length and ``integral V^2``."""

    levels: np.ndarray
    times: np.ndarray
    volume: np.ndarray       # (levels, times)
    length: np.ndarray       # (levels, times), 0 when the level set is empty
    dissipation: np.ndarray  # (levels, times), contour integral of V^2

    def accumulated_dissipation(self):
        """Trapezoid-in-time integral of ``integral_Sigma V^2`` per level."""
        return np.trapezoid(self.dissipation, self.times, axis=1)

    def perimeter_growth(self):
        """``max_t length / length(0)`` per level."""
        first = np.where(self.length[:, 0] > 0, self.length[:, 0], np.nan)
        return np.max(self.length, axis=1) / first


def level_sweep(traj, levels, cutoff=None):
    """Sweep ``levels`` over every snapshot of a 2D trajectory.

    ``cutoff`` defaults to ``epsilon / 10`` for the velocity field.
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    cutoff = traj.epsilon / 10.0 if cutoff is None else cutoff
    nt = len(traj)
    vol, length, diss = (np.zeros((len(levels), nt)) for _ in range(3))
    for i, f in enumerate(traj.iter_fields()):
        V = velocity_field(f.u_t, f.grad, cutoff)
        for k, s in enumerate(levels):
            vol[k, i] = superlevel_volume(f.u, s)
            try:
                c = extract_contour(f.u, s, attach={"V": V})
            except EmptyLevelSet:
                continue
            length[k, i] = c.length
            diss[k, i] = contour_integral(c, c.fields["V"] ** 2)
    return LevelSweep(levels, np.asarray(traj.times, dtype=float), vol, length, diss)


def coarea_identity(u, phi, levels, band_width):
    """Both sides of ``integral |grad u| phi(u) = sum_k phi(s_k) P(s_k) ds``.

    ``levels`` should be equally spaced by ``band_width``.  The left side uses
    the cell-centre gradient of the multilinear interpolant and the cell-centre
    value of ``u``.  Returns ``(lhs, rhs)``.
    """
    values = u.values
    d = values.ndim
    centre = values
    for k in range(d):
        a = [slice(None)] * d
        b = [slice(None)] * d
        a[k] = slice(1, None)
        b[k] = slice(None, -1)
        centre = 0.5 * (centre[tuple(a)] + centre[tuple(b)])
    lhs = float(np.sum(cell_gradient_norm(u) * phi(centre))) * u.grid.spacing ** d
    dens = coarea_density(u, levels, band_width)
    rhs = float(np.sum(phi(np.asarray(levels)) * dens)) * band_width
    return lhs, rhs


def layer_cake_identity(u, Phi, dPhi, levels, band_width, floor):
    """Both sides of ``integral Phi(u) - Phi(K)|box| = sum_k Phi'(s_k) |{u > s_k}| ds``.

    ``floor`` is ``K < min u`` and ``levels`` are the midpoints of a uniform
    partition of ``[K, max u]`` with spacing ``band_width``.  Returns ``(lhs, rhs)``.
    """
    grid = u.grid
    if floor >= u.values.min():
        raise SpecError("layer-cake floor must lie below min(u)")
    lhs = float(np.sum(Phi(u.values) * grid.quadrature_weights)) - Phi(floor) * grid.box_volume
    rhs = sum(dPhi(s) * superlevel_volume(u, s) for s in np.atleast_1d(levels)) * band_width
    return lhs, float(rhs)
