"""Experiment pipeline: build, certify, run, sweep levels, verify, write artifacts.

Artifacts in the output directory:

* ``diagnostics.csv``: one row per snapshot with ``time, E_eps, E_tv,
  curvature_mass, hsq_mass`` and per-level ``volume_L<k>``, ``length_L<k>``
  (2D), ``coarea_L<k>`` and ``dissipation_L<k>`` columns.
* ``residuals.csv``: one row per (identity, test object).
* ``summary.json``: one entry per configured check plus run metadata.
* ``*.svg`` charts when ``emit_svg`` is set.
* ``snapshots/`` with a ``manifest.json`` when ``persist_snapshots`` is set.
"""

import csv
import json
import logging
import math
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import BlowupError, ConfigError, EmptyLevelSet, LsmcfError
from .fields import GridSpec, read_snapshot, write_snapshot
from .geometry import (coarea_density, extract_contour, layer_cake_identity, level_sweep,
                       superlevel_volume)
from .initial_data import NeumannHalfBump, build, certify_well_prepared
from .solver import SolverParams, Trajectory, run
from .svg import line_chart
from .testfuncs import circle_family
from .verifier import (AffineRelabel, TanhRelabel, affine_rescaling_deviation, comparison_gap,
                       curvature_mass_series, dissipation_defect, hsq_weighted_mass,
                       l1_continuity_check, level_dissipation_defect, median_relative,
                       relabel_compare, residual_distMC_family, residual_distV_family,
                       residual_level_MC_family, residual_level_V_family, write_reports)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_TOLERANCE, EXIT_VALIDATION, EXIT_BLOWUP, EXIT_ERROR = 0, 2, 3, 4, 1

IDENTITIES = ("distV", "distMC", "lvlV", "lvlMC")


def thread_count():
    """Parallel fan-out cap from ``LSMCF_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("LSMCF_THREADS", "1")))
    except ValueError:
        return 1


def _fan_out(func, items):
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


@dataclass
class CheckResult:
    value: object
    threshold: object
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"value": _jsonable(self.value), "threshold": _jsonable(self.threshold),
               "passed": bool(self.passed)}
        if self.detail:
            out["detail"] = _jsonable(self.detail)
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return None if not math.isfinite(float(x)) else float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _upper(value, tol, detail=None):
    return CheckResult(value, tol, bool(value <= tol), detail or {})


# --- the experiment context -------------------------------------------------------

class Experiment:
    """Lazily computed runs and derived data for one configuration."""

    def __init__(self, cfg, trajectory=None):
        self.cfg = cfg
        self.grid = cfg.grid
        self._given = trajectory
        self.reports = []

    # runs -------------------------------------------------------------------
    @cached_property
    def g(self):
        return build(self.cfg.initial, self.grid)

    @cached_property
    def certification(self):
        return certify_well_prepared(self.g)

    @cached_property
    def traj(self):
        if self._given is not None:
            return self._given
        self.certification
        return run(self.g, self.cfg.params, track_energy=True)

    @property
    def offline(self):
        """True when verifying persisted snapshots (no new runs allowed)."""
        return self._given is not None

    @cached_property
    def ladder(self):
        """``{epsilon: Trajectory}`` over the configured ladder."""
        eps_list = list(self.cfg.epsilon_ladder or ())
        main = self.cfg.params.epsilon

        def one(e):
            if math.isclose(e, main, rel_tol=1e-12):
                return self.traj
            return run(self.g, self.cfg.params.with_epsilon(e))

        return dict(zip(eps_list, _fan_out(one, eps_list)))

    @cached_property
    def coarse(self):
        n = self.cfg.coarse_points
        grid = GridSpec(self.grid.dimension, self.grid.half_width, n, self.grid.boundary_regime)
        scale = self.cfg.params.epsilon / self.grid.spacing
        params = SolverParams(scale * grid.spacing, self.cfg.params.t_end,
                              self.cfg.params.dt_safety, self.cfg.params.snapshot_interval)
        return run(build(self.cfg.initial, grid), params)

    @cached_property
    def comparison(self):
        return run(build(self.cfg.comparison, self.grid), self.cfg.params)

    # geometry -----------------------------------------------------------------
    @cached_property
    def levels(self):
        return self.cfg.levels()

    @cached_property
    def sweep(self):
        if self.grid.dimension != 2 or not self.levels:
            return None
        return level_sweep(self.traj, self.levels)

    def family(self):
        bumps = self.cfg.initial.bumps()
        if bumps:
            b = bumps[0]
            centre, radius = b.center, self.cfg.initial.level_radius(self.cfg.initial.level_offset)
        else:
            centre, radius = (0.0,) * self.grid.dimension, 0.4
        kw = {}
        if bumps and isinstance(bumps[0], NeumannHalfBump):
            L = self.grid.half_width
            k = int(np.argmax(np.abs(centre)))
            inward = np.zeros(2)
            inward[k] = -np.sign(centre[k])
            theta = math.atan2(inward[1], inward[0])
            kw = {"neumann_half_width": L, "arc": (theta - math.pi / 2, theta + math.pi / 2)}
        return circle_family(centre, radius, test_radius=self.cfg.family_radius,
                             window=self.cfg.family_window, seed=self.cfg.family_seed, **kw)

    def residuals(self, identity, traj=None, strict=True):
        traj = traj or self.traj
        scalars, vectors = self.family()
        s = self.cfg.initial.level_offset
        if identity == "distV":
            return residual_distV_family(traj, scalars, strict=strict)
        if identity == "distMC":
            return residual_distMC_family(traj, vectors, strict=strict)
        if identity == "lvlV":
            return residual_level_V_family(traj, s, scalars, strict=strict)
        return residual_level_MC_family(traj, s, vectors, strict=strict)

    @cached_property
    def fine_residuals(self):
        out = {}
        for ident in IDENTITIES:
            if ident.startswith("lvl") and self.grid.dimension != 2:
                continue
            out[ident] = self.residuals(ident)
            self.reports.extend(out[ident])
        return out

    @cached_property
    def coarse_residuals(self):
        return {ident: self.residuals(ident, self.coarse) for ident in self.fine_residuals}

    @cached_property
    def curvature_series(self):
        return curvature_mass_series(self.traj)


# --- checks ----------------------------------------------------------------------

def _measured_radius(exp, u, s):
    vol = superlevel_volume(u, s)
    d = exp.grid.dimension
    unit = math.pi if d == 2 else 4.0 * math.pi / 3.0
    bumps = exp.cfg.initial.bumps()
    if bumps and isinstance(bumps[0], NeumannHalfBump):
        unit *= 0.5
    return (vol / unit) ** (1.0 / d)


def check_radius_law(exp, tol):
    s = exp.cfg.initial.level_offset
    t = exp.cfg.checkpoint if exp.cfg.checkpoint is not None else exp.traj.times[-1]
    d = exp.grid.dimension
    r0 = exp.cfg.initial.level_radius(s)
    exact = math.sqrt(r0 * r0 - 2.0 * (d - 1) * t)
    measured = _measured_radius(exp, exp.traj.at(t), s)
    err = abs(measured - exact) / exact
    return _upper(err, tol, {"time": t, "measured": measured, "exact": exact})


def far_field_deviation(exp):
    """``max |u - far-field value|`` over the 5-node outer shell and all snapshots."""
    shell = exp.grid.face_mask(5)
    far = exp.cfg.initial.far_field_value
    return max(float(np.max(np.abs(u.values[shell] - far))) for u in exp.traj.snapshots)


def check_far_field(exp, tol):
    if exp.grid.neumann:
        raise ConfigError("far_field applies to FarFieldConstant runs only")
    return _upper(far_field_deviation(exp), tol)


def _energy_log(exp):
    elog = exp.traj.energy_log
    if elog is None:
        raise ConfigError("energy checks need a run with energy tracking")
    return elog.as_arrays()


def check_energy_monotone(exp, tol):
    _, E, _ = _energy_log(exp)
    worst = float(np.max(np.diff(E))) / E[0] if len(E) > 1 else 0.0
    return _upper(max(worst, 0.0), tol, {"max_step_increase": worst})


def check_energy_dissipation(exp, tol):
    _, E, D = _energy_log(exp)
    defect = float(np.sum(np.diff(E) + exp.traj.dt * D[:-1]))
    drop = float(E[0] - E[-1])
    value = abs(defect) / drop if drop > 0 else abs(defect)
    return _upper(value, tol, {"cumulative_defect": defect, "total_drop": drop})


def check_curvature_mass_monotone(exp, tol):
    cm = exp.curvature_series
    return _upper(cm.max_relative_increase, tol, {"peak": cm.peak})


def _ladder_ratio(values, tol, name):
    vals = {e: v for e, v in values.items()}
    lo, hi = min(vals.values()), max(vals.values())
    ratio = hi / lo if lo > 0 else (1.0 if hi == 0 else math.inf)
    return _upper(ratio, tol, {name: {f"{e:.6g}": v for e, v in vals.items()}})


def check_curvature_mass_ladder(exp, tol):
    return _ladder_ratio({e: curvature_mass_series(t).peak for e, t in exp.ladder.items()},
                         tol, "peak_by_epsilon")


def check_hsq_ladder(exp, tol):
    return _ladder_ratio({e: hsq_weighted_mass(t) for e, t in exp.ladder.items()},
                         tol, "hsq_by_epsilon")


def _residual_check(identity):
    def check(exp, tol):
        reps = exp.fine_residuals[identity]
        med = median_relative(reps)
        return _upper(med, tol, {"members": [r.rel for r in reps]})
    return check


def check_refinement_decay(exp, band):
    fine, coarse = exp.fine_residuals, exp.coarse_residuals
    factors = {k: median_relative(fine[k]) / median_relative(coarse[k]) for k in fine}
    ok = all(band[0] <= f <= band[1] for f in factors.values())
    worst = max(factors.values(), key=lambda f: max(band[0] - f, f - band[1]))
    return CheckResult(worst, list(band), ok, {"factors": factors,
                                               "coarse_points": exp.cfg.coarse_points})


def check_v_square_stability(exp, band):
    fine = exp.sweep.accumulated_dissipation()
    coarse = level_sweep(exp.coarse, exp.levels).accumulated_dissipation()
    ratios = fine / coarse
    ok = bool(np.all((ratios >= band[0]) & (ratios <= band[1])))
    worst = float(ratios[np.argmax(np.maximum(band[0] - ratios, ratios - band[1]))])
    return CheckResult(worst, list(band), ok, {"ratios": list(ratios), "fine": list(fine)})


def check_level_dissipation(exp, tol):
    T = exp.traj.times[-1]
    rel = {}
    for s in exp.levels:
        d = level_dissipation_defect(exp.traj, s, 0.0, T)
        rel[f"{s:.6g}"] = d["defect"] / d["L_t1"]
    return _upper(max(rel.values()), tol, {"relative_defects": rel})


def check_circle_level_equality(exp, tol):
    s = exp.cfg.initial.level_offset
    d = level_dissipation_defect(exp.traj, s, 0.0, exp.traj.times[-1])
    return _upper(abs(d["defect"]) / d["L_t1"], tol, d)


def check_dissipation_defect(exp, tol):
    d = dissipation_defect(exp.traj, 0.0, exp.traj.times[-1])
    drop = d["E_t1"] - d["E_t2"]
    value = d["defect"] / drop if drop > 0 else d["defect"]
    return _upper(value, tol, d)


def check_l1_continuity(exp, tol):
    s = exp.cfg.initial.level_offset
    r = l1_continuity_check(exp.traj, s, 0.0, exp.traj.times[-1], slack=tol)
    budget = r["rhs"] * (1 + tol) + r["allowance"]
    return CheckResult(r["lhs"], budget, r["passed"], r)


def check_perimeter_bound(exp, tol):
    growth = exp.sweep.perimeter_growth()
    return _upper(float(np.nanmax(growth)) - 1.0, tol, {"growth": list(growth)})


def check_coarea_contour(exp, tol):
    """Contour length against the coarea band density at ``t = 0`` and mid-run.

    Mid-run samples are kept while a level still has at least half its
    initial length; closer to extinction the band average over ``2h`` in ``s``
    no longer resolves the perimeter as a function of the level.
    """
    times = [0.0, exp.traj.times[len(exp.traj) // 2]]
    band = 2.0 * exp.grid.spacing
    worst, rows = 0.0, []
    initial = {}
    for t in times:
        u = exp.traj.at(t)
        dens = coarea_density(u, exp.levels, band)
        for s, p in zip(exp.levels, dens):
            try:
                length = extract_contour(u, s).length
            except EmptyLevelSet:
                continue
            initial.setdefault(s, length)
            if length < 0.5 * initial[s]:
                continue
            err = abs(p - length) / length
            worst = max(worst, err)
            rows.append({"time": t, "level": s, "contour": length, "coarea": p})
    return _upper(worst, tol, {"samples": rows})


def check_layer_cake(exp, tol):
    """Layer-cake identity for ``Phi(s) = s + 0.3 tanh(5 s)`` at the first and last snapshot.

    The level step is ``h/4``: once the viscous tail has spread into the far
    field, ``|{u > s}|`` drops steeply just above the far-field value and the
    midpoint rule in ``s`` is only first order there.
    """
    phi = TanhRelabel(0.3, 5.0)
    ds = 0.25 * exp.grid.spacing
    worst = 0.0
    for u in (exp.traj.snapshots[0], exp.traj.snapshots[-1]):
        floor = float(u.values.min()) - 2 * ds
        top = float(u.values.max()) + 2 * ds
        m = int(math.ceil((top - floor) / ds))
        levels = floor + ds * (np.arange(m) + 0.5)
        lhs, rhs = layer_cake_identity(u, phi, phi.deriv, levels, ds, floor)
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return _upper(worst, tol)


def check_comparison(exp, tol):
    return _upper(comparison_gap(exp.traj, exp.comparison), tol)


def check_relabel_ladder(exp, tol):
    a, b = exp.cfg.relabel or (0.3, 1.0)
    eps = sorted(exp.ladder)
    devs = relabel_compare(exp.g, TanhRelabel(a, b), exp.cfg.params, eps, base_runs=exp.ladder)
    ratio = devs[eps[0]] / devs[eps[-1]]
    return _upper(ratio, tol, {"deviation_by_epsilon": {f"{e:.6g}": v for e, v in devs.items()}})


def check_affine_relabel(exp, tol):
    return _upper(affine_rescaling_deviation(exp.g, exp.cfg.params, AffineRelabel(2.0, 1.0)), tol)


def check_stationary_residuals(exp, tol):
    traj = exp.traj
    raws = []
    for ident in IDENTITIES:
        if ident.startswith("lvl") and exp.grid.dimension != 2:
            continue
        reps = exp.residuals(ident, strict=False)
        exp.reports.extend(reps)
        raws += [abs(r.raw) for r in reps]
    T = traj.times[-1]
    d = dissipation_defect(traj, 0.0, T)
    raws.append(abs(d["defect"]))
    if exp.grid.dimension == 2:
        c = exp.cfg.initial.level_offset
        for s in (c - 0.1, c + 0.1):
            scalars, _ = exp.family()
            raws += [abs(r.raw) for r in residual_level_V_family(traj, s, scalars, strict=False)]
            raws.append(abs(level_dissipation_defect(traj, s, 0.0, T)["defect"]))
    return _upper(max(raws), tol)


CHECK_FUNCS = {
    "radius_rel_err": check_radius_law,
    "far_field": check_far_field,
    "energy_monotone": check_energy_monotone,
    "energy_dissipation": check_energy_dissipation,
    "curvature_mass_monotone": check_curvature_mass_monotone,
    "curvature_mass_ladder": check_curvature_mass_ladder,
    "hsq_ladder": check_hsq_ladder,
    "residual_distV": _residual_check("distV"),
    "residual_distMC": _residual_check("distMC"),
    "residual_lvlV": _residual_check("lvlV"),
    "residual_lvlMC": _residual_check("lvlMC"),
    "refinement_decay": check_refinement_decay,
    "v_square_stability": check_v_square_stability,
    "level_dissipation": check_level_dissipation,
    "circle_level_equality": check_circle_level_equality,
    "dissipation_defect": check_dissipation_defect,
    "l1_continuity": check_l1_continuity,
    "perimeter_bound": check_perimeter_bound,
    "coarea_contour": check_coarea_contour,
    "layer_cake": check_layer_cake,
    "comparison": check_comparison,
    "relabel_ladder": check_relabel_ladder,
    "affine_relabel": check_affine_relabel,
    "stationary_residuals": check_stationary_residuals,
}

# checks that need extra solver runs or the per-step energy log
NEEDS_RUNS = {"energy_monotone", "energy_dissipation", "curvature_mass_ladder", "hsq_ladder",
              "refinement_decay", "v_square_stability", "comparison", "relabel_ladder",
              "affine_relabel"}


# --- artifacts -------------------------------------------------------------------

def diagnostics_rows(exp):
    """Per-snapshot functionals; per-level columns are keyed ``L0, L1, ...``."""
    traj = exp.traj
    grid = exp.grid
    levels = exp.levels
    sweep = exp.sweep
    band = 2.0 * grid.spacing
    rows, hsq_rate = [], []
    for i, f in enumerate(traj.iter_fields()):
        w = grid.quadrature_weights
        hsq_rate.append(float(np.sum(f.curvature ** 2 * f.speed * w)))
        row = {
            "time": f.time,
            "E_eps": float(np.sum(f.speed * w)),
            "E_tv": float(np.sum(f.grad_norm * w)),
            "curvature_mass": float(np.sum(np.abs(f.curvature) * w)),
            "hsq_mass": float(np.trapezoid(hsq_rate, traj.times[:i + 1])) if i else 0.0,
        }
        dens = coarea_density(f.u, levels, band) if levels else []
        for k, s in enumerate(levels):
            row[f"volume_L{k}"] = sweep.volume[k, i] if sweep else superlevel_volume(f.u, s)
            if sweep is not None:
                row[f"length_L{k}"] = sweep.length[k, i]
            row[f"coarea_L{k}"] = dens[k]
            if sweep is not None:
                row[f"dissipation_L{k}"] = sweep.dissipation[k, i]
        rows.append(row)
    return rows


def _write_csv(path, rows):
    if not rows:
        return
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})


def _charts(exp, out, rows):
    t = [r["time"] for r in rows]
    files = [
        line_chart(out / "energy.svg", "Energy", "t", "E",
                   [("E_eps", t, [r["E_eps"] for r in rows]),
                    ("E_tv", t, [r["E_tv"] for r in rows])]),
        line_chart(out / "curvature_mass.svg", "Curvature mass", "t", "int |H_eps|",
                   [("int |H_eps|", t, [r["curvature_mass"] for r in rows])]),
    ]
    if exp.sweep is not None:
        files.append(line_chart(
            out / "level_lengths.svg", "Contour length per level", "t", "length",
            [(f"s={s:.3g}", t, list(exp.sweep.length[k])) for k, s in enumerate(exp.levels)]))
    bumps = exp.cfg.initial.bumps()
    if len(bumps) == 1:
        s = exp.cfg.initial.level_offset
        r0 = exp.cfg.initial.level_radius(s)
        d = exp.grid.dimension
        measured = [_measured_radius(exp, u, s) for u in exp.traj.snapshots]
        exact = [math.sqrt(max(r0 * r0 - 2.0 * (d - 1) * ti, 0.0)) for ti in t]
        files.append(line_chart(out / "radius.svg", "Radius of the zero level", "t", "R",
                                [("measured", t, measured), ("exact law", t, exact)],
                                dashed=("exact law",)))
    return files


def persist_trajectory(traj, cfg, directory):
    """Write every snapshot plus ``manifest.json`` to ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, (t, u) in enumerate(traj):
        name = f"snap_{i:05d}"
        write_snapshot(directory / name, u, t, traj.epsilon)
        names.append(name)
    manifest = {"config": cfg.raw, "times": [float(t) for t in traj.times], "dt": traj.dt,
                "epsilon": traj.epsilon, "snapshots": names}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory


def load_trajectory(directory):
    """Inverse of :func:`persist_trajectory`; returns ``(config, Trajectory)``."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read snapshot manifest in {directory}: {exc}") from None
    cfg = cfgmod.validate(manifest["config"])
    snaps = [read_snapshot(directory / name)[0] for name in manifest["snapshots"]]
    params = SolverParams(manifest["epsilon"], cfg.params.t_end, cfg.params.dt_safety,
                          cfg.params.snapshot_interval)
    traj = Trajectory(snaps[0].grid, params, snaps[0], list(manifest["times"]), snaps,
                      manifest["dt"])
    return cfg, traj


@dataclass
class ExperimentResult:
    exit_code: int
    summary: dict
    directory: Path


def _summary_base(cfg):
    return {"name": cfg.name, "grid": cfg.grid.to_dict(), "epsilon": cfg.params.epsilon,
            "t_end": cfg.params.t_end}


def _finish(out, summary, code):
    summary["exit_code"] = code
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True))
    return ExperimentResult(code, summary, out)


def run_experiment(cfg, out_dir=None, trajectory=None):
    """Execute the configured pipeline and write artifacts to ``out_dir``.

    ``trajectory`` switches to verification of existing snapshots: checks that
    need new solver runs are reported as skipped.
    """
    out = Path(out_dir or cfg.output_dir or f"lsmcf-out/{cfg.name}")
    exp = Experiment(cfg, trajectory)
    summary = _summary_base(cfg)
    started = _time.perf_counter()
    try:
        traj = exp.traj
        summary["dt"] = traj.dt
        summary["snapshots"] = len(traj)
        if not exp.offline:
            cert = exp.certification
            summary["certification"] = {"epsilons": cert.epsilons, "masses": cert.masses,
                                        "growth": cert.growth}
        checks, skipped = {}, []
        for name in cfg.checks:
            if exp.offline and name in NEEDS_RUNS:
                skipped.append(name)
                continue
            log.info("check %s", name)
            checks[name] = CHECK_FUNCS[name](exp, cfg.tolerance(name)).to_dict()
        summary["checks"] = checks
        if not exp.grid.neumann:
            summary["diagnostics"] = {"far_field_deviation": far_field_deviation(exp)}
        if skipped:
            summary["skipped"] = skipped
        out.mkdir(parents=True, exist_ok=True)
        rows = diagnostics_rows(exp)
        _write_csv(out / "diagnostics.csv", rows)
        write_reports(out / "residuals.csv", exp.reports)
        if cfg.emit_svg:
            _charts(exp, out, rows)
        if cfg.persist_snapshots and not exp.offline:
            persist_trajectory(traj, cfg, out / "snapshots")
    except BlowupError as exc:
        summary.update(status="blowup", error=str(exc), blowup_time=exc.time)
        return _finish(out, summary, EXIT_BLOWUP)
    except LsmcfError as exc:
        summary.update(status="error", error=f"{type(exc).__name__}: {exc}")
        return _finish(out, summary, EXIT_ERROR)
    summary["runtime_seconds"] = round(_time.perf_counter() - started, 3)
    passed = all(c["passed"] for c in summary["checks"].values())
    summary["status"] = "passed" if passed else "failed"
    return _finish(out, summary, EXIT_OK if passed else EXIT_TOLERANCE)
