"""Experiment configuration: JSON schema, parsing and the named presets.

A config is a JSON object.  Epsilons are either numbers or strings ``"<k>h"``
meaning ``k`` grid spacings.  Unknown keys are rejected everywhere.
"""

import copy
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema

from .errors import ConfigError
from .fields import GridSpec
from .initial_data import (Constant, InitialDataSpec, NeumannHalfBump, RadialBump, TwoBumps,
                           check_margin)
from .solver import SolverParams

CHECKS = (
    "radius_rel_err", "far_field", "energy_monotone", "energy_dissipation",
    "curvature_mass_monotone", "curvature_mass_ladder", "hsq_ladder",
    "residual_distV", "residual_distMC", "residual_lvlV", "residual_lvlMC",
    "refinement_decay", "v_square_stability",
    "level_dissipation", "circle_level_equality", "dissipation_defect",
    "l1_continuity", "perimeter_bound", "coarea_contour", "layer_cake",
    "comparison", "relabel_ladder", "affine_relabel", "stationary_residuals",
)

DEFAULT_TOLERANCES = {
    "radius_rel_err": 0.02,
    "far_field": 1e-6,
    "energy_monotone": 1e-8,
    "energy_dissipation": 0.05,
    "curvature_mass_monotone": 1e-3,
    "curvature_mass_ladder": 2.0,
    "hsq_ladder": 2.0,
    "residual_distV": 0.05,
    "residual_distMC": 0.05,
    "residual_lvlV": 0.05,
    "residual_lvlMC": 0.05,
    "refinement_decay": [0.3, 0.8],
    "v_square_stability": [0.8, 1.25],
    "level_dissipation": 0.03,
    "circle_level_equality": 0.03,
    "dissipation_defect": 0.02,
    "l1_continuity": 0.10,
    "perimeter_bound": 0.03,
    "coarea_contour": 0.03,
    "layer_cake": 0.01,
    "comparison": 1e-6,
    "relabel_ladder": 0.5,
    "affine_relabel": 1e-10,
    "stationary_residuals": 1e-12,
}

_EPS = {"oneOf": [{"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                  {"type": "string", "pattern": r"^[0-9]*\.?[0-9]+h$"}]}
_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3}
_BUMP = {
    "type": "object", "additionalProperties": False,
    "required": ["center", "inner_radius", "cap"],
    "properties": {
        "center": _POINT,
        "inner_radius": {"type": "number", "exclusiveMinimum": 0},
        "cap": {"type": "number", "exclusiveMinimum": 0},
        "blend": {"type": ["number", "null"], "exclusiveMinimum": 0},
    },
}


def _shape_schema(kind, extra=None, required=()):
    props = {"kind": {"const": kind}}
    props.update(extra or {})
    return {"type": "object", "additionalProperties": False,
            "required": ["kind", *required], "properties": props}


_SHAPE = {"oneOf": [
    _shape_schema("Constant"),
    _shape_schema("RadialBump", _BUMP["properties"], _BUMP["required"]),
    _shape_schema("NeumannHalfBump", _BUMP["properties"], _BUMP["required"]),
    _shape_schema("TwoBumps", {"first": _BUMP, "second": _BUMP}, ("first", "second")),
]}
_INITIAL = {
    "type": "object", "additionalProperties": False, "required": ["shape"],
    "properties": {"shape": _SHAPE, "level_offset": {"type": "number"}},
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "lsmcf experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "grid", "solver", "initial_data"],
    "properties": {
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
        "grid": {
            "type": "object", "additionalProperties": False,
            "required": ["dimension", "half_width", "points_per_axis"],
            "properties": {
                "dimension": {"enum": [2, 3]},
                "half_width": {"type": "number", "exclusiveMinimum": 0},
                "points_per_axis": {"type": "integer", "minimum": 16},
                "boundary_regime": {"enum": ["FarFieldConstant", "NeumannBox"]},
            },
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "required": ["epsilon", "t_end"],
            "properties": {
                "epsilon": _EPS,
                "t_end": {"type": "number", "minimum": 0},
                "dt_safety": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "snapshot_interval": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "initial_data": _INITIAL,
        "levels": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "band_margin": {"type": "number", "minimum": 0},
            },
        },
        "verifier": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "checks": {"type": "array", "items": {"enum": list(CHECKS)}, "uniqueItems": True},
                "family": {"oneOf": [{"const": "fixed"},
                                     {"type": "object", "additionalProperties": False,
                                      "required": ["seed"],
                                      "properties": {"seed": {"type": "integer"}}}]},
                "family_radius": {"type": "number", "exclusiveMinimum": 0},
                "family_window": {"type": "array", "items": {"type": "number", "minimum": 0},
                                  "minItems": 2, "maxItems": 2},
                "tolerances": {"type": "object",
                               "propertyNames": {"enum": list(CHECKS)}},
                "checkpoint": {"type": "number", "minimum": 0},
                "coarse_points_per_axis": {"type": "integer", "minimum": 16},
            },
        },
        "epsilon_ladder": {"type": "array", "items": _EPS, "minItems": 1},
        "comparison": {
            "type": "object", "additionalProperties": False, "required": ["initial_data"],
            "properties": {"initial_data": _INITIAL},
        },
        "relabel": {
            "type": "object", "additionalProperties": False,
            "properties": {"a": {"type": "number"}, "b": {"type": "number"}},
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "persist_snapshots": {"type": "boolean"},
                "emit_svg": {"type": "boolean"},
            },
        },
    },
}

_KH = re.compile(r"^([0-9]*\.?[0-9]+)h$")


def resolve_epsilon(value, grid):
    """A number, or ``"<k>h"`` for ``k`` grid spacings."""
    if isinstance(value, str):
        m = _KH.match(value)
        if not m:
            raise ConfigError(f"bad epsilon {value!r}")
        return float(m.group(1)) * grid.spacing
    return float(value)


def _bump(d, cls=RadialBump):
    return cls(tuple(float(c) for c in d["center"]), float(d["inner_radius"]),
               float(d["cap"]), d.get("blend"))


def parse_initial_data(d):
    shape = d["shape"]
    kind = shape["kind"]
    if kind == "Constant":
        obj = Constant()
    elif kind == "RadialBump":
        obj = _bump(shape)
    elif kind == "NeumannHalfBump":
        obj = _bump(shape, NeumannHalfBump)
    else:
        obj = TwoBumps(_bump(shape["first"]), _bump(shape["second"]))
    return InitialDataSpec(obj, float(d.get("level_offset", 0.0)))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    grid: GridSpec
    params: SolverParams
    initial: InitialDataSpec
    level_count: int
    band_margin: Optional[float]
    checks: tuple
    family_seed: Optional[int]
    family_radius: float
    family_window: tuple
    tolerances: dict
    checkpoint: Optional[float]
    coarse_points: Optional[int]
    epsilon_ladder: Optional[tuple]
    comparison: Optional[InitialDataSpec]
    relabel: Optional[tuple]
    output_dir: Optional[str]
    persist_snapshots: bool
    emit_svg: bool
    raw: dict

    def tolerance(self, check):
        return self.tolerances[check]

    def levels(self):
        """``level_count`` equally spaced levels across the certified band."""
        import numpy as np

        if self.initial.cap == 0:
            return []
        lo, hi = self.initial.level_band(self.band_margin)
        if self.level_count == 1:
            return [self.initial.level_offset]
        return [float(s) for s in np.linspace(lo, hi, self.level_count)]


def validate(raw):
    """Schema-check ``raw`` and build an :class:`ExperimentConfig`; raises ConfigError."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    try:
        g = raw["grid"]
        grid = GridSpec(g["dimension"], float(g["half_width"]), int(g["points_per_axis"]),
                        g.get("boundary_regime", "FarFieldConstant"))
        s = raw["solver"]
        params = SolverParams(resolve_epsilon(s["epsilon"], grid), float(s["t_end"]),
                              float(s.get("dt_safety", 0.5)), s.get("snapshot_interval"))
        initial = parse_initial_data(raw["initial_data"])
        check_margin(initial, grid)
        v = raw.get("verifier", {})
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(v.get("tolerances", {}))
        family = v.get("family", "fixed")
        ladder = raw.get("epsilon_ladder")
        cmp_ = raw.get("comparison")
        rel = raw.get("relabel")
        out = raw.get("outputs", {})
        lv = raw.get("levels", {})
        window = tuple(v.get("family_window", (0.01, 0.05)))
        if window[0] >= window[1]:
            raise ConfigError("family_window must be increasing")
        return ExperimentConfig(
            name=raw["name"], grid=grid, params=params, initial=initial,
            level_count=int(lv.get("count", 5)), band_margin=lv.get("band_margin"),
            checks=tuple(v.get("checks", ())),
            family_seed=None if family == "fixed" else int(family["seed"]),
            family_radius=float(v.get("family_radius", 0.15)),
            family_window=window, tolerances=tol, checkpoint=v.get("checkpoint"),
            coarse_points=v.get("coarse_points_per_axis"),
            epsilon_ladder=None if ladder is None else tuple(resolve_epsilon(e, grid) for e in ladder),
            comparison=None if cmp_ is None else _checked(parse_initial_data(cmp_["initial_data"]), grid),
            relabel=None if rel is None else (float(rel.get("a", 0.3)), float(rel.get("b", 1.0))),
            output_dir=out.get("directory"),
            persist_snapshots=bool(out.get("persist_snapshots", False)),
            emit_svg=bool(out.get("emit_svg", True)),
            raw=copy.deepcopy(raw),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _checked(spec, grid):
    check_margin(spec, grid)
    return spec


def load(path):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate(raw)


# --- presets --------------------------------------------------------------------

def _grid(n, d=2, regime="FarFieldConstant"):
    return {"dimension": d, "half_width": 1.0, "points_per_axis": n, "boundary_regime": regime}


def _circle(center=(0.0, 0.0), radius=0.4, cap=0.2, kind="RadialBump"):
    return {"shape": {"kind": kind, "center": list(center), "inner_radius": radius, "cap": cap},
            "level_offset": 0.0}


_CIRCLE_CHECKS = [
    "radius_rel_err", "energy_monotone", "energy_dissipation", "curvature_mass_monotone",
    "residual_distV", "residual_distMC", "residual_lvlV", "residual_lvlMC",
    "refinement_decay", "v_square_stability", "level_dissipation", "circle_level_equality",
    "l1_continuity", "perimeter_bound", "coarea_contour", "layer_cake",
]


def _presets():
    return {
        "stationary": {
            "name": "stationary",
            "grid": _grid(65),
            "solver": {"epsilon": "1h", "t_end": 0.06, "snapshot_interval": 0.001},
            "initial_data": {"shape": {"kind": "Constant"}, "level_offset": 0.3},
            "verifier": {"checks": ["stationary_residuals", "energy_monotone",
                                    "curvature_mass_monotone", "far_field"]},
        },
        "shrinking_circle": {
            "name": "shrinking_circle",
            "grid": _grid(257),
            "solver": {"epsilon": "1h", "t_end": 0.06, "snapshot_interval": 0.001},
            "initial_data": _circle(),
            "levels": {"count": 5},
            "verifier": {"checks": list(_CIRCLE_CHECKS), "family": "fixed",
                         "coarse_points_per_axis": 129},
        },
        "nested_circles_comparison": {
            "name": "nested_circles_comparison",
            "grid": _grid(129),
            "solver": {"epsilon": "1h", "t_end": 0.04, "snapshot_interval": 0.001},
            "initial_data": _circle(radius=0.3),
            "comparison": {"initial_data": _circle(radius=0.4)},
            "verifier": {"checks": ["comparison", "curvature_mass_monotone", "energy_monotone"]},
        },
        "two_bumps": {
            "name": "two_bumps",
            "grid": _grid(129),
            "solver": {"epsilon": "1h", "t_end": 0.015, "snapshot_interval": 0.001},
            "initial_data": {"shape": {
                "kind": "TwoBumps",
                "first": {"center": [-0.33, 0.0], "inner_radius": 0.2, "cap": 0.1},
                "second": {"center": [0.33, 0.0], "inner_radius": 0.2, "cap": 0.1},
            }, "level_offset": 0.0},
            "levels": {"count": 5},
            "verifier": {"checks": ["curvature_mass_monotone", "energy_monotone",
                                    "perimeter_bound", "coarea_contour"],
                         "tolerances": {"perimeter_bound": 0.05}},
        },
        "neumann_half_circle": {
            "name": "neumann_half_circle",
            "grid": _grid(257, regime="NeumannBox"),
            "solver": {"epsilon": "1h", "t_end": 0.06, "snapshot_interval": 0.001},
            "initial_data": _circle(center=(-1.0, 0.0), kind="NeumannHalfBump"),
            "levels": {"count": 5},
            "verifier": {"checks": ["radius_rel_err", "residual_distMC", "curvature_mass_monotone",
                                    "energy_monotone"],
                         "tolerances": {"radius_rel_err": 0.03}},
        },
        "relabel_ladder": {
            "name": "relabel_ladder",
            "grid": _grid(129),
            "solver": {"epsilon": "1h", "t_end": 0.06, "snapshot_interval": 0.001},
            "initial_data": _circle(),
            "epsilon_ladder": ["4h", "2h", "1h"],
            "relabel": {"a": 0.3, "b": 1.0},
            "verifier": {"checks": ["relabel_ladder", "affine_relabel", "curvature_mass_ladder",
                                    "hsq_ladder", "curvature_mass_monotone"]},
        },
        "epsilon_ladder_3d_small": {
            "name": "epsilon_ladder_3d_small",
            "grid": _grid(65, d=3),
            "solver": {"epsilon": "1h", "t_end": 0.02, "snapshot_interval": 0.001},
            "initial_data": _circle(center=(0.0, 0.0, 0.0)),
            "epsilon_ladder": ["4h", "2h", "1h"],
            "verifier": {"checks": ["radius_rel_err", "curvature_mass_monotone", "curvature_mass_ladder",
                                    "energy_monotone"],
                         "tolerances": {"radius_rel_err": 0.05}},
        },
    }


PRESET_NAMES = tuple(_presets())


def preset(name):
    """Raw JSON-ready dict of a named preset."""
    table = _presets()
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(table)}")
    return table[name]


def presets():
    """All presets as validated configs, keyed by name."""
    return {name: validate(raw) for name, raw in _presets().items()}
