import copy
import json
import subprocess
import sys

import pytest

from lsmcf import ConfigError
from lsmcf import config as cfgmod
from lsmcf.cli import main
from lsmcf.experiment import EXIT_OK, EXIT_TOLERANCE, EXIT_VALIDATION, run_experiment


def small_circle(**over):
    raw = {
        "name": "small_circle",
        "grid": {"dimension": 2, "half_width": 1.0, "points_per_axis": 33},
        "solver": {"epsilon": "1h", "t_end": 0.02, "snapshot_interval": 0.001},
        "initial_data": {"shape": {"kind": "RadialBump", "center": [0.0, 0.0],
                                   "inner_radius": 0.4, "cap": 0.2}},
        "levels": {"count": 3},
        "verifier": {"checks": ["radius_rel_err", "energy_monotone", "curvature_mass_monotone",
                                "residual_distV", "residual_lvlMC", "perimeter_bound"],
                     "family_window": [0.002, 0.018],
                     "tolerances": {"radius_rel_err": 0.05,
                                    "residual_distV": 0.2, "residual_lvlMC": 0.2}},
    }
    raw.update(over)
    return raw


def write_config(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


# --- validation -------------------------------------------------------------------

def test_all_presets_validate():
    cfgs = cfgmod.presets()
    assert set(cfgs) == set(cfgmod.PRESET_NAMES)
    for name, cfg in cfgs.items():
        assert cfg.name == name
        assert all(c in cfgmod.CHECKS for c in cfg.checks)


def test_epsilon_in_grid_spacings():
    cfg = cfgmod.validate(small_circle())
    assert cfg.params.epsilon == pytest.approx(cfg.grid.spacing)
    raw = small_circle(epsilon_ladder=["4h", "0.5h", 0.01])
    cfg = cfgmod.validate(raw)
    h = cfg.grid.spacing
    assert cfg.epsilon_ladder == pytest.approx((4 * h, 0.5 * h, 0.01))


@pytest.mark.parametrize("mutate", [
    lambda r: r.update(unknown=1),
    lambda r: r["grid"].update(points_per_axis=8),
    lambda r: r["grid"].update(dimension=4),
    lambda r: r["solver"].update(epsilon="h2"),
    lambda r: r["solver"].update(epsilon=0.0),
    lambda r: r["initial_data"]["shape"].update(kind="Square"),
    lambda r: r["verifier"].update(checks=["no_such_check"]),
    lambda r: r["verifier"]["tolerances"].update(bogus=1.0),
    lambda r: r["verifier"].update(family_window=[0.03, 0.01]),
    lambda r: r["initial_data"]["shape"].update(center=[0.5, 0.0]),   # face margin
    lambda r: r.pop("solver"),
])
def test_invalid_configs_raise_config_error(mutate):
    raw = copy.deepcopy(small_circle())
    mutate(raw)
    with pytest.raises(ConfigError):
        cfgmod.validate(raw)


def test_default_tolerances_and_overrides():
    cfg = cfgmod.validate(small_circle())
    assert cfg.tolerance("radius_rel_err") == 0.05
    assert cfg.tolerance("layer_cake") == cfgmod.DEFAULT_TOLERANCES["layer_cake"]
    assert set(cfgmod.DEFAULT_TOLERANCES) == set(cfgmod.CHECKS)


def test_levels_span_the_band():
    cfg = cfgmod.validate(small_circle())
    assert cfg.levels() == pytest.approx([-0.14, 0.0, 0.14])
    const = cfgmod.validate(cfgmod.preset("stationary"))
    assert const.levels() == []


def test_unknown_preset():
    with pytest.raises(ConfigError):
        cfgmod.preset("nope")


# --- command line -----------------------------------------------------------------

def test_cli_invalid_config_exits_3_and_writes_nothing(tmp_path, capsys):
    raw = small_circle()
    raw["grid"]["points_per_axis"] = 8
    out = tmp_path / "out"
    code = main(["run", "--config", str(write_config(tmp_path, raw)), "--out", str(out)])
    assert code == EXIT_VALIDATION == 3
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "invalid-config" and err["exit_code"] == 3
    assert "points_per_axis" in err["error"]
    assert not out.exists()


def test_cli_unreadable_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 3
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 3


def test_cli_preset_stationary(tmp_path, capsys):
    code = main(["preset", "stationary", "--out", str(tmp_path)])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "passed" and summary["exit_code"] == 0
    assert summary["checks"]["stationary_residuals"]["value"] <= 1e-12
    assert summary["checks"]["far_field"]["value"] == 0.0
    assert "PASS  stationary_residuals" in capsys.readouterr().out


def test_cli_dump_config(capsys):
    assert main(["preset", "shrinking_circle", "--dump-config", "--points", "65"]) == 0
    raw = json.loads(capsys.readouterr().out)
    assert raw["grid"]["points_per_axis"] == 65
    assert "coarse_points_per_axis" not in raw["verifier"]
    # the stored preset itself is untouched
    assert cfgmod.preset("shrinking_circle")["grid"]["points_per_axis"] == 257


def test_cli_tolerance_failure_exits_2(tmp_path):
    raw = small_circle()
    raw["verifier"]["tolerances"]["radius_rel_err"] = 1e-9
    code = main(["run", "--config", str(write_config(tmp_path, raw)), "--out", str(tmp_path / "o")])
    assert code == EXIT_TOLERANCE == 2
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["status"] == "failed"
    assert not summary["checks"]["radius_rel_err"]["passed"]


def test_run_writes_artifacts(tmp_path):
    res = run_experiment(cfgmod.validate(small_circle()), tmp_path)
    assert res.exit_code == 0, res.summary["checks"]
    names = {p.name for p in tmp_path.iterdir()}
    assert {"summary.json", "diagnostics.csv", "residuals.csv", "energy.svg",
            "curvature_mass.svg", "level_lengths.svg", "radius.svg"} <= names
    header = (tmp_path / "diagnostics.csv").read_text().splitlines()[0].split(",")
    assert header[:5] == ["time", "E_eps", "E_tv", "curvature_mass", "hsq_mass"]
    assert {"volume_L0", "length_L2", "coarea_L1", "dissipation_L0"} <= set(header)
    assert res.summary["certification"]["growth"] <= 3.0
    assert "far_field_deviation" in res.summary["diagnostics"]


def test_runs_are_deterministic(tmp_path):
    cfg = cfgmod.validate(small_circle())
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b")
    for name in ("diagnostics.csv", "residuals.csv", "energy.svg", "radius.svg",
                 "level_lengths.svg", "curvature_mass.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    assert a.summary["checks"] == b.summary["checks"]


def test_thread_count_does_not_change_results(tmp_path, monkeypatch):
    raw = small_circle(epsilon_ladder=["4h", "2h", "1h"], relabel={"a": 0.3, "b": 1.0})
    raw["solver"]["t_end"] = 0.01
    raw["verifier"] = {"checks": ["relabel_ladder", "curvature_mass_ladder", "hsq_ladder"]}
    cfg = cfgmod.validate(raw)
    monkeypatch.setenv("LSMCF_THREADS", "1")
    one = run_experiment(cfg, tmp_path / "one").summary["checks"]
    monkeypatch.setenv("LSMCF_THREADS", "3")
    three = run_experiment(cfg, tmp_path / "three").summary["checks"]
    assert one == three


def test_verify_persisted_snapshots(tmp_path):
    raw = small_circle(outputs={"persist_snapshots": True, "emit_svg": False})
    raw["verifier"]["checks"].append("refinement_decay")
    raw["verifier"]["coarse_points_per_axis"] = 17
    cfg = cfgmod.validate(raw)
    first = run_experiment(cfg, tmp_path / "run")
    snaps = tmp_path / "run" / "snapshots"
    assert (snaps / "manifest.json").exists()
    assert not (tmp_path / "run" / "energy.svg").exists()
    code = main(["verify", "--snapshots", str(snaps)])
    summary = json.loads((tmp_path / "run" / "verify" / "summary.json").read_text())
    # checks that need new solver runs are skipped; the others reproduce exactly
    assert set(summary["skipped"]) == {"energy_monotone", "refinement_decay"}
    for name in ("radius_rel_err", "residual_distV", "residual_lvlMC", "perimeter_bound"):
        assert summary["checks"][name] == first.summary["checks"][name]
    assert code == 0


def test_verify_missing_directory(tmp_path):
    assert main(["verify", "--snapshots", str(tmp_path / "nothing")]) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lsmcf", "preset", "stationary", "--dump-config"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["name"] == "stationary"
