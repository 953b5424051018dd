#!/usr/bin/env python3
"""
Test sweep config loading, point expansion, row evaluation and CSV output
"""

import math
import tempfile
from pathlib import Path

import orjson
import pandas as pd
import pytest

from beamformer_opt import isotropic_baseline
from errors import ConfigError
from models import RESULT_COLUMNS, MethodEnum
from sweep_harness import expand_points, load_config, parse_config, run_sweep, write_csv


def small_config(**overrides) -> dict:
    raw = {
        "name": "desk",
        "array": {"kind": "uca", "n_t": 16, "n_r": 16},
        "target": {"rho": [0.1, 0.3], "phi_deg": [30.0]},
        "user": {"rho": 2.0, "phi_deg": -30.0},
        "sweep": {"axis": "p_max_dbm", "values": [15.0, 25.0]},
        "gamma_db": 0.0,
        "methods": ["isotropic", "closed_form", "vqf"],
        "seed": 42,
    }
    raw.update(overrides)
    return raw


def test_parse_config_defaults_and_units():
    config = parse_config(small_config())
    assert config.fc_hz == 28e9
    assert config.gamma_linear == 1.0
    assert config.methods == [MethodEnum.ISOTROPIC, MethodEnum.CLOSED_FORM, MethodEnum.VQF]
    rate = parse_config(small_config(gamma_db=None, rate_min_bits=2.0))
    assert rate.gamma_linear == 3.0


def test_config_errors_name_the_field():
    raw = small_config()
    del raw["target"]
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert exc.value.field_path == "target"

    with pytest.raises(ConfigError) as exc:
        parse_config(small_config(target={"rho": [-1.0]}))
    assert exc.value.field_path == "target.rho"

    with pytest.raises(ConfigError):
        parse_config(small_config(unknown_key=1))
    with pytest.raises(ConfigError):
        parse_config(small_config(rate_min_bits=1.0))
    with pytest.raises(ConfigError):
        parse_config(small_config(sweep={"axis": "n_r", "values": [8.5]}))


def test_load_config_file_errors():
    with tempfile.TemporaryDirectory() as tmp:
        bad = Path(tmp) / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(bad)
        with pytest.raises(ConfigError):
            load_config(Path(tmp) / "missing.json")
        good = Path(tmp) / "good.json"
        good.write_bytes(orjson.dumps(small_config()))
        assert load_config(good).name == "desk"


def test_expand_points_order_and_axis_override():
    config = parse_config(small_config(sweep={"axis": "n_r", "values": [8, 32]}))
    points = expand_points(config)
    assert len(points) == 4
    assert [p.layout_r.count for p in points] == [8, 8, 32, 32]
    assert [p.target.rho for p in points] == [0.1, 0.3, 0.1, 0.3]
    assert all(p.layout_t.count == 16 for p in points)
    assert len({p.seed for p in points}) == 4


def test_swept_coordinate_ignores_its_target_list():
    config = parse_config(small_config(sweep={"axis": "rho", "values": [0.5, 1.0]}, methods=["isotropic"]))
    points = expand_points(config)
    assert [p.target.rho for p in points] == [0.5, 1.0]
    rows = run_sweep(config)
    assert [(r.sweep_value, r.rho) for r in rows] == [(0.5, 0.5), (1.0, 1.0)]

    config = parse_config(small_config(
        target={"rho": [0.1, 0.3], "phi_deg": [10.0, 20.0, 30.0]},
        sweep={"axis": "phi_deg", "values": [0.0, 45.0]},
    ))
    points = expand_points(config)
    assert len(points) == 4
    assert [p.target.rho for p in points] == [0.1, 0.3, 0.1, 0.3]
    assert [round(math.degrees(p.target.phi), 9) for p in points] == [0.0, 0.0, 45.0, 45.0]


def test_flags_inside_circle_and_near_field():
    config = parse_config(small_config())
    point = expand_points(config)[0]
    radius = point.layout_t.radius
    assert point.inside_circle == (0.1 < radius)
    assert point.near_field


def test_single_point_isotropic_matches_baseline():
    config = parse_config(small_config(
        target={"rho": [0.3]}, sweep={"axis": "p_max_dbm", "values": [25.0]}, methods=["isotropic"],
    ))
    rows = run_sweep(config)
    point = expand_points(config)[0]
    report = isotropic_baseline(point.scenario, point.layout_t, point.layout_r, point.target)
    assert len(rows) == 1
    assert rows[0].speb_m2 == report.speb
    assert rows[0].crb_rho == report.crbs["rho"]
    assert rows[0].crb_y is None
    assert math.isclose(rows[0].speb_db, 10 * math.log10(report.speb))


def test_rows_sorted_and_failures_recorded():
    config = parse_config(small_config(gamma_db=200.0))
    rows = run_sweep(config)
    assert len(rows) == 2 * 2 * 3
    keys = [(r.sweep_value, r.rho) for r in rows]
    assert keys == sorted(keys)
    assert [r.method for r in rows[:3]] == ["isotropic", "closed_form", "vqf"]
    failed = [r for r in rows if r.method != "isotropic"]
    assert all(r.status.startswith("InfeasibleScenarioError") for r in failed)
    assert all(r.status == "ok" for r in rows if r.method == "isotropic")


def test_isotropic_closed_reports_pole_as_unavailable():
    config = parse_config(small_config(methods=["isotropic_closed"]))
    radius = expand_points(config)[0].layout_t.radius
    config = parse_config(small_config(target={"rho": [radius]}, methods=["isotropic_closed"]))
    rows = run_sweep(config)
    assert all(r.status.startswith("unavailable") for r in rows)


def test_two_runs_write_identical_csv():
    config = parse_config(small_config(methods=["isotropic", "vqf", "oracle"], oracle_budget=2_000))
    with tempfile.TemporaryDirectory() as tmp:
        first = write_csv(run_sweep(config), Path(tmp) / "a.csv")
        second = write_csv(run_sweep(config), Path(tmp) / "b.csv")
        assert first.read_bytes() == second.read_bytes()
        frame = pd.read_csv(first)
        assert list(frame.columns) == RESULT_COLUMNS
        assert frame["wall_time_ms"].isna().all()


def test_noncoplanar_rows_carry_y_bound():
    config = parse_config(small_config(
        target={"rho": [0.3], "y": [0.1]}, methods=["isotropic", "isotropic_closed", "vqf"],
        sweep={"axis": "y", "values": [0.1, 0.2]},
    ))
    rows = run_sweep(config)
    assert all(r.crb_y is not None and r.crb_y > 0 for r in rows if r.status == "ok")
    assert [r.y for r in rows] == [0.1, 0.1, 0.1, 0.2, 0.2, 0.2]


def main():
    tests = [
        test_parse_config_defaults_and_units,
        test_config_errors_name_the_field,
        test_load_config_file_errors,
        test_expand_points_order_and_axis_override,
        test_swept_coordinate_ignores_its_target_list,
        test_flags_inside_circle_and_near_field,
        test_single_point_isotropic_matches_baseline,
        test_rows_sorted_and_failures_recorded,
        test_isotropic_closed_reports_pole_as_unavailable,
        test_two_runs_write_identical_csv,
        test_noncoplanar_rows_carry_y_bound,
    ]
    print("🧪 Testing sweep harness")
    print("=" * 50)
    failed = 0
    for test in tests:
        try:
            test()
            print(f"   ✅ {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"   ❌ {test.__name__}: {e}")
    print(f"\n{len(tests) - failed}/{len(tests)} passed")
    return failed == 0


if __name__ == "__main__":
    main()
