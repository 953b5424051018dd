#!/usr/bin/env python3
"""
Test the validation suite runner and the command-line entry point
"""

import tempfile
from pathlib import Path

import orjson
import pytest

import main as cli_module
import wavefront_model
from errors import SingularChannelError
from logging_config import get_logger
from main import main as cli
from validation_suite import CHECKS, validate


def test_filter_by_group_runs_only_norm_checks():
    report = validate("norms")
    assert report.results
    assert {r.group for r in report.results} == {"norms"}
    assert report.passed, report.render()
    assert "confirmed: N[3/2 - 2U]" in report.discrepancy


def test_filter_by_name_substring():
    report = validate("coplanar_limit")
    assert [r.name for r in report.results] == ["coplanar_limit"]
    assert report.discrepancy is None


def test_derivative_checks_pass():
    report = validate("derivatives")
    assert report.passed, report.render()
    assert report.exit_code == 0


def test_flipped_distance_vector_fails_derivative_check():
    """A wrong sign in the in-plane distance vector must be caught"""
    original = wavefront_model.aux_coplanar

    def flipped(layout, target):
        v1, v2 = original(layout, target)
        return v1, -v2

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(wavefront_model, "aux_coplanar", flipped)
        report = validate("derivatives")
    assert not report.passed
    assert report.exit_code == 3
    failed = {r.name for r in report.results if not r.passed}
    assert "steering_derivatives_uca" in failed
    assert "steering_derivatives_upa" not in failed
    assert "steering_derivatives_uca" in report.render()


def test_every_check_has_a_known_group():
    groups = {group for _, group, _ in CHECKS}
    assert groups == {"derivatives", "norms", "fim", "crb", "beamformer", "vqf", "trends"}
    names = [name for name, _, _ in CHECKS]
    assert len(names) == len(set(names))


def test_cli_exit_codes():
    assert cli(["validate", "--filter", "norms"]) == 0
    with tempfile.TemporaryDirectory() as tmp:
        bad = Path(tmp) / "bad.json"
        bad.write_bytes(orjson.dumps({"sweep": {"axis": "rho", "values": [1.0]}}))
        assert cli(["sweep", str(bad)]) == 1

        strict = Path(tmp) / "strict.json"
        strict.write_bytes(orjson.dumps({
            "array": {"n_t": 16, "n_r": 16},
            "target": {"rho": [0.3]},
            "sweep": {"axis": "gamma_db", "values": [200.0]},
            "methods": ["vqf"],
        }))
        assert cli(["optimize", str(strict)]) == 2

        out = Path(tmp) / "crb.json"
        assert cli(["crb", str(strict), "--out", str(out), "--seed", "3"]) == 0
        documents = orjson.loads(out.read_bytes())
        assert len(documents) == 1
        assert documents[0]["parameters"] == ["rho", "phi"]
        assert documents[0]["speb"] > 0

        table = Path(tmp) / "rows.csv"
        assert cli(["sweep", str(strict), "--out", str(table)]) == 0
        assert table.read_text().splitlines()[0].startswith("sweep_axis,sweep_value,method")


def test_cli_rejects_bad_seed_and_reports_run_failures():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "point.json"
        path.write_bytes(orjson.dumps({
            "array": {"n_t": 16, "n_r": 16},
            "target": {"rho": [0.3]},
            "sweep": {"axis": "p_max_dbm", "values": [20.0]},
        }))
        assert cli(["crb", str(path), "--seed", "-1"]) == 1

        def singular(config):
            raise SingularChannelError("steering vector vanished")

        with pytest.MonkeyPatch.context() as mp:
            mp.setattr(cli_module, "crb_command", singular)
            assert cli(["crb", str(path)]) == 4


def test_logger_accepts_optional_name():
    for name in (None, "nfisac.test"):
        log = get_logger(name)
        log.info("logger_ready", name=name)


def main():
    tests = [
        test_filter_by_group_runs_only_norm_checks,
        test_filter_by_name_substring,
        test_derivative_checks_pass,
        test_flipped_distance_vector_fails_derivative_check,
        test_every_check_has_a_known_group,
        test_cli_exit_codes,
        test_cli_rejects_bad_seed_and_reports_run_failures,
        test_logger_accepts_optional_name,
    ]
    print("✔️ Testing validation suite and CLI")
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
