"""
app/cli 명령행 통합 테스트
"""
import json

import pytest
import yaml

from app.cli.__main__ import main
from app.schemas.report import CheckRecord, VerificationReport


def _write_yaml(path, data):
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


class TestListCatalog:
    """list-catalog 테스트"""

    def test_lists_models_and_alias(self, capsys):
        assert main(["list-catalog"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 8
        assert lines[0].startswith("jacobi_hermite (constant velocity):")
        assert lines[-1].startswith("stark -> friedrichs (constant velocity):")
        assert "[N=512]" in lines[0]

    def test_output_is_deterministic(self, capsys):
        main(["list-catalog"])
        first = capsys.readouterr().out
        main(["list-catalog"])
        assert capsys.readouterr().out == first


class TestEmitPreset:
    """emit-preset 테스트"""

    def test_list(self, capsys):
        assert main(["emit-preset", "--list"]) == 0
        names = capsys.readouterr().out.split()
        assert "friedrichs-transport" in names

    def test_emit_to_path(self, tmp_path, capsys):
        target = tmp_path / "rf.yaml"
        assert main(["emit-preset", "rf-radial", "--out", str(target)]) == 0
        assert capsys.readouterr().out.strip() == str(target)
        assert yaml.safe_load(target.read_text())["run"]["checks"] == ["rf"]

    def test_unknown_preset(self, tmp_path):
        assert main(["emit-preset", "nope", "--out", str(tmp_path / "x.yaml")]) == 1


class TestRun:
    """run 과 단일 검사 서브커맨드 테스트"""

    def test_rf_preset(self, output_dir, capsys):
        assert main(["rf", "--preset", "rf-radial", "--out", str(output_dir)]) == 0
        assert "0 failed" in capsys.readouterr().out
        report = json.loads((output_dir / "report.json").read_text())
        assert report["config"]["run"]["checks"] == ["rf"]
        assert all(c["passed"] for c in report["checks"])

    def test_single_check_overrides_config(self, tmp_path, output_dir):
        path = _write_yaml(
            tmp_path / "exp.yaml",
            {"model": {"id": "friedrichs"}, "run": {"checks": ["rf", "commutators"]}},
        )
        assert main(["rf", "--config", path, "--out", str(output_dir), "--format", "json"]) == 0
        report = json.loads((output_dir / "report.json").read_text())
        assert report["config"]["run"]["checks"] == ["rf"]

    def test_unknown_preset(self, output_dir):
        assert main(["run", "--preset", "nope", "--out", str(output_dir)]) == 1

    def test_r_list_not_ascending(self, tmp_path, output_dir):
        path = _write_yaml(
            tmp_path / "bad.yaml",
            {
                "model": {"id": "friedrichs"},
                "filter": {"center": 0.0, "half_width": 1.0, "margin": 0.5},
                "run": {"checks": ["sojourn"], "r_list": [8.0, 4.0, 16.0, 24.0]},
            },
        )
        assert main(["run", "--config", path, "--out", str(output_dir)]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 1

    def test_config_and_preset_exclusive(self):
        with pytest.raises(SystemExit):
            main(["run", "--config", "a.yaml", "--preset", "rf-radial"])

    def test_failed_check_exit_code(self, mocker, output_dir, capsys):
        failing = VerificationReport(
            tool="t", version="v", checks=[CheckRecord.evaluate("ccr", "[T_f, H] = i", 1.0, 1e-6)]
        )
        mocker.patch("app.cli.__main__.run_experiment", return_value=failing)
        assert main(["run", "--preset", "rf-radial", "--out", str(output_dir)]) == 2
        assert "FAIL ccr" in capsys.readouterr().out

    def test_unexpected_error(self, mocker, output_dir):
        mocker.patch("app.cli.__main__.run_experiment", side_effect=RuntimeError("boom"))
        assert main(["run", "--preset", "rf-radial", "--out", str(output_dir)]) == 1

    def test_seed_and_jobs_forwarded(self, mocker, output_dir):
        run = mocker.patch(
            "app.cli.__main__.run_experiment", return_value=VerificationReport(tool="t", version="v")
        )
        main(["run", "--preset", "rf-radial", "--out", str(output_dir), "--seed", "5", "--jobs", "3"])
        _, kwargs = run.call_args
        assert kwargs == {"seed": 5, "jobs": 3}


class TestExportMatrices:
    """export-matrices 테스트"""

    def test_binary_dump(self, tmp_path, output_dir, capsys):
        path = _write_yaml(
            tmp_path / "small.yaml", {"model": {"id": "friedrichs", "params": {"N": 16, "box_length": 8.0}}}
        )
        assert main(["export-matrices", "--config", path, "--out", str(output_dir)]) == 0
        written = capsys.readouterr().out.split()
        assert [p.split("/")[-1] for p in written] == ["H.bin", "Phi_1.bin", "Hprime_1.bin"]

    def test_csv_dump(self, tmp_path, output_dir):
        path = _write_yaml(
            tmp_path / "small.yaml", {"model": {"id": "friedrichs", "params": {"N": 16, "box_length": 8.0}}}
        )
        assert main(["export-matrices", "--config", path, "--out", str(output_dir), "--matrix-format", "csv"]) == 0
        assert (output_dir / "H.csv").read_text().splitlines()[0] == "row,col,re,im"

    def test_requires_source(self):
        assert main(["export-matrices"]) == 1
