"""Command-line interface: subcommands, config merging, artifacts and
byte-level determinism."""
import json

import pytest

from baireext.cli import main, run_scenario
from baireext.scenarios import ScenarioConfig


class TestListDescribe:
    def test_list_names_all_scenarios(self, capsys):
        assert main(["list"]) == 0
        out = capsys.readouterr().out
        for name in ("S0", "S1", "S2", "S3"):
            assert name in out

    def test_describe_s2(self, capsys):
        assert main(["describe", "S2"]) == 0
        out = capsys.readouterr().out
        assert "S2" in out
        assert "UCPC" in out

    def test_describe_unknown_exits_2(self, capsys):
        assert main(["describe", "S9"]) == 2
        assert "unknown scenario" in capsys.readouterr().err


class TestRun:
    def test_run_s0_writes_artifacts(self, tmp_path, capsys):
        code = main(["run", "--scenario", "S0", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "S0: pass" in out
        assert (tmp_path / "S0_field.csv").exists()
        assert (tmp_path / "S0_diag.jsonl").exists()
        manifest = json.loads((tmp_path / "S0_manifest.json").read_text())
        assert manifest["verdict"] == "pass"
        assert manifest["counts"]["fail"] == 0
        assert len(manifest["reports"]) == 4

    def test_run_without_scenario_exits_2(self, capsys):
        assert main(["run"]) == 2
        assert "--scenario" in capsys.readouterr().err

    def test_unknown_scenario_exits_2(self, tmp_path, capsys):
        assert main(["run", "--scenario", "S9", "--out", str(tmp_path)]) == 2
        assert "unknown scenario" in capsys.readouterr().err

    def test_json_field_format(self, tmp_path):
        main(["run", "--scenario", "S0", "--out", str(tmp_path), "--format", "json"])
        rows = json.loads((tmp_path / "S0_field.json").read_text())
        assert isinstance(rows, list) and rows
        assert {"x", "dist_h", "n_of_x", "g", "g_smooth", "q_nt"} <= set(rows[0])

    def test_unsupported_mode_rejected(self):
        with pytest.raises(ValueError, match="supports modes"):
            run_scenario("S1", ScenarioConfig(mode="finite"))

    def test_diag_lines_are_json(self, tmp_path):
        main(["run", "--scenario", "S0", "--out", str(tmp_path)])
        lines = (tmp_path / "S0_diag.jsonl").read_text().strip().split("\n")
        stages = {json.loads(ln)["stage"] for ln in lines}
        assert "mollify" in stages


class TestConfigMerging:
    def test_config_file_sets_values(self, tmp_path, capsys):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"scenario": "S0", "grid": 31, "steps": 8}))
        code = main(["run", "--config", str(cfgfile), "--out", str(tmp_path)])
        assert code == 0
        manifest = json.loads((tmp_path / "S0_manifest.json").read_text())
        assert manifest["grid"] == 31
        assert manifest["steps"] == 8

    def test_flags_override_config(self, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"scenario": "S0", "grid": 31}))
        main(["run", "--config", str(cfgfile), "--grid", "41", "--out", str(tmp_path)])
        manifest = json.loads((tmp_path / "S0_manifest.json").read_text())
        assert manifest["grid"] == 41

    def test_unknown_config_key_rejected(self, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"scenario": "S0", "gird": 31}))
        with pytest.raises(ValueError, match="unknown config key"):
            main(["run", "--config", str(cfgfile), "--out", str(tmp_path)])


class TestDeterminism:
    def test_two_runs_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            code = main(["run", "--scenario", "S3", "--out", str(out), "--grid", "121"])
            assert code == 0
        for suffix in ("field.csv", "manifest.json", "diag.jsonl"):
            assert (a / f"S3_{suffix}").read_bytes() == (b / f"S3_{suffix}").read_bytes()
