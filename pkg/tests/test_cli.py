import json
from pathlib import Path

import pytest

from nl2gds import cli

from conftest import FIXTURES, SPECS


def run_cli(args):
    return cli.main([str(a) for a in args])


class TestUsage:
    def test_missing_pdk_is_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            run_cli(["run", "--netlist", FIXTURES / "ota5t.sp", "--out", tmp_path])
        assert err.value.code == 2

    def test_missing_netlist_file(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            run_cli(["run", "--netlist", tmp_path / "nope.sp", "--pdk", "mock14",
                     "--out", tmp_path])
        assert err.value.code == 2

    def test_malformed_netlist_exit_2_with_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.sp"
        bad.write_text(".subckt a p m\nq1 p m pnp\n.ends\n")
        code = run_cli(["parse-only", "--netlist", bad, "--out", tmp_path])
        assert code == 2
        assert "line 2" in capsys.readouterr().err


class TestPipeline:
    def test_full_run_ota(self, tmp_path):
        code = run_cli(["run", "--netlist", FIXTURES / "ota5t.sp", "--pdk", "mock14",
                        "--spec", SPECS / "ota5t.spec", "--out", tmp_path,
                        "--emit-gds", "--emit-dot", "--report-parasitics"])
        assert code == 0
        for name in ("netlist.json", "annotation.json", "placed.json",
                     "layout.json", "layout.gds", "graph.dot",
                     "parasitics.csv", "summary.json"):
            assert (tmp_path / name).exists(), name
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["ok"] and summary["drc_violations"] == 0
        assert [s["name"] for s in summary["stages"]] == list(cli.STAGES)

    def test_same_seed_byte_identical(self, tmp_path):
        args = ["run", "--netlist", FIXTURES / "ota5t.sp", "--pdk", "mock14",
                "--spec", SPECS / "ota5t.spec", "--seed", "5"]
        assert run_cli(args + ["--out", tmp_path / "a"]) == 0
        assert run_cli(args + ["--out", tmp_path / "b"]) == 0
        a = (tmp_path / "a" / "layout.json").read_bytes()
        b = (tmp_path / "b" / "layout.json").read_bytes()
        assert a == b

    def test_stage_split_equals_monolithic(self, tmp_path):
        mono = tmp_path / "mono"
        split = tmp_path / "split"
        base = ["--netlist", FIXTURES / "caparray.sp", "--pdk", "mock14"]
        assert run_cli(["run"] + base + ["--out", mono]) == 0
        assert run_cli(["parse-only"] + base + ["--out", split]) == 0
        assert run_cli(["annotate-only", "--out", split]) == 0
        assert run_cli(["place-only", "--pdk", "mock14", "--out", split]) == 0
        assert run_cli(["route-only", "--pdk", "mock14", "--out", split]) == 0
        assert run_cli(["drc-only", "--pdk", "mock14", "--out", split]) == 0
        assert ((mono / "layout.json").read_bytes()
                == (split / "layout.json").read_bytes())

    def test_drc_only_on_golden_layout(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["run", "--netlist", FIXTURES / "r2r.sp", "--pdk", "mock14",
                        "--out", out]) == 0
        assert run_cli(["drc-only", "--pdk", "mock14", "--out", out]) == 0
        assert (out / "drc.txt").read_text() == ""

    def test_failure_writes_partials(self, tmp_path, capsys):
        spec = tmp_path / "bad.spec"
        spec.write_text("budget out 0.001\n")     # unroutable budget
        code = run_cli(["run", "--netlist", FIXTURES / "ota5t.sp", "--pdk", "mock14",
                        "--spec", spec, "--out", tmp_path / "o"])
        assert code == 1
        failed = tmp_path / "o" / "failed"
        assert failed.exists()
        assert (failed / "summary.json").exists()
        summary = json.loads((failed / "summary.json").read_text())
        assert "failed" in summary
