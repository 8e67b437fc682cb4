"""CLI contract: exit codes, emitted files, determinism."""

import json

import pytest
from click.testing import CliRunner

from gllab.cli import RunConfig, main
from gllab.errors import InvalidSpecError

TWO_POINT = {
    "n": 7,
    "points": [{"id": "w", "index": 3, "level": 0.25},
               {"id": "z", "index": 4, "level": 0.75}],
    "boundary": {"4->3": [[1]]},
}


@pytest.fixture()
def runner():
    return CliRunner()


class TestRunConfig:
    def test_defaults_valid(self):
        cfg = RunConfig()
        assert cfg.format == "csv"

    def test_invariants(self):
        with pytest.raises(InvalidSpecError):
            RunConfig(junction_tolerance=0.0)
        with pytest.raises(InvalidSpecError):
            RunConfig(density=32)
        with pytest.raises(InvalidSpecError):
            RunConfig(format="xml")


class TestTorpedoCmd:
    def test_success_emits_files(self, runner, tmp_path):
        res = runner.invoke(main, ["--output-dir", str(tmp_path),
                                   "torpedo", "--delta", "0.5", "--n", "7"])
        assert res.exit_code == 0
        assert (tmp_path / "torpedo_profile.csv").exists()
        assert (tmp_path / "torpedo_curvature.csv").exists()
        # min R reported >= tube value (n-1)(n-2)/delta^2 = 120
        assert "min scalar curvature" in res.output
        val = float(res.output.split(":")[1])
        assert val >= 120.0 - 1e-6

    def test_invalid_delta_exit_2(self, runner):
        res = runner.invoke(main, ["torpedo", "--delta", "0"])
        assert res.exit_code == 2

    def test_json_format(self, runner, tmp_path):
        res = runner.invoke(main, ["--output-dir", str(tmp_path),
                                   "--format", "json",
                                   "torpedo", "--delta", "0.5"])
        assert res.exit_code == 0
        payload = json.loads((tmp_path / "torpedo.json").read_text())
        assert payload["schema"] == 1
        assert payload["min_scalar"] > 0


class TestBendCmd:
    def test_model_constants_exit_0(self, runner, tmp_path):
        res = runner.invoke(main, ["--output-dir", str(tmp_path), "bend",
                                   "--r0q", "1.5", "--q", "3"])
        assert res.exit_code == 0
        head = (tmp_path / "bend_margins.csv").read_text().splitlines()[0]
        assert head == "s,t,r,k,theta,margin"

    def test_r0_zero_exit_3(self, runner):
        res = runner.invoke(main, ["bend", "--r0q", "0"])
        assert res.exit_code == 3

    def test_emit_isotopy(self, runner, tmp_path):
        res = runner.invoke(main, ["--output-dir", str(tmp_path), "bend",
                                   "--r0q", "1.5", "--q", "3",
                                   "--emit-isotopy"])
        assert res.exit_code == 0
        lines = (tmp_path / "bend_isotopy.csv").read_text().splitlines()
        assert lines[0] == "s,margin"
        assert len(lines) == 22
        assert all(float(ln.split(",")[1]) > 0 for ln in lines[1:])


class TestMorseCmd:
    def test_two_point_plan(self, runner, tmp_path):
        src = tmp_path / "desc.json"
        src.write_text(json.dumps(TWO_POINT))
        res = runner.invoke(main, ["--output-dir", str(tmp_path),
                                   "morse", str(src)])
        assert res.exit_code == 0
        plan = json.loads((tmp_path / "plan.json").read_text())["plan"]
        assert len(plan["steps"]) == 1

    def test_inexact_exit_4(self, runner, tmp_path):
        bad = dict(TWO_POINT, boundary={"4->3": [[0]]})
        src = tmp_path / "desc.json"
        src.write_text(json.dumps(bad))
        res = runner.invoke(main, ["morse", str(src)])
        assert res.exit_code == 4

    def test_excess_index1_auxiliary(self, runner, tmp_path):
        desc = {"n": 6,
                "points": [{"id": "x", "index": 1, "level": 0.3},
                           {"id": "y", "index": 2, "level": 0.7}],
                "boundary": {"2->1": [[1]]},
                "flags": {"simply_connected": True}}
        src = tmp_path / "desc.json"
        src.write_text(json.dumps(desc))
        res = runner.invoke(main, ["--output-dir", str(tmp_path),
                                   "morse", str(src)])
        assert res.exit_code == 0
        plan = json.loads((tmp_path / "plan.json").read_text())["plan"]
        kinds = {s["kind"] for s in plan["steps"]}
        assert kinds == {"auxiliary-inserted"}


class TestDemoCmd:
    def test_demo_exit_0(self, runner, tmp_path):
        res = runner.invoke(main, ["--output-dir", str(tmp_path),
                                   "demo", "--n", "7", "--p", "2"])
        assert res.exit_code == 0
        lines = (tmp_path / "demo_stages.csv").read_text().splitlines()
        assert lines[0] == "stage,min_scalar"
        assert all(float(ln.split(",")[1]) > 0 for ln in lines[1:])

    def test_q_violation_exit_2(self, runner):
        res = runner.invoke(main, ["demo", "--n", "7", "--p", "4"])
        assert res.exit_code == 2


class TestDeterminism:
    def test_byte_identical_outputs(self, runner, tmp_path):
        outs = []
        for tag in ("a", "b"):
            d = tmp_path / tag
            res = runner.invoke(main, ["--output-dir", str(d), "demo",
                                       "--n", "5", "--p", "1"])
            assert res.exit_code == 0
            outs.append((d / "demo_stages.csv").read_bytes()
                        + (d / "demo_report.json").read_bytes())
        assert outs[0] == outs[1]

    def test_config_file(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"density": 128,
                                   "output_dir": str(tmp_path / "out")}))
        res = runner.invoke(main, ["--config", str(cfg),
                                   "torpedo", "--delta", "0.5"])
        assert res.exit_code == 0
        assert (tmp_path / "out" / "torpedo_profile.csv").exists()

    def test_bad_config_exit_2(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"density": 8}))
        res = runner.invoke(main, ["--config", str(cfg),
                                   "torpedo", "--delta", "0.5"])
        assert res.exit_code == 2
