from __future__ import annotations

import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from compcap.cli import parse_param_grid, run
from compcap.errors import ParameterOutOfRange
from compcap.optimize import SolveReport
from compcap.simulate import SimReport

EXAMPLES = Path(__file__).resolve().parents[1] / "examples"
FAST = ["--starts", "4"]


def call(*argv: str) -> tuple[int, str]:
    out = io.StringIO()
    code = run(list(argv), stdout=out)
    return code, out.getvalue()


class TestCommands:
    def test_cr_json_round_trips(self):
        code, out = call("cr", "--family", "builtin:bilingual_erasure?eps=0.5", "--format", "json", *FAST)
        assert code == 0
        report = json.loads(out)
        assert report["value"] == pytest.approx(2 / 3, abs=1e-3)
        assert report["seed"] == 0
        SolveReport.from_dict(report)

    def test_capacity_from_file(self):
        code, out = call("capacity", "--family", str(EXAMPLES / "bsc01.json"))
        assert code == 0
        assert json.loads(out)["channels"][0]["capacity"] == pytest.approx(0.531004, abs=1e-6)

    def test_concat(self):
        code, out = call("concat", "--rates", "6,4,3", "--k", "12")
        report = json.loads(out)
        assert report["decode_times"] == ["2", "3", "4"]
        assert report["phase_lengths"] == ["2", "1", "1"]

    @pytest.mark.parametrize(
        "argv",
        [
            ["cr", "--metric", "single"],
            ["cr", "--metric", "compound"],
            ["regret"],
            ["regret", "--metric", "single"],
            ["weighted-cr", "--weights", "1,2"],
            ["weighted-regret", "--weights", "1,2"],
        ],
    )
    def test_solver_variants(self, argv):
        code, out = call(*argv, "--family", "builtin:zs?z=0.3&s=0.4", "--seed", "5", *FAST)
        assert code == 0
        report = json.loads(out)
        assert report["seed"] == 5
        SolveReport.from_dict(report)

    def test_reduce(self):
        code, out = call("reduce", "--family", "builtin:zs?z=0.3&s=0.4", "--weights", "1,1.5", *FAST)
        assert code == 0
        assert 0 < json.loads(out)["value"] < 1

    def test_simulate_json_and_csv(self):
        base = ["simulate", "--family", "builtin:bilingual_erasure?eps=0.5", "--k", "4", "--trials", "3", *FAST]
        code, out = call(*base)
        assert code == 0
        report = json.loads(out)
        SimReport.from_dict(report)
        assert report["seed"] == 0
        code, out = call(*base, "--format", "csv", "--channel", "1")
        assert out.splitlines()[0] == "trial,channel,stop_time,correct"
        assert len(out.splitlines()) == 4

    def test_sweep_csv(self, tmp_path):
        target = tmp_path / "sweep.csv"
        code, _ = call(
            "sweep", "--family", "builtin:zs", "--param-grid", "z=0.2,0.4;s=0.3",
            "--metric", "cr_lb", "--format", "csv", "--out", str(target), *FAST,
        )
        assert code == 0
        lines = target.read_text().splitlines()
        assert lines[0] == "z,s,cr_lb,error"
        assert len(lines) == 3

    def test_split_sweep(self):
        code, out = call("sweep", "--family", "builtin:bilingual?W1=31&W2=2", "--metric", "split",
                         "--param-grid", "p=0:1:0.5", "--format", "csv")
        assert code == 0
        assert len(out.splitlines()) == 4

    def test_text_format(self):
        code, out = call("concat", "--rates", "4", "--k", "8", "--format", "text")
        assert "decode_times" in out

    def test_deterministic(self):
        argv = ["cr", "--family", "builtin:zs?z=0.2&s=0.7", "--seed", "3", *FAST]
        assert call(*argv) == call(*argv)


class TestErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["capacity", "--family", "missing.json"],
            ["capacity", "--family", "builtin:nope"],
            ["cr", "--family", "builtin:zs?z=2"],
            ["cr"],
            ["cr", "--family", "builtin:zs", "--metric", "bogus"],
            ["concat", "--rates", "3,0", "--k", "4"],
            ["concat", "--rates", "x", "--k", "4"],
            ["reduce", "--family", "builtin:bsc_pair", "--weights", "1,1", "--starts", "2"],
        ],
    )
    def test_exit_two(self, argv, capsys):
        assert call(*argv)[0] == 2
        assert "error" in capsys.readouterr().err

    def test_bad_json_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert call("capacity", "--family", str(bad))[0] == 2

    def test_argparse_error(self):
        with pytest.raises(SystemExit) as info:
            run(["frobnicate"])
        assert info.value.code == 2


class TestParamGrid:
    def test_range_and_list(self):
        grid = parse_param_grid("z=0.1:0.3:0.1;s=0.5,0.6")
        assert grid == {"z": [0.1, 0.2, 0.3], "s": [0.5, 0.6]}

    def test_bad(self):
        with pytest.raises(ParameterOutOfRange):
            parse_param_grid("z")
        with pytest.raises(ParameterOutOfRange):
            parse_param_grid("z=1:0:0.1")


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "compcap", "concat", "--rates", "3,3", "--k", "6"],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(proc.stdout)["decode_times"] == ["2", "2"]
