"""Command-line interface: formats, round-trips, exit codes."""

import json
import math

import pytest

from polarcap.cli import SWEEP_COLUMNS, main
from polarcap.model import ApskInput
from polarcap.quantizer import PolarQuantizerConfig


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestKernelCmd:
    def test_uniform_row_at_nu_zero(self, capsys):
        code, out, _ = run(capsys, "kernel", "--b1", "2", "--b2", "0",
                           "--nu", "0")
        assert code == 0
        assert out.count("0.250000000") >= 4
        assert "total: 1.000000000" in out

    def test_row_sums_printed(self, capsys):
        code, out, _ = run(capsys, "kernel", "--b1", "1", "--b2", "1",
                           "--thresholds", "1.0", "--nu", "2.0",
                           "--theta", "0.5")
        assert code == 0
        assert "total: 1.000000000" in out

    def test_theta_shift_is_cyclic_shift(self, capsys):
        _, out1, _ = run(capsys, "kernel", "--b1", "2", "--b2", "1",
                         "--thresholds", "1.0", "--nu", "3.0",
                         "--theta", "0.2")
        _, out2, _ = run(capsys, "kernel", "--b1", "2", "--b2", "1",
                         "--thresholds", "1.0", "--nu", "3.0",
                         "--theta", str(0.2 + math.pi / 2))
        rows1 = [l.split(":")[1] for l in out1.splitlines() if l.startswith("y1=")]
        rows2 = [l.split(":")[1] for l in out2.splitlines() if l.startswith("y1=")]
        assert rows2 == rows1[-1:] + rows1[:-1]

    def test_wrong_threshold_count_is_usage_error(self, capsys):
        code, _, err = run(capsys, "kernel", "--b1", "1", "--b2", "1",
                           "--nu", "0")
        assert code == 2
        assert "thresholds" in err

    def test_missing_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["kernel", "--b1", "2"])
        assert exc.value.code == 2


class TestOptimizeCmd:
    def test_solution_json_and_round_trip(self, capsys, tmp_path):
        out_path = tmp_path / "sol.json"
        code, out, _ = run(capsys, "optimize", "--b1", "2", "--b2", "1",
                           "--snr-db", "0", "--skip-ktc",
                           "--out", str(out_path))
        assert code == 0
        d = json.loads(out_path.read_text())
        assert d == json.loads(out)
        assert 0.797 <= d["capacity"] <= 0.817
        inp = ApskInput.from_dict(d["input"])
        cfg = PolarQuantizerConfig.from_dict(d["quantizer"])
        assert inp.b1 == cfg.b1 == 2
        # serialization is lossless for the solution fields
        assert inp.to_dict() == d["input"] or ApskInput.from_dict(
            json.loads(json.dumps(d["input"]))) == inp

    def test_unwritable_output_exits_5(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(capsys, "optimize", "--b1", "1", "--b2", "0",
                "--snr-db", "0", "--skip-ktc",
                "--out", "/nonexistent-dir/x.json")
        assert exc.value.code == 5


@pytest.fixture(scope="module")
def solution_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "sol.json"
    code = main(["optimize", "--b1", "2", "--b2", "1", "--snr-db", "0",
                 "--skip-ktc", "--out", str(path)])
    assert code == 0
    return path


class TestKtcCmd:
    def test_pass_on_optimized_solution(self, capsys, solution_file):
        code, out, _ = run(capsys, "ktc", "--solution", str(solution_file))
        assert code == 0
        report = json.loads(out)
        assert report["verdict"] == "pass"
        assert report["mu"] >= 0.0

    def test_fail_on_perturbed_solution(self, capsys, solution_file,
                                        tmp_path):
        d = json.loads(solution_file.read_text())
        # move origin mass onto the ring, keeping the power equality: a
        # feasible but suboptimal neighbor of the optimum
        beta0 = d["input"]["beta0"] * 0.7
        d["input"]["beta0"] = beta0
        ring = d["input"]["rings"][0]
        ring["beta"] = 1.0 - beta0
        ring["rho"] = d["channel"]["power"] / ring["beta"]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(d))
        code, out, _ = run(capsys, "ktc", "--solution", str(bad))
        assert code == 4
        assert json.loads(out)["verdict"] == "fail"

    def test_malformed_solution_exits_2(self, capsys, tmp_path):
        bad = tmp_path / "junk.json"
        bad.write_text("{\"not\": \"a solution\"}")
        with pytest.raises(SystemExit) as exc:
            run(capsys, "ktc", "--solution", str(bad))
        assert exc.value.code == 2


class TestMcCmd:
    def test_summary_line(self, capsys, solution_file, tmp_path):
        out_csv = tmp_path / "counts.csv"
        code, out, _ = run(capsys, "mc", "--solution", str(solution_file),
                           "--n", "100000", "--seed", "1",
                           "--out", str(out_csv))
        assert code == 0
        assert "max_cell_z=" in out
        assert "OK" in out
        assert out_csv.read_text().startswith("symbol,y1,y2,count")


class TestSweepCmd:
    def test_csv_contract(self, capsys, tmp_path):
        out_csv = tmp_path / "sweep.csv"
        code, _, _ = run(capsys, "sweep", "--snr-from", "-2", "--snr-to", "2",
                         "--snr-step", "2", "--b1", "1", "--b2", "1",
                         "--skip-ktc", "--out", str(out_csv))
        assert code == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 4
        caps = [float(l.split(",")[1]) for l in lines[1:]]
        assert all(b >= a - 1e-6 for a, b in zip(caps, caps[1:]))
        for line in lines[1:]:
            ratio = float(line.split(",")[3])
            assert 0.0 < ratio < 1.0


class TestMisoCmd:
    def test_single_antenna_matches_optimize(self, capsys, solution_file):
        code, out, _ = run(capsys, "miso", "--g-vec", "1:0", "--b1", "2",
                           "--b2", "1", "--snr-db", "0", "--skip-ktc")
        assert code == 0
        d = json.loads(out)
        ref = json.loads(solution_file.read_text())
        assert d["capacity"] == ref["capacity"]
        assert d["input"] == ref["input"]
        assert d["thresholds"] == ref["thresholds"]

    def test_complex_gains_parsed(self, capsys):
        code, out, _ = run(capsys, "miso", "--g-vec", "0.6:0,0:0.8",
                           "--b1", "1", "--b2", "0", "--snr-db", "0",
                           "--skip-ktc")
        assert code == 0
        d = json.loads(out)
        assert d["beamformer"][0]["re"] == pytest.approx(0.6)
        assert d["beamformer"][1]["im"] == pytest.approx(0.8)
