import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from neurospike import lif, traceio
from neurospike.cli import main


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


@pytest.fixture(scope="module")
def fig3_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig3")
    assert main(["reproduce-fig3", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def certified_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("cert")
    assert main(["simulate", "certified", "--out", str(out / "run")]) == 0
    assert main(["design", "--a", "1", "--alpha", "0.5", "--mu", "0.5", "--psi", "0.6", "--sigma", "0.6",
                 "--out", str(out / "design")]) == 0
    return out / "run" / "trace.csv", out / "design" / "certificate.json"


class TestSimulate:
    def test_nominal_summary(self, tmp_path, capsys):
        code, out = run(["simulate", "fig3-nominal", "--out", tmp_path, "--svg"], capsys)
        assert code == 0
        m = re.search(r"(\d+) jumps, ultimate bound ([0-9.]+)", out.out)
        assert int(m.group(1)) == 73
        assert abs(float(m.group(2)) - 0.375) <= 0.02

    def test_noisy_completes_bounded(self, tmp_path):
        assert main(["simulate", "fig3-noisy-asym", "--out", str(tmp_path)]) == 0
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["summary"]["ultimate_bound"] <= 1.2

    def test_malformed_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, out = run(["simulate", bad, "--out", tmp_path / "o"], capsys)
        assert code == 2 and "error" in out.err

    def test_jump_limit_exit(self, tmp_path, capsys):
        code, out = run(["simulate", "fig3-nominal", "--jmax", "5", "--out", tmp_path], capsys)
        assert code == 3 and "jump_limit" in out.err

    def test_scenario_file(self, tmp_path):
        p = lif.save_scenario(lif.fig3_nominal(t_end=2.0), tmp_path / "s.json")
        assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 0
        man = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert man["scenario"]["hash"] == lif.fig3_nominal(t_end=2.0).digest()

    def test_manifest_complete(self, tmp_path):
        assert main(["simulate", "certified", "--svg", "--out", str(tmp_path)]) == 0
        man = json.loads((tmp_path / "manifest.json").read_text())
        for key in ("scenario", "solver", "outputs", "versions", "runtime_s", "summary"):
            assert key in man
        for p in man["outputs"].values():
            assert Path(p).is_file() and Path(p).stat().st_size > 0
        assert {"jump_count", "ultimate_bound", "min_interspike_all"} <= set(man["summary"])

    def test_csv_round_trip_exact(self, tmp_path, nominal_trace):
        assert main(["simulate", "fig3-nominal", "--out", str(tmp_path)]) == 0
        back = traceio.read_trace_csv(tmp_path / "trace.csv")
        np.testing.assert_array_equal(back.t, nominal_trace.t)
        np.testing.assert_array_equal(back.j, nominal_trace.j)
        np.testing.assert_array_equal(back.q, nominal_trace.q)
        assert [jr.active_guard for jr in back.jumps] == [jr.active_guard for jr in nominal_trace.jumps]
        events = traceio.read_events_csv(tmp_path / "events.csv")
        assert len(events) == len(nominal_trace.jumps)

    def test_svg_markers_match_jumps(self, tmp_path, nominal_trace):
        assert main(["simulate", "fig3-nominal", "--svg", "--out", str(tmp_path)]) == 0
        svg = (tmp_path / "input.svg").read_text()
        ts = [float(v) for v in re.findall(r'class="spike"[^>]*data-t="([^"]+)"', svg)]
        assert ts == nominal_trace.jump_times.tolist()

    def test_io_failure(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, out = run(["simulate", "fig3-nominal", "--t-end", "0.5", "--out", blocker / "sub"], capsys)
        assert code == 6


class TestDesign:
    def test_reference(self, capsys):
        code, out = run(["design", "--a", "1", "--alpha", "0.5", "--mu", "0.5", "--psi", "0.6", "--sigma", "0.6"],
                        capsys)
        assert code == 0
        cert = json.loads(out.out)
        assert cert["rho"] == pytest.approx(0.5, rel=1e-12)
        assert cert["delta"] == pytest.approx(1 / 6, rel=1e-12)
        assert cert["gamma"] == pytest.approx(0.31623, abs=1e-5)
        assert cert["tau"] == pytest.approx(0.10417, abs=1e-5)
        assert "admissible sigma interval" in out.err

    def test_delta_too_large(self, capsys):
        code, out = run(["design", "--a", "1", "--alpha", "0.5", "--mu", "0.5", "--rho", "0.3", "--delta", "0.2"],
                        capsys)
        assert code == 4 and "delta" in out.err

    def test_infeasible_radius(self, capsys):
        code, out = run(["design", "--psi", "0.2", "--alpha", "0.5"], capsys)
        assert code == 4

    def test_psi_and_rho_exclusive(self, capsys):
        code, _ = run(["design", "--a", "1", "--alpha", "0.5", "--mu", "0.5", "--rho", "0.3", "--psi", "1"], capsys)
        assert code == 2


class TestCertify:
    def test_certified_passes(self, certified_files, tmp_path, capsys):
        trace, cert = certified_files
        code, out = run(["certify", "--trace", trace, "--cert", cert, "--out", tmp_path], capsys)
        assert code == 0
        assert json.loads((tmp_path / "report.json").read_text())["ok"] is True

    def test_nominal_against_small_certificate(self, tmp_path, capsys):
        assert main(["simulate", "fig3-nominal", "--out", str(tmp_path / "run")]) == 0
        assert main(["design", "--a", "1", "--alpha", "0.5", "--mu", "0.5", "--rho", "0.3", "--sigma", "0.99",
                     "--out", str(tmp_path / "d")]) == 0
        capsys.readouterr()
        code, out = run(["certify", "--trace", tmp_path / "run" / "trace.csv", "--cert",
                         tmp_path / "d" / "certificate.json", "--x0", "20"], capsys)
        assert code == 5
        rep = json.loads(out.out)
        assert rep["precondition_ok"] is False
        assert any(v["quantity"] == "initial_condition" for v in rep["violations"])

    def test_empty_trace(self, certified_files, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        code, _ = run(["certify", "--trace", empty, "--cert", certified_files[1]], capsys)
        assert code == 2

    def test_bad_certificate(self, certified_files, tmp_path, capsys):
        bad = tmp_path / "c.json"
        bad.write_text('{"rho": 2}')
        code, _ = run(["certify", "--trace", certified_files[0], "--cert", bad], capsys)
        assert code == 2


class TestReproduceFig3:
    def test_summary_ranges(self, fig3_dir):
        s = json.loads((fig3_dir / "summary.json").read_text())
        assert 0.355 <= s["ultimate_bound"] <= 0.395
        assert 0.0045 <= s["min_interspike_all"] <= 0.0055
        assert 0.321 <= s["min_interspike_steady"] <= 0.361

    def test_artifacts(self, fig3_dir):
        man = json.loads((fig3_dir / "manifest.json").read_text())
        for p in man["outputs"].values():
            assert Path(p).stat().st_size > 0
        rows = (fig3_dir / "comparison.csv").read_text().splitlines()
        assert len(rows) == 4 and all(r.endswith("True") for r in rows[1:])

    def test_rerun_bit_identical(self, fig3_dir, tmp_path):
        assert main(["reproduce-fig3", "--out", str(tmp_path)]) == 0
        for sub in ("nominal", "noisy"):
            for name in ("trace.csv", "events.csv"):
                assert (tmp_path / sub / name).read_bytes() == (fig3_dir / sub / name).read_bytes()
        for name in ("fig3_state.svg", "fig3_input.svg"):
            assert (tmp_path / name).read_bytes() == (fig3_dir / name).read_bytes()

    def test_seed_changes_only_noisy(self, fig3_dir, tmp_path):
        assert main(["reproduce-fig3", "--seed", "7", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "nominal" / "trace.csv").read_bytes() == (fig3_dir / "nominal" / "trace.csv").read_bytes()
        assert (tmp_path / "noisy" / "trace.csv").read_bytes() != (fig3_dir / "noisy" / "trace.csv").read_bytes()

    def test_input_markers(self, fig3_dir):
        svg = (fig3_dir / "fig3_input.svg").read_text()
        n = sum(len(traceio.read_events_csv(fig3_dir / s / "events.csv")) for s in ("nominal", "noisy"))
        assert svg.count('class="spike"') == n


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "neurospike", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "neurospike" in out.stdout


def test_out_default_not_shared(tmp_path, monkeypatch):
    # without --out, design and certify print only and write nothing
    monkeypatch.chdir(tmp_path)
    assert main(["design", "--a", "1", "--alpha", "0.5", "--mu", "0.5", "--rho", "0.5", "--sigma", "0.6"]) == 0
    assert list(tmp_path.iterdir()) == []
