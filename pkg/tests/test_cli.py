import json
import subprocess
import sys

import numpy as np
import pytest

from phasenoise.cli import cli_dispatch
from phasenoise.io import parse_psd_csv, read_series_binary, read_series_csv, write_psd_csv
from phasenoise.model import OscillatorSpec, SpectrumModelParams, extended_psd, l_max
from phasenoise.spectral import PsdTrace


def run(argv, capsys):
    code = cli_dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestUsage:
    def test_no_arguments(self, capsys):
        code, _, err = run([], capsys)
        assert code == 2
        assert "usage" in err

    def test_unknown_flag(self, capsys):
        code, _, err = run(["model", "--kind", "lorentzian", "--bogus"], capsys)
        assert code == 2
        assert "usage" in err

    def test_missing_model_parameter(self, capsys):
        code, _, err = run(["model", "--kind", "lorentzian", "--f0", "5e5"], capsys)
        assert code == 2
        assert "--c" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "phasenoise"], capture_output=True, text=True)
        assert proc.returncode == 2


class TestModel:
    def test_lorentzian_plateau(self, tmp_path, capsys):
        out = tmp_path / "l.csv"
        code, _, _ = run(
            ["model", "--kind", "lorentzian", "--f0", "5e5", "--c", "1e-11", "--fmin", "1",
             "--fmax", "1e7", "-o", str(out)],
            capsys,
        )
        assert code == 0
        tr = parse_psd_csv(out)
        # f_3db ~ 7.85 Hz, so 1 Hz sits 0.07 dB under the plateau
        assert tr.levels[0] == pytest.approx(l_max(OscillatorSpec(5e5, 1e-11)), abs=0.1)
        assert tr.levels[0] < l_max(OscillatorSpec(5e5, 1e-11))
        assert tr.freqs[0] == 1.0 and tr.freqs[-1] == pytest.approx(1e7, rel=1e-12, abs=0)
        assert len(tr) == 701

    def test_extended_to_stdout(self, capsys):
        code, out, _ = run(
            ["model", "--kind", "extended", "--f3db-ref", "0.58", "--f-tr", "1865.7",
             "--f-pll", "197.9e3", "--f-nf", "1439.8e3", "--ppd", "10"],
            capsys,
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "offset_hz,psd_dbc_hz"
        f, level = map(float, lines[-1].split(","))
        params = SpectrumModelParams(0.58, 1865.7, 197.9e3, 1439.8e3)
        assert level == extended_psd(params, f)

    def test_pll_series(self, capsys):
        code, out, _ = run(
            ["model", "--kind", "pll-series", "--f0", "5e5", "--c-ref", "1e-16", "--c-vco",
             "1e-14", "--f-pll", "1e6", "--ppd", "5"],
            capsys,
        )
        assert code == 0
        assert len(out.splitlines()) == 37

    def test_invalid_values_exit_one(self, capsys):
        code, out, err = run(["model", "--kind", "lorentzian", "--f0", "5e5", "--c", "-1"], capsys)
        assert code == 1
        assert out == ""
        assert len(err.strip().splitlines()) == 1
        code, _, err = run(
            ["model", "--kind", "simplified", "--f3db-ref", "10", "--f-tr", "5", "--f-pll", "100"],
            capsys,
        )
        assert code == 1
        code, _, _ = run(["model", "--kind", "lorentzian", "--f0", "1", "--c", "1", "--fmin", "10", "--fmax", "1"], capsys)
        assert code == 1


class TestSim:
    def test_csv_series(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        code, _, _ = run(["sim", "--kind", "vco", "--c", "1e-11", "--fs", "1e8", "--n", "100",
                          "--seed", "4", "-o", str(out)], capsys)
        assert code == 0
        dt, alpha = read_series_csv(out)
        assert dt == pytest.approx(1e-8, rel=1e-9, abs=0)
        assert alpha.size == 100 and alpha[0] == 0.0

    def test_realizations_to_binary(self, tmp_path, capsys):
        out = tmp_path / "s.bin"
        code, _, _ = run(["sim", "--kind", "pll", "--c-ref", "1e-16", "--c-vco", "1e-14",
                          "--f-pll", "1e4", "--fs", "1e7", "--n", "50", "--realizations", "3",
                          "--format", "bin", "-o", str(out)], capsys)
        assert code == 0
        for r in range(3):
            dt, alpha = read_series_binary(tmp_path / f"s_r{r}.bin")
            assert alpha.size == 50

    def test_seed_from_environment(self, tmp_path, capsys, monkeypatch):
        args = ["sim", "--c", "1e-11", "--fs", "1e8", "--n", "20"]
        monkeypatch.setenv("PHASENOISE_SEED", "17")
        run(args + ["-o", str(tmp_path / "a.csv")], capsys)
        run(args + ["--seed", "17", "-o", str(tmp_path / "b.csv")], capsys)
        monkeypatch.setenv("PHASENOISE_SEED", "18")
        run(args + ["-o", str(tmp_path / "c.csv")], capsys)
        a, b, c = ((tmp_path / n).read_bytes() for n in ("a.csv", "b.csv", "c.csv"))
        assert a == b != c
        monkeypatch.setenv("PHASENOISE_SEED", "x")
        code, _, err = run(args + ["-o", str(tmp_path / "d.csv")], capsys)
        assert code == 1 and "PHASENOISE_SEED" in err

    def test_unstable_loop_fails_fast(self, tmp_path, capsys):
        code, _, err = run(["sim", "--kind", "pll", "--c-ref", "1e-16", "--c-vco", "1e-14",
                            "--f-pll", "1e6", "--fs", "1e6", "--n", "10", "-o", str(tmp_path / "x.csv")], capsys)
        assert code == 1 and "unstable" in err
        assert not (tmp_path / "x.csv").exists()

    def test_bad_counts_are_usage_errors(self, tmp_path, capsys):
        code, _, _ = run(["sim", "--c", "1e-11", "--fs", "1e8", "--n", "0", "-o", str(tmp_path / "x")], capsys)
        assert code == 2


class TestPsd:
    def test_from_file(self, tmp_path, capsys):
        series = tmp_path / "s.bin"
        run(["sim", "--c", "1e-11", "--fs", "1e8", "--n", "8192", "--format", "bin", "-o", str(series)], capsys)
        code, out, _ = run(["psd", "--input", str(series), "--f0", "5e5", "--segment-len", "1024"], capsys)
        assert code == 0
        rows = out.splitlines()
        assert rows[0] == "offset_hz,psd_dbc_hz"
        assert len(rows) == 1 + 511

    def test_simulated_vco_slope(self, tmp_path, capsys):
        out = tmp_path / "p.csv"
        code, _, _ = run(["psd", "--kind", "vco", "--c", "1e-11", "--f0", "5e5", "--fs", "1e8",
                          "--n", "20000", "--averages", "20", "--ppd", "10", "-o", str(out)], capsys)
        assert code == 0
        tr = parse_psd_csv(out)
        sel = tr.select((1e5, 3e6))
        slope = np.polyfit(np.log10(sel.freqs), sel.levels, 1)[0]
        assert slope == pytest.approx(-20, abs=1.5)

    def test_requires_source(self, capsys):
        code, _, _ = run(["psd", "--f0", "5e5"], capsys)
        assert code == 2

    def test_bad_overlap(self, capsys):
        code, _, err = run(["psd", "--f0", "5e5", "--c", "1e-11", "--fs", "1e8", "--n", "100",
                            "--overlap", "0.95"], capsys)
        assert code == 1 and "overlap" in err


class TestFit:
    def test_bundled_example_matches_reference(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, _, _ = run(["fit", "--example", "ubx", "-o", str(out)], capsys)
        assert code == 0
        data = json.loads(out.read_text())
        assert data["f_3db_ref_hz"] == pytest.approx(0.58, rel=0.05, abs=0)
        assert data["f_3db_vco_hz"] == pytest.approx(630, rel=0.05, abs=0)
        assert data["c_ref_s"] == pytest.approx(4.58e-20, rel=0.05, abs=0)
        assert data["c_vco_s"] == pytest.approx(5.01e-17, rel=0.05, abs=0)
        assert data["f_tr_hz"] == pytest.approx(1865.7, rel=0.05, abs=0)
        assert data["f_pll_hz"] == pytest.approx(197.9e3, rel=0.05, abs=0)
        assert data["f_nf_hz"] == pytest.approx(1439.8e3, rel=0.05, abs=0)
        assert data["level_tr_dbc_hz"] == pytest.approx(-107.9, abs=0.5)
        assert data["level_nf_dbc_hz"] == pytest.approx(-133.7, abs=0.5)

    def test_cbx_example(self, capsys):
        code, out, _ = run(["fit", "--example", "cbx"], capsys)
        assert code == 0
        assert json.loads(out)["f_pll_hz"] == pytest.approx(26.6e3, rel=0.15, abs=0)

    def test_manual_bounds(self, tmp_path, capsys):
        f = np.logspace(0, 7, 701)
        trace = PsdTrace(f, extended_psd(SpectrumModelParams(0.58, 1865.7, 197.9e3, 1439.8e3), f))
        write_psd_csv(trace, tmp_path / "t.csv")
        code, out, _ = run(["fit", str(tmp_path / "t.csv"), "--ref", "1", "1e3", "--transition", "3e3",
                            "1e5", "--vco", "3e5", "1e6", "--noise-floor", "3e6", "1e7"], capsys)
        assert code == 0
        assert json.loads(out)["f_3db_vco_hz"] == pytest.approx(637.7, rel=1e-3, abs=0)

    def test_partial_bounds_rejected(self, capsys):
        code, _, _ = run(["fit", "--example", "ubx", "--ref", "1", "1e3"], capsys)
        assert code == 2

    def test_fit_failure_is_one_line(self, tmp_path, capsys):
        f = np.logspace(0, 7, 701)
        write_psd_csv(PsdTrace(f, np.full(f.size, -150.0)), tmp_path / "flat.csv")
        code, _, err = run(["fit", str(tmp_path / "flat.csv")], capsys)
        assert code == 1
        assert len(err.strip().splitlines()) == 1
        assert "classify_regions" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["fit", str(tmp_path / "none.csv")], capsys)
        assert code == 1 and "none.csv" in err

    def test_parse_error_reports_line(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("offset_hz,psd_dbc_hz\n1,2\nx,3\n")
        code, _, err = run(["fit", str(p)], capsys)
        assert code == 1 and "bad.csv:3" in err
