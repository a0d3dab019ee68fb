import os
import re
import subprocess
import sys
import time

import numpy as np
import pytest

from ssblpd import bundle, cli, nr_phy
from ssblpd import experiment as ex

FAST = ["--set", "n_drops=2", "--set", "n_realizations=2", "--set", "observation_time_s=0.006"]


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def small_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("b") / "bundle"
    assert cli.main(["run", *FAST, "--seed", "5", "-o", str(out)]) == 0
    return out


class TestRun:
    def test_smoke_default_window(self, tmp_path, capsys):
        out = tmp_path / "smoke"
        t = time.perf_counter()
        code, stdout, _ = run(["run", "--set", "n_drops=1", "--set", "n_realizations=1", "-o", str(out)], capsys)
        assert code == 0 and "2 trials" in stdout
        assert time.perf_counter() - t < 60
        names = {p.name for p in out.iterdir()}
        assert {"config.yaml", "trials.jsonl", "distance.tsv", "summary.json"} <= names
        assert len([n for n in names if n.startswith("roc_")]) == 6

    def test_bundle_well_formed(self, small_bundle):
        cfg = bundle.read_config(small_bundle)
        assert cfg.n_drops == 2 and cfg.seed == 5
        assert len(bundle.read_trials(small_bundle)) == 2 * 2 * 2
        for path in bundle.roc_files(small_bundle, cfg.arms).values():
            roc = bundle.read_roc(path)
            assert np.all(np.isfinite(roc.thresholds))
        s = bundle.read_summary(small_bundle)
        assert s["seed"] == 5 and s["version"] == bundle.version() and s["n_trials"] == 8
        assert s["source_hash"] == bundle.source_hash()
        for line in (small_bundle / "distance.tsv").read_text().splitlines()[1:]:
            fields = line.split("\t")
            assert len(fields) == len(bundle.DISTANCE_COLUMNS)
            assert all(f == "null" or f in ("true", "false") or np.isfinite(float(f)) for f in fields[1:])

    def test_same_seed_byte_identical_roc_tables(self, small_bundle, tmp_path):
        again = tmp_path / "again"
        assert cli.main(["run", *FAST, "--seed", "5", "-o", str(again)]) == 0
        for path in small_bundle.glob("roc_*.tsv"):
            assert (again / path.name).read_bytes() == path.read_bytes()

    def test_config_file_and_echo(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.yaml"
        cfg_path.write_text("n_drops: 1\nn_realizations: 1\nobservation_time_s: 0.006\narms: [proposed]\n")
        out = tmp_path / "o"
        code, _, _ = run(["run", "-c", str(cfg_path), "-o", str(out)], capsys)
        assert code == 0
        assert bundle.read_config(out).arms == ("proposed",)

    def test_missing_config_no_output(self, tmp_path, capsys):
        out = tmp_path / "never"
        code, stdout, err = run(["run", "-c", str(tmp_path / "missing.yaml"), "-o", str(out)], capsys)
        assert code == 1 and "missing.yaml" in err
        assert not out.exists() and list(tmp_path.iterdir()) == []

    def test_bad_config_names_key_and_line(self, tmp_path, capsys):
        p = tmp_path / "bad.yaml"
        p.write_text("n_drops: 1\naccess:\n  max_pwr: 3\n")
        code, _, err = run(["run", "-c", str(p), "-o", str(tmp_path / "o")], capsys)
        assert code == 1 and "access.max_pwr (line 3)" in err

    def test_unknown_override(self, tmp_path, capsys):
        code, _, err = run(["run", "--set", "nope=1", "-o", str(tmp_path / "o")], capsys)
        assert code == 1 and "nope" in err

    def test_usage_errors(self, capsys):
        assert run([], capsys)[0] == 1
        assert run(["frobnicate"], capsys)[0] == 1
        assert run(["run"], capsys)[0] == 1

    def test_unwritable_output_is_runtime_error(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, _, err = run(["run", *FAST, "--set", "n_drops=1", "-o", str(blocker / "sub")], capsys)
        assert code == 2 and err


class TestWorkersEnv:
    def capture_workers(self, monkeypatch):
        seen = {}

        def fake(cfg, workers=1, on_unit=None):
            seen["workers"] = workers
            return ex.aggregate(cfg, ex.run_unit(cfg, 0, 0))

        monkeypatch.setattr(ex, "run_campaign", fake)
        return seen

    def test_env_sets_default(self, monkeypatch, tmp_path):
        seen = self.capture_workers(monkeypatch)
        monkeypatch.setenv("SSBLPD_WORKERS", "3")
        assert cli.main(["run", *FAST, "--set", "n_drops=1", "-o", str(tmp_path / "o")]) == 0
        assert seen["workers"] == 3

    def test_flag_beats_env(self, monkeypatch, tmp_path):
        seen = self.capture_workers(monkeypatch)
        monkeypatch.setenv("SSBLPD_WORKERS", "3")
        assert cli.main(["run", *FAST, "-w", "1", "--set", "n_drops=1", "-o", str(tmp_path / "o")]) == 0
        assert seen["workers"] == 1

    @pytest.mark.parametrize("value", ["zero", "0"])
    def test_bad_env(self, monkeypatch, tmp_path, capsys, value):
        monkeypatch.setenv("SSBLPD_WORKERS", value)
        code, _, err = run(["run", *FAST, "-o", str(tmp_path / "o")], capsys)
        assert code == 1 and "SSBLPD_WORKERS" in err


class TestReport:
    def test_summary_lines(self, small_bundle, capsys):
        code, out, _ = run(["report", str(small_bundle), "--no-figures"], capsys)
        assert code == 0
        assert "eve corr pd reduction" in out and "percentage points" in out
        assert "baseline (4 trials)" in out and "proposed (4 trials)" in out

    def test_pfa_one_reports_all_ones(self, small_bundle, tmp_path, capsys):
        code, out, _ = run(["report", str(small_bundle), "--pfa", "1.0", "--plots-dir", str(tmp_path),
                            "--no-figures"], capsys)
        assert code == 0
        pd_lines = [l for l in out.splitlines() if re.match(r"  (baseline|proposed) \(\d+ trials\): ue ", l)]
        values = [float(v) for l in pd_lines for v in re.findall(r" (\d\.\d{3})", l)]
        assert len(values) == 6 and all(v == 1.0 for v in values)

    def test_plot_files_strictly_monotone_in_pfa(self, small_bundle, tmp_path, capsys):
        assert run(["report", str(small_bundle), "--plots-dir", str(tmp_path)], capsys)[0] == 0
        rocs = sorted(tmp_path.glob("roc_*.dat"))
        assert len(rocs) == 6
        for path in rocs:
            data = np.loadtxt(path, skiprows=1, ndmin=2)
            assert data.shape[1] == 2 and np.all(np.diff(data[:, 0]) > 0)
        assert len(list(tmp_path.glob("distance_*.dat"))) == 4
        assert (tmp_path / "roc.png").stat().st_size > 0 and (tmp_path / "distance.png").stat().st_size > 0

    def test_no_figures(self, small_bundle, tmp_path, capsys):
        assert run(["report", str(small_bundle), "--plots-dir", str(tmp_path), "--no-figures"], capsys)[0] == 0
        assert not list(tmp_path.glob("*.png"))

    @pytest.mark.parametrize("victim", ["trials.jsonl", "config.yaml", "roc_proposed_eve_corr.tsv"])
    def test_corrupt_bundle_names_file(self, small_bundle, tmp_path, capsys, victim):
        import shutil
        copy = tmp_path / "copy"
        shutil.copytree(small_bundle, copy)
        with open(copy / victim, "a") as fh:
            fh.write("{garbage: [\n" if victim != "roc_proposed_eve_corr.tsv" else "1.0\tnan\t0.5\n")
        code, _, err = run(["report", str(copy)], capsys)
        assert code == 2 and victim in err

    def test_missing_bundle(self, tmp_path, capsys):
        code, _, err = run(["report", str(tmp_path / "nothing")], capsys)
        assert code == 2 and "config.yaml" in err

    def test_bad_pfa(self, small_bundle, capsys):
        assert run(["report", str(small_bundle), "--pfa", "1.5"], capsys)[0] == 1


class TestSelftest:
    def test_all_pass_within_a_minute(self, capsys):
        t = time.perf_counter()
        code, out, _ = run(["selftest"], capsys)
        assert code == 0, out
        assert time.perf_counter() - t < 60
        for name in ("pss_sequences", "sss_sequences", "ofdm_roundtrip", "noise_statistics", "power_control",
                     "diagonal_sanity"):
            assert f"PASS  {name}" in out

    def test_tampered_pss_named(self, monkeypatch, capsys):
        bad = nr_phy._X_PSS.copy()
        bad[10] ^= 1
        monkeypatch.setattr(nr_phy, "_X_PSS", bad)
        code, out, _ = run(["selftest", "--only", "pss_sequences", "--only", "sss_sequences"], capsys)
        assert code == 3
        assert "FAIL  pss_sequences" in out and "PASS  sss_sequences" in out
        assert "failed: pss_sequences" in out

    def test_unknown_check(self, capsys):
        assert run(["selftest", "--only", "nonsense"], capsys)[0] == 1


def test_console_entry_point(tmp_path):
    env = {**os.environ, "PYTHONPATH": os.pathsep.join(sys.path)}
    r = subprocess.run([sys.executable, "-m", "ssblpd", "selftest", "--only", "power_control"],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0 and "PASS  power_control" in r.stdout
    r = subprocess.run([sys.executable, "-m", "ssblpd", "report", str(tmp_path)], capture_output=True, text=True,
                       env=env)
    assert r.returncode == 2
