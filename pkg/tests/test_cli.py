import csv
import io
import json
import subprocess
import sys

import pytest

from relu_lab.cli import (
    ConfigError,
    RunRecord,
    build_parser,
    config_hash,
    load_config,
    main,
    resolve,
    run,
    thread_cap,
    version_string,
)
from relu_lab.gaussian_stats import OPT_THRESHOLD


def _resolve(argv):
    return resolve(build_parser().parse_args(argv))


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults(self):
        common, params = _resolve(["run-reduction"])
        assert common == {"seeds": [0], "workers": 1, "results_dir": "results"}
        assert params["d"] == 20 and params["m1"] == 100_000 and params["epsilon"] is None

    def test_flags_win_over_file(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('seeds = "0:3"\n[run-approx]\nd = 5\nm = 1000\n', encoding="utf-8")
        common, params = _resolve(["run-approx", "--config", str(cfg), "--d", "7"])
        assert common["seeds"] == [0, 1, 2] and params["d"] == 7 and params["m"] == 1000

    def test_unknown_key_has_line(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[verify-hermite]\nmax_degree = 5\nnodez = 3\n", encoding="utf-8")
        with pytest.raises(ConfigError, match=r"c\.toml:3: \[verify-hermite\]: unknown key 'nodez'"):
            load_config(cfg)

    @pytest.mark.parametrize("text", ['bogus = 1\n', '[verify-gap]\nk = 3\n', '[verify-gap]\nk = "two"\n',
                                      '[run-approx]\ncorruption = "flip-fraction:2"\n', 'seeds = "a,b"\n',
                                      '[run-reduction]\nd = 3\nk = 4\n', 'x = [\n'])
    def test_invalid_configs_exit_2(self, tmp_path, text, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text(text, encoding="utf-8")
        sub = text.split("]")[0].lstrip("[") if text.startswith("[") else "verify-hermite"
        assert main([sub, "--config", str(cfg), "--results-dir", str(tmp_path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_bad_flag_value(self, tmp_path):
        assert main(["sq-demo", "--tau", "-1", "--results-dir", str(tmp_path)]) == 2

    def test_seed_ranges(self):
        assert _resolve(["verify-hermite", "--seeds", "3,1:3"])[0]["seeds"] == [3, 1, 2]

    def test_hash_stability(self):
        _, a = _resolve(["run-approx", "--d", "4"])
        _, b = _resolve(["run-approx", "--d", "4", "--out", "x.json"])
        _, c = _resolve(["run-approx", "--d", "5"])
        assert config_hash("run-approx", a) == config_hash("run-approx", b) != config_hash("run-approx", c)
        assert config_hash("run-approx", dict(reversed(list(a.items())))) == config_hash("run-approx", a)
        assert len(config_hash("run-approx", a)) == 64


class TestRecords:
    def test_round_trip(self):
        rec = RunRecord("verify-gap", "ab" * 32, 3, {"x": 0.1 + 0.2, "y": -1e-300}, {"ok": True}, 1.5, "v", None)
        assert RunRecord.from_json(rec.to_json()) == rec
        bad = RunRecord("verify-gap", "h", 1, error="ValueError: boom")
        assert RunRecord.from_json(bad.to_json()) == bad and not bad.passed

    def test_version_is_self_describing(self):
        assert repr(OPT_THRESHOLD) in version_string() and "c2=" in version_string()

    def test_thread_cap(self, monkeypatch):
        monkeypatch.delenv("RELU_LAB_THREADS", raising=False)
        assert thread_cap(4) == 4
        monkeypatch.setenv("RELU_LAB_THREADS", "2")
        assert thread_cap(4) == 2 and thread_cap(1) == 1
        monkeypatch.setenv("RELU_LAB_THREADS", "zero")
        with pytest.raises(ConfigError):
            thread_cap(2)


class TestRun:
    def test_verify_hermite(self, tmp_path):
        assert main(["verify-hermite", "--results-dir", str(tmp_path)]) == 0
        rec = RunRecord.from_json((tmp_path / "verify-hermite.jsonl").read_text().splitlines()[0])
        assert rec.passed and {"relu_coefficients", "sign_coefficients", "orthonormality"} <= set(rec.verdicts)

    def test_summary_rows_and_append(self, tmp_path):
        argv = ["sq-demo", "--seeds", "0:3", "--steps", "2", "--m", "2000", "--results-dir", str(tmp_path),
                "--out", str(tmp_path / "trace.csv")]
        assert main(argv) == 0
        assert len(_rows(tmp_path / "sq-demo-summary.csv")) == 3
        trace = _rows(tmp_path / "trace.csv")
        assert len(trace) == 3 * 3 and list(trace[0]) == ["seed", "step", "loss", "queries"]
        assert main(argv) == 0
        assert len((tmp_path / "sq-demo.jsonl").read_text().splitlines()) == 6

    def test_reproducible(self, tmp_path):
        common, params = _resolve(["run-approx", "--d", "4", "--m", "2000", "--eval-samples", "5000",
                                   "--results-dir", str(tmp_path)])
        a = run("run-approx", common, params, io.StringIO())[1]
        b = run("run-approx", common, params, io.StringIO())[1]
        assert a[0].measured == b[0].measured and a[0].config_hash == b[0].config_hash

    def test_workers_keep_order(self, tmp_path):
        common, params = _resolve(["sq-demo", "--seeds", "0:4", "--steps", "1", "--m", "1000", "--workers", "3",
                                   "--results-dir", str(tmp_path)])
        status, recs = run("sq-demo", common, params, io.StringIO())
        assert status == 0 and [r.seed for r in recs] == [0, 1, 2, 3]

    def test_reduction_report(self, tmp_path):
        out = tmp_path / "rep.json"
        argv = ["run-reduction", "--d", "5", "--eta", "0", "--m1", "3000", "--m2", "3000", "--results-dir", str(tmp_path),
                "--out", str(out)]
        assert main(argv) == 0
        trial = json.loads(out.read_text())["trials"][0]
        assert trial["recovered"] == trial["truth"]

    def test_runtime_failure_exits_1(self, tmp_path):
        status, recs = run("sq-demo", *_resolve(["sq-demo", "--dataset", str(tmp_path / "missing.csv"),
                                                "--results-dir", str(tmp_path)]), stream=io.StringIO())
        assert status == 1 and recs[0].error and (tmp_path / "sq-demo.jsonl").exists()

    def test_gap_verdicts_reported(self, tmp_path):
        argv = ["verify-gap", "--mc-samples", "100000", "--gap-samples", "20000", "--results-dir", str(tmp_path)]
        main(argv)
        rec = RunRecord.from_json((tmp_path / "verify-gap.jsonl").read_text().splitlines()[0])
        assert rec.verdicts["above_lower_bound"] and rec.verdicts["gap_kept"]
        assert rec.measured["series"] == pytest.approx(0.06572522, abs=1e-8)

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "relu_lab", "--version"], capture_output=True, text=True, check=True)
        assert out.stdout.startswith("relu-lab ")
