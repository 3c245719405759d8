"""Command-line behaviour: exit codes, file contracts, resume, and the
config-echo reproducibility guarantee."""

import copy
import json
import time

import pytest

from conjoint_wtp import cli
from conjoint_wtp.dataio import read_posterior_jsonl, write_json, write_posterior_jsonl
from conjoint_wtp.errors import FitError

BASE_CONFIG = {
    "seed": 424242,
    "scheme": {
        "attributes": [
            {"name": "storage", "levels": ["128GB", "256GB", "512GB"], "baseline": "128GB"},
            {"name": "camera", "levels": ["Standard", "Pro"], "baseline": "Standard"},
            {"name": "frame", "levels": ["Aluminum", "Titanium"], "baseline": "Aluminum"},
            {"name": "price", "levels": ["799", "899", "999", "1099", "1199"], "baseline": "799"},
        ],
        "price_attribute": "price",
    },
    "ground_truth": {
        "true_wtp": {
            "storage:256GB": 100.0,
            "storage:512GB": 250.0,
            "camera:Pro": 200.0,
            "frame:Titanium": 80.0,
        },
        "wtp_sd": {
            "storage:256GB": 25.0,
            "storage:512GB": 62.5,
            "camera:Pro": 50.0,
            "frame:Titanium": 20.0,
        },
        "price_coef_mean": -0.01,
        "price_coef_sd": 0.002,
    },
    "simulation": {
        "n_respondents": 25,
        "tasks_per_respondent": 10,
        "price_grid": [799, 899, 999, 1099, 1199],
    },
    "model": {
        "chains": 2,
        "draws_per_chain": 120,
        "warmup_per_chain": 150,
        "target_accept": 0.8,
    },
    "scenario": {
        "baseline": {
            "levels": {"storage": "128GB", "camera": "Standard", "frame": "Aluminum"},
            "price": 799.0,
        },
        "upgrades": {"camera": "Pro", "frame": "Titanium"},
        "price_grid": [799, 874, 949, 1024, 1099, 1174, 1249],
        "market_size": 300,
    },
}


def write_config(tmp_path, mutate=None, name="config.json"):
    config = copy.deepcopy(BASE_CONFIG)
    if mutate:
        mutate(config)
    path = tmp_path / name
    write_json(path, config)
    return path


def strip_timings(report_path):
    with open(report_path, encoding="utf-8") as f:
        report = json.load(f)
    report.pop("timings", None)
    return report


class TestSimulate:
    def test_writes_expected_row_count(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["simulate", "--config", str(config), "--out", str(out)]) == 0
        lines = (out / "choices.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 25 * 10 + 1
        assert "250" in capsys.readouterr().out
        assert (out / "provenance.json").exists()

    def test_repeat_run_is_byte_identical(self, tmp_path):
        config = write_config(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cli.main(["simulate", "--config", str(config), "--out", str(out_a)])
        cli.main(["simulate", "--config", str(config), "--out", str(out_b)])
        assert (out_a / "choices.csv").read_bytes() == (out_b / "choices.csv").read_bytes()

    def test_zero_respondents_exits_2_naming_field(self, tmp_path, capsys):
        def mutate(c):
            c["simulation"]["n_respondents"] = 0

        config = write_config(tmp_path, mutate)
        code = cli.main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")])
        assert code == 2
        assert "n_respondents" in capsys.readouterr().err

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        def mutate(c):
            c["simulation"]["typo_field"] = 1

        config = write_config(tmp_path, mutate)
        code = cli.main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")])
        assert code == 2
        assert "typo_field" in capsys.readouterr().err

    def test_missing_ground_truth_exits_2(self, tmp_path, capsys):
        def mutate(c):
            del c["ground_truth"]

        config = write_config(tmp_path, mutate)
        code = cli.main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")])
        assert code == 2
        assert "ground_truth" in capsys.readouterr().err


class TestFit:
    def test_malformed_header_exits_2(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "run"
        out.mkdir()
        (out / "choices.csv").write_text("bad,header\n1,2\n", encoding="utf-8")
        code = cli.main(["fit", "--config", str(config), "--out", str(out)])
        assert code == 2
        assert "header" in capsys.readouterr().err

    def test_sampler_failure_exits_3(self, tmp_path, monkeypatch, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["simulate", "--config", str(config), "--out", str(out)]) == 0

        def explode(*args, **kwargs):
            raise FitError("too many divergences")

        monkeypatch.setattr(cli, "_stage_fit", explode)
        code = cli.main(["fit", "--config", str(config), "--out", str(out)])
        assert code == 3
        assert "divergences" in capsys.readouterr().err

    def test_smoke_fit_on_full_size_dataset_under_60s(self, tmp_path):
        def mutate(c):
            c["simulation"]["n_respondents"] = 300
            c["simulation"]["tasks_per_respondent"] = 20

        config = write_config(tmp_path, mutate)
        out = tmp_path / "run"
        assert cli.main(["simulate", "--config", str(config), "--out", str(out)]) == 0
        start = time.perf_counter()
        code = cli.main(
            ["fit", "--config", str(config), "--out", str(out),
             "--chains", "1", "--draws", "50", "--warmup", "50"]
        )
        elapsed = time.perf_counter() - start
        assert code == 0
        assert elapsed < 60.0
        assert (out / "posterior.jsonl").exists()
        assert (out / "diagnostics.json").exists()


@pytest.fixture(scope="module")
def fitted_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("fitted")
    config = write_config(tmp)
    out = tmp / "run"
    assert cli.main(["pipeline", "--config", str(config), "--out", str(out)]) == 0
    return config, out


class TestWtp:
    def test_without_truth_skips_recovery(self, fitted_run, tmp_path):
        _, run_dir = fitted_run
        out = tmp_path / "wtp_only"
        code = cli.main(
            ["wtp", "--posterior", str(run_dir / "posterior.jsonl"), "--out", str(out)]
        )
        assert code == 0
        assert (out / "wtp_summary.csv").exists()
        assert (out / "wtp_draws.csv").exists()
        assert not (out / "recovery.json").exists()

    def test_with_truth_writes_recovery(self, fitted_run, tmp_path):
        _, run_dir = fitted_run
        out = tmp_path / "wtp_truth"
        code = cli.main(
            [
                "wtp",
                "--posterior", str(run_dir / "posterior.jsonl"),
                "--truth", str(run_dir / "provenance.json"),
                "--out", str(out),
            ]
        )
        assert code == 0
        with open(out / "recovery.json", encoding="utf-8") as f:
            recovery = json.load(f)
        assert set(recovery) == {"overall_pass", "features"}

    def test_positive_price_posterior_exits_4(self, fitted_run, tmp_path, capsys):
        _, run_dir = fitted_run
        draws = read_posterior_jsonl(run_dir / "posterior.jsonl")
        doctored = copy.deepcopy(draws)
        flip = max(1, int(0.002 * doctored.n_draws) + 1)
        doctored.mu[:flip, doctored.price_index] = 0.5
        path = tmp_path / "bad_posterior.jsonl"
        write_posterior_jsonl(path, doctored)
        code = cli.main(["wtp", "--posterior", str(path), "--out", str(tmp_path / "o")])
        assert code == 4
        assert "price" in capsys.readouterr().err


class TestRevenue:
    def test_single_price_grid_warns_and_reports_it(self, tmp_path, capsys):
        def mutate(c):
            c["scenario"]["price_grid"] = [999.0]

        config = write_config(tmp_path, mutate)
        out = tmp_path / "run"
        assert cli.main(["pipeline", "--config", str(config), "--out", str(out)]) == 0
        captured = capsys.readouterr()
        assert "single point" in captured.err
        with open(out / "report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["revenue"]["argmax_price"] == 999.0

    def test_unknown_upgrade_exits_2(self, tmp_path):
        def mutate(c):
            c["scenario"]["upgrades"] = {"camera": "Pro", "antenna": "5G"}

        config = write_config(tmp_path, mutate)
        out = tmp_path / "run"
        assert cli.main(["simulate", "--config", str(config), "--out", str(out)]) == 0
        assert cli.main(["fit", "--config", str(config), "--out", str(out)]) == 0
        code = cli.main(["revenue", "--config", str(config), "--out", str(out)])
        assert code == 2

    def test_standalone_revenue_merges_report(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["pipeline", "--config", str(config), "--out", str(out)]) == 0
        (out / "report.json").unlink()
        code = cli.main(["revenue", "--config", str(config), "--out", str(out)])
        assert code == 0
        with open(out / "report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert "revenue" in report
        curve_lines = (out / "revenue_curve.csv").read_text(encoding="utf-8").splitlines()
        for line in curve_lines[1:]:
            price, mean, low, high = (float(v) for v in line.split(","))
            assert 0.0 <= mean <= price


class TestPipeline:
    def test_end_to_end_report_and_files(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["pipeline", "--config", str(config), "--out", str(out)]) == 0
        with open(out / "report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["stages_run"] == ["simulate", "fit", "wtp", "revenue"]
        for rel in report["files"].values():
            assert (out / rel).exists()
        assert set(report["timings"]) == {"simulate", "fit", "wtp", "revenue"}
        assert report["quality"]["divergence_rate"] <= 0.05

    def test_resume_from_fit_skips_simulation(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["pipeline", "--config", str(config), "--out", str(out)]) == 0
        before = (out / "choices.csv").read_bytes()
        code = cli.main(
            ["pipeline", "--config", str(config), "--out", str(out), "--from", "fit"]
        )
        assert code == 0
        with open(out / "report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["stages_run"] == ["fit", "wtp", "revenue"]
        assert (out / "choices.csv").read_bytes() == before

    def test_config_echo_reproduces_run_bit_identically(self, tmp_path):
        config = write_config(tmp_path)
        out_a = tmp_path / "a"
        assert cli.main(["pipeline", "--config", str(config), "--out", str(out_a)]) == 0
        report = strip_timings(out_a / "report.json")
        echoed = dict(report["config"])
        echoed.pop("output_dir", None)
        echo_path = tmp_path / "echo.json"
        write_json(echo_path, echoed)
        out_b = tmp_path / "b"
        assert cli.main(["pipeline", "--config", str(echo_path), "--out", str(out_b)]) == 0
        assert (out_a / "choices.csv").read_bytes() == (out_b / "choices.csv").read_bytes()
        assert (out_a / "posterior.jsonl").read_bytes() == (out_b / "posterior.jsonl").read_bytes()
        report_b = strip_timings(out_b / "report.json")
        report_a = strip_timings(out_a / "report.json")
        report_a["config"].pop("output_dir", None)
        report_b["config"].pop("output_dir", None)
        assert report_a == report_b

    def test_seed_flag_changes_results(self, tmp_path):
        config = write_config(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["simulate", "--config", str(config), "--out", str(out_a)]) == 0
        assert cli.main(
            ["simulate", "--config", str(config), "--out", str(out_b), "--seed", "7"]
        ) == 0
        assert (out_a / "choices.csv").read_bytes() != (out_b / "choices.csv").read_bytes()

    def test_missing_output_dir_exits_2(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = cli.main(["simulate", "--config", str(config)])
        assert code == 2
        assert "output" in capsys.readouterr().err

    def test_missing_config_file_exits_5(self, tmp_path, capsys):
        code = cli.main(
            ["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]
        )
        assert code == 5
        assert "nope.json" in capsys.readouterr().err

    def test_resume_from_revenue_runs_only_revenue(self, fitted_run):
        config, out = fitted_run
        code = cli.main(
            ["pipeline", "--config", str(config), "--out", str(out), "--from", "revenue"]
        )
        assert code == 0
        with open(out / "report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["stages_run"] == ["revenue"]
        assert report["revenue"] is not None
        assert report["quality"] is not None  # picked up from diagnostics.json


def test_console_entry_point_runs():
    import subprocess
    import sys

    result = subprocess.run(
        [sys.executable, "-m", "conjoint_wtp.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "conjoint-wtp" in result.stdout


def test_demo_config_matches_presets():
    from conjoint_wtp.config import load_run_config
    from conjoint_wtp.presets import (
        smartphone_pro_bundle,
        smartphone_scheme,
        smartphone_truth,
    )
    from tests.conftest import DEMO_CONFIG

    config = load_run_config(DEMO_CONFIG)
    assert config.scheme == smartphone_scheme()
    assert config.ground_truth == smartphone_truth()
    assert config.scenario == smartphone_pro_bundle()
    assert config.model.chains == 4
    assert config.model.draws_per_chain == 2000
    assert config.model.warmup_per_chain == 1000
    assert config.simulation.n_respondents == 300
    assert config.simulation.tasks_per_respondent == 20
