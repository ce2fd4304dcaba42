"""Harness: config parsing, determinism, parallel equality, CLI exit codes."""

import dataclasses
import json

import pytest

from privdist.cli import main
from privdist.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    canonical_csv_bytes,
    load_config,
    resolve_pmf,
    run_experiment,
    sweep,
    wilson_interval,
    write_csv,
    write_metadata,
)


def small_identity_config(**kw):
    base = dict(
        task="identity", scenario="null", n=100, eps=0.3, alpha=0.05, xi=1.0,
        eta=0.3, trials=60, master_seed=4,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestWilson:
    @pytest.mark.parametrize("k,n", [(0, 10), (5, 10), (10, 10), (3, 2000)])
    def test_contains_point_estimate(self, k, n):
        lo, hi = wilson_interval(k, n)
        assert 0.0 <= lo <= k / n <= hi <= 1.0

    def test_degenerate(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)


class TestConfig:
    def test_validation_messages_name_fields(self):
        with pytest.raises(ConfigError, match="eps"):
            ExperimentConfig(task="identity", eps=2.0).validate()
        with pytest.raises(ConfigError, match="trials"):
            ExperimentConfig(task="identity", trials=0).validate()
        with pytest.raises(ConfigError, match="task"):
            ExperimentConfig(task="nope").validate()

    def test_load_config_roundtrip(self, tmp_path):
        cfg_file = tmp_path / "exp.ini"
        cfg_file.write_text(
            "[experiment]\ntask = coupling\nn = 50\neta = 0.2\nalpha = 0.1\n"
            "s = 40\ntrials = 10\nmaster_seed = 3\n"
        )
        cfg = load_config(cfg_file)
        assert cfg.task == "coupling" and cfg.n == 50 and cfg.s == 40

    def test_load_config_unknown_field(self, tmp_path):
        cfg_file = tmp_path / "exp.ini"
        cfg_file.write_text("[experiment]\ntask = identity\nbogus = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            load_config(cfg_file)

    def test_load_config_missing_section(self, tmp_path):
        cfg_file = tmp_path / "exp.ini"
        cfg_file.write_text("[other]\ntask = identity\n")
        with pytest.raises(ConfigError, match="experiment"):
            load_config(cfg_file)

    def test_resolve_pmf_inline_and_file(self, tmp_path):
        p = resolve_pmf("inline: 1, 3", 2)
        assert p.probs.tolist() == [0.25, 0.75]
        path = tmp_path / "p.txt"
        path.write_text("0.5\n0.5\n")
        assert resolve_pmf(f"file:{path}", 2).probs.tolist() == [0.5, 0.5]
        with pytest.raises(ConfigError):
            resolve_pmf("inline: 1, 1, 1", 2)


class TestRunExperiment:
    def test_rates_sum_to_one(self):
        row = run_experiment(small_identity_config())[0]
        assert row.accept_rate + row.reject_rate + row.bot_rate == pytest.approx(1.0, abs=1e-9)

    def test_single_trial_degenerate(self):
        row = run_experiment(small_identity_config(trials=1))[0]
        assert {row.accept_rate, row.reject_rate, row.bot_rate} <= {0.0, 1.0}

    def test_deterministic_rows(self):
        cfg = small_identity_config()
        a = run_experiment(cfg)[0]
        b = run_experiment(cfg)[0]
        assert a.to_csv_line().rsplit(",", 2)[0] == b.to_csv_line().rsplit(",", 2)[0]

    def test_parallel_matches_serial(self, tmp_path):
        cfg = small_identity_config(trials=80)
        rows_serial = run_experiment(cfg)
        rows_par = run_experiment(dataclasses.replace(cfg, threads=3))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(rows_serial, a)
        write_csv(rows_par, b)
        assert canonical_csv_bytes(a) == canonical_csv_bytes(b)

    def test_csv_and_metadata_shapes(self, tmp_path):
        cfg = small_identity_config(trials=20)
        rows = run_experiment(cfg)
        out = tmp_path / "res.csv"
        write_csv(rows, out)
        write_metadata(cfg, rows, tmp_path / "res.csv.meta.json")
        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 2
        meta = json.loads((tmp_path / "res.csv.meta.json").read_text())
        assert meta["config"]["task"] == "identity"
        assert "wilson_95" in meta["rows"][0]
        iv = meta["rows"][0]["wilson_95"]["reject"]
        assert iv[0] <= meta["rows"][0]["rates"]["reject"] <= iv[1]

    def test_closeness_row_reports_schedule(self):
        cfg = ExperimentConfig(
            task="closeness", scenario="null", n=100, eps=0.35, alpha=0.02,
            xi=1.0, trials=5, master_seed=1,
        )
        row = run_experiment(cfg)[0]
        assert row.branch == "augmented"
        assert row.k == row.ell > 0 and row.s > 0

    def test_l2check_and_sensitivity_rows(self):
        row = run_experiment(
            ExperimentConfig(task="l2check", n=50, alpha=0.0, xi=1.0, trials=20, master_seed=2)
        )[0]
        assert "acc_fail_rate=" in row.metric
        row = run_experiment(ExperimentConfig(task="sensitivity", trials=1))[0]
        assert "all_ok=1" in row.metric


class TestSweep:
    def test_singleton_matches_run(self):
        cfg = small_identity_config(trials=30)
        a = sweep(cfg, "eta", [0.3])[0]
        b = run_experiment(cfg)[0]
        assert a.reject_rate == b.reject_rate and a.bot_rate == b.bot_rate

    def test_unknown_axis(self):
        with pytest.raises(ConfigError, match="axis"):
            sweep(small_identity_config(), "verdict", [1])

    def test_budget_trend_columns(self):
        rows = sweep(small_identity_config(trials=1, alpha=0.0), "eta", [0.1, 0.2, 0.4])
        budgets = [r.s for r in rows]
        assert budgets[0] > budgets[1] > budgets[2]


class TestCli:
    def test_success_exit_code(self, tmp_path):
        out = tmp_path / "r.csv"
        code = main(
            ["--task", "coupling", "--n", "20", "--eta", "0.1", "--alpha", "0",
             "--trials", "5", "--seed", "1", "--out", str(out)]
        )
        assert code == 0
        assert out.exists() and out.with_suffix(".csv.meta.json").exists()

    def test_config_error_exit_code(self):
        assert main(["--task", "identity", "--eps", "7"]) == 2
        assert main(["--trials", "5"]) == 2

    def test_sweep_flag(self, tmp_path):
        out = tmp_path / "r.csv"
        code = main(
            ["--task", "identity", "--n", "50", "--eta", "0.3", "--trials", "5",
             "--seed", "1", "--out", str(out), "--sweep", "eta=0.2,0.4"]
        )
        assert code == 0
        assert len(out.read_text().splitlines()) == 3

    def test_bad_sweep_spec(self):
        assert main(["--task", "identity", "--sweep", "eta"]) == 2

    def test_config_file_with_overrides(self, tmp_path):
        cfg_file = tmp_path / "exp.ini"
        cfg_file.write_text(
            "[experiment]\ntask = identity\nn = 60\neta = 0.3\ntrials = 200\n"
        )
        out = tmp_path / "r.csv"
        code = main(["--config", str(cfg_file), "--trials", "5", "--out", str(out)])
        assert code == 0
        assert ",5" not in out.read_text().splitlines()[0]  # header unchanged

    def test_internal_invariant_exit_code(self, monkeypatch):
        from privdist import cli
        from privdist.harness import InvariantError

        def boom(config):
            raise InvariantError("synthetic")

        monkeypatch.setattr(cli, "run_experiment", boom)
        assert cli.main(["--task", "identity", "--trials", "5"]) == 3
