import json
import pytest

from robust_asymp.cli import main
from robust_asymp.sweeps import evaluate_sweep, read_csv


def run_cli(args):
    return main(args)


class TestSweep:
    def test_single_point_sweep(self, tmp_path):
        out = tmp_path / "one.csv"
        code = run_cli(
            ["sweep", "alpha", "--eps", "0.3", "--din", "1", "--dout", "5",
             "--range", "10:10:1", "--methods", "l2", "--out", str(out)]
        )
        assert code == 0
        config, rows = read_csv(str(out))
        assert config["command"] == "sweep"
        assert len(rows) == 1
        assert float(rows[0]["alpha"]) == 10.0
        assert rows[0]["l2_status"] == ""

    def test_reevaluation_is_bit_identical(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli(
            ["sweep", "alpha", "--eps", "0.3", "--din", "1", "--dout", "5",
             "--range", "1:30:3", "--methods", "l2,huber,bayes", "--out", str(out)]
        )
        assert code == 0
        config, rows = read_csv(str(out))
        redo = evaluate_sweep(config, workers=1)
        for row, fresh in zip(rows, redo.rows):
            for key, val in fresh.items():
                if isinstance(val, float):
                    assert float(row[key]) == val, key
                else:
                    assert row[key] == str(val) or row[key] == val

    def test_fixed_lambda_skips_tuning(self, tmp_path):
        out = tmp_path / "fix.csv"
        code = run_cli(
            ["sweep", "alpha", "--eps", "0.3", "--dout", "5", "--range", "5:5:1",
             "--methods", "l2", "--lambda", "0.7", "--out", str(out)]
        )
        assert code == 0
        _, rows = read_csv(str(out))
        assert float(rows[0]["l2_lambda_opt"]) == 0.7

    def test_plot_written(self, tmp_path):
        out = tmp_path / "p.csv"
        code = run_cli(
            ["sweep", "alpha", "--eps", "0.3", "--dout", "5", "--range", "2:20:3",
             "--methods", "l2", "--out", str(out), "--plot"]
        )
        assert code == 0
        assert (tmp_path / "p.png").exists()

    def test_bad_axis_fails_with_json_error(self, tmp_path, capsys):
        code = run_cli(["sweep", "loss", "--out", str(tmp_path / "x.csv")])
        assert code != 0


class TestPhaseDiagram:
    def test_gap_nonnegative_and_boundary(self, tmp_path):
        out = tmp_path / "pd.csv"
        code = run_cli(
            ["phase-diagram", "--eps-range", "0.3:0.3:1:lin", "--dout-range", "0.3:100:4:log",
             "--alphas", "10", "--out", str(out)]
        )
        assert code == 0
        _, rows = read_csv(str(out))
        gaps = [float(r["gen_diff"]) for r in rows if r["status"] == ""]
        assert all(g >= -1e-9 for g in gaps)
        assert gaps[0] == pytest.approx(0.0, abs=1e-12)  # collapsed at low dout
        assert gaps[-1] > 0  # large dout: Huber strictly better
        assert (tmp_path / "pd_boundary.csv").exists()
        _, bnd = read_csv(str(tmp_path / "pd_boundary.csv"))
        assert len(bnd) == 1


class TestSimulate:
    def test_minimal_two_seed_run(self, tmp_path):
        out = tmp_path / "sim.csv"
        code = run_cli(
            ["simulate", "--figure", "fig1-right", "--alphas", "3", "--dim", "50",
             "--seeds", "2", "--n-test", "2000", "--methods", "l2", "--out", str(out)]
        )
        assert code == 0
        config, rows = read_csv(str(out))
        assert config["target"] == "estim"
        assert set(rows[0]) >= {"alpha", "method", "theory", "mc_mean", "mc_se", "z"}

    def test_custom_spec(self, tmp_path):
        out = tmp_path / "sim2.csv"
        code = run_cli(
            ["simulate", "--eps", "0.1", "--dout", "2", "--alphas", "5", "--dim", "40",
             "--seeds", "2", "--n-test", "1000", "--methods", "l2", "--target", "gen",
             "--out", str(out)]
        )
        assert code == 0
        _, rows = read_csv(str(out))
        assert rows[0]["metric"] == "gen"


class TestBoRate:
    def test_outputs_fit(self, tmp_path):
        out = tmp_path / "rate.csv"
        code = run_cli(
            ["bo-rate", "--eps", "0.3", "--dout", "5", "--range", "100:1000:3", "--out", str(out)]
        )
        assert code == 0
        config, rows = read_csv(str(out))
        assert config["slope"] == pytest.approx(-1.0, abs=0.05)
        assert len(rows) == 3


class TestConfigFile:
    def test_key_value_defaults(self, tmp_path):
        cfg = tmp_path / "defaults.cfg"
        cfg.write_text("eps=0.25\ndout=3\n")
        out = tmp_path / "c.csv"
        code = run_cli(
            ["sweep", "alpha", "--config", str(cfg), "--range", "5:5:1",
             "--methods", "l2", "--out", str(out)]
        )
        assert code == 0
        config, _ = read_csv(str(out))
        assert config["eps"] == 0.25
        assert config["delta_out"] == 3.0

    def test_explicit_flags_override_config(self, tmp_path):
        cfg = tmp_path / "defaults.cfg"
        cfg.write_text("eps=0.25\n")
        out = tmp_path / "c.csv"
        code = run_cli(
            ["sweep", "alpha", "--config", str(cfg), "--eps", "0.4", "--range", "5:5:1",
             "--methods", "l2", "--out", str(out)]
        )
        assert code == 0
        config, _ = read_csv(str(out))
        assert config["eps"] == 0.4


class TestErrors:
    def test_invalid_range_json_error(self, tmp_path, capsys):
        code = run_cli(["bo-rate", "--range", "bogus", "--out", str(tmp_path / "x.csv")])
        assert code != 0

    def test_model_validation_surfaces_as_json(self, tmp_path, capsys):
        code = run_cli(
            ["sweep", "alpha", "--eps", "1.5", "--range", "5:5:1", "--methods", "l2",
             "--out", str(tmp_path / "x.csv")]
        )
        assert code == 1
        err = capsys.readouterr().err
        payload = json.loads(err.strip().splitlines()[-1])
        assert "error" in payload and "detail" in payload


class TestWorkerEnv:
    def test_thread_cap_respected(self, monkeypatch):
        from robust_asymp.sweeps import worker_count

        monkeypatch.setenv("ROBUST_ASYMP_THREADS", "1")
        assert worker_count() == 1
        monkeypatch.setenv("ROBUST_ASYMP_THREADS", "2")
        assert worker_count() <= 2

    def test_parallel_matches_serial(self, monkeypatch, tmp_path):
        from robust_asymp.sweeps import evaluate_sweep, sweep_config

        cfg = sweep_config(
            "alpha", ["l2"], eps=0.3, beta=0.0, delta_in=1.0, delta_out=5.0,
            alpha=10.0, range_spec=[2, 20, 3, "log"],
        )
        serial = evaluate_sweep(cfg, workers=1)
        parallel = evaluate_sweep(cfg, workers=2)
        assert serial.rows == parallel.rows
