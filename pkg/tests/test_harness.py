"""Tests for the experiment harness: configs, sampling, runs, files, CLI."""

import json

import numpy as np
import pytest
import yaml

from bwmarket.cli import main as cli_main
from bwmarket.harness import (
    CSV_COLUMNS,
    DEFAULT_RANGES,
    ConfigError,
    ExperimentConfig,
    SweepSpec,
    config_from_dict,
    config_hash,
    emit_results,
    load_config,
    named_rng,
    parse_results_csv,
    run_solve,
    run_sweep,
    run_training,
    sample_instance,
    write_summary,
)


def tiny_config(**overrides):
    cfg = ExperimentConfig(num_uavs=1, num_rsus=1, episodes=3)
    cfg.env.episode_length = 5
    cfg.env.history_length = 1
    cfg.ranges["similarity"] = (0.85, 1.0)
    for key, val in overrides.items():
        setattr(cfg, key, val)
    return cfg.validate()


class TestNamedRng:
    def test_streams_independent_of_order(self):
        a = named_rng(0, "warmup").uniform(size=3)
        _ = named_rng(0, "instance").uniform(size=5)
        b = named_rng(0, "warmup").uniform(size=3)
        np.testing.assert_array_equal(a, b)

    def test_different_names_differ(self):
        a = named_rng(0, "warmup").uniform(size=3)
        b = named_rng(0, "instance").uniform(size=3)
        assert not np.array_equal(a, b)


class TestSampling:
    def test_deterministic_per_seed(self):
        a = sample_instance({}, 2, 2, 7)
        b = sample_instance({}, 2, 2, 7)
        assert a.rsus[0].bandwidth_cost == b.rsus[0].bandwidth_cost
        assert a.uavs[1].budget == b.uavs[1].budget

    def test_values_within_ranges(self):
        inst = sample_instance({}, 3, 3, 1)
        for rsu in inst.rsus:
            lo, hi = DEFAULT_RANGES["bandwidth_cost"]
            assert lo <= rsu.bandwidth_cost <= hi
            lo, hi = DEFAULT_RANGES["price_cap"]
            assert lo <= rsu.price_cap <= hi
        for uav in inst.uavs:
            lo, hi = DEFAULT_RANGES["delta"]
            assert lo <= uav.delta <= hi
            lo, hi = DEFAULT_RANGES["budget"]
            assert lo <= uav.budget <= hi

    def test_degenerate_range_pins_value(self):
        inst = sample_instance({"bandwidth_cost": (2.5, 2.5)}, 1, 2, 0)
        assert all(r.bandwidth_cost == 2.5 for r in inst.rsus)

    def test_cost_above_cap_rejected(self):
        with pytest.raises(ConfigError):
            sample_instance({"bandwidth_cost": (1.0, 40.0)}, 1, 1, 0)


class TestConfig:
    def test_defaults_validate(self):
        ExperimentConfig().validate()

    def test_unknown_range_key(self):
        cfg = ExperimentConfig()
        cfg.ranges["mystery"] = (0.0, 1.0)
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_empty_range(self):
        cfg = ExperimentConfig()
        cfg.ranges["delta"] = (5.0, 2.0)
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_from_dict_round_trip(self):
        doc = {"instance": {"I": 2, "J": 3,
                            "ranges": {"delta": [12.0, 14.0]}},
               "episodes": 10, "seeds": [1, 2]}
        cfg = config_from_dict(doc)
        assert cfg.num_uavs == 2 and cfg.num_rsus == 3
        assert cfg.ranges["delta"] == (12.0, 14.0)
        assert cfg.seeds == [1, 2]

    def test_from_dict_unknown_key(self):
        with pytest.raises(ConfigError):
            config_from_dict({"mystery": 1})

    def test_load_yaml(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump({"episodes": 4, "seeds": [3]}))
        cfg = load_config(path)
        assert cfg.episodes == 4 and cfg.seeds == [3]

    def test_load_yaml_not_mapping(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- just\n- a list\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_hash_stable_and_sensitive(self):
        a, b = ExperimentConfig(), ExperimentConfig()
        assert config_hash(a) == config_hash(b)
        b.episodes = 301
        assert config_hash(a) != config_hash(b)


class TestRuns:
    def test_solve_record(self):
        cfg = tiny_config()
        rec = run_solve(cfg, 0)
        assert rec.algorithm == "solve"
        assert rec.episode_rewards.size == 0
        assert rec.theoretical > 0
        assert rec.consistent

    def test_training_record_shape(self):
        cfg = tiny_config()
        rec = run_training(cfg, "random", 0)
        assert rec.episode_rewards.shape == (3, 1)
        assert rec.final_average() == pytest.approx(rec.avg_rewards[-1])

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            run_training(tiny_config(), "oracle", 0)

    def test_tiny_run_logs_sparsity(self):
        from bwmarket.tinynet import PruneSchedule
        cfg = tiny_config(schedule=PruneSchedule(0.0, 0.5, 0, 2, 1))
        cfg.ppo.rollout_size = 5
        cfg.ppo.update_epochs = 1
        rec = run_training(cfg, "tiny_madrl", 0)
        assert rec.sparsity.shape == (3,)
        assert rec.sparsity[-1] > 0.4

    def test_sweep_aggregate(self):
        cfg = tiny_config()
        spec = SweepSpec("c", [1.0, 2.0], [0, 1])
        records, aggregate = run_sweep(cfg, spec)
        assert len(records) == 4
        assert set(aggregate) == {1.0, 2.0}
        for mean, sd in aggregate.values():
            assert np.isfinite(mean) and sd >= 0.0

    def test_sweep_grid_must_increase(self):
        with pytest.raises(ConfigError):
            SweepSpec("c", [2.0, 1.0], [0])


class TestPersistence:
    def test_csv_round_trip(self, tmp_path):
        cfg = tiny_config()
        records = [run_solve(cfg, 0), run_training(cfg, "random", 0)]
        path = emit_results(records, tmp_path, fmt="csv")
        rows = parse_results_csv(path)
        assert rows and list(rows[0]) == CSV_COLUMNS
        training = [r for r in rows if r["agent_id"] != ""]
        assert len(training) == 3
        assert float(training[0]["reward"]) == records[1].episode_rewards[0, 0]

    def test_empty_records_header_only(self, tmp_path):
        path = emit_results([], tmp_path, fmt="csv")
        assert path.read_text().strip() == ",".join(CSV_COLUMNS)

    def test_jsonl_matches_csv_rows(self, tmp_path):
        cfg = tiny_config()
        records = [run_training(cfg, "random", 0)]
        csv_rows = parse_results_csv(emit_results(records, tmp_path, fmt="csv"))
        jsonl = [json.loads(line) for line in
                 emit_results(records, tmp_path, fmt="jsonl").read_text()
                 .splitlines()]
        assert len(jsonl) == len(csv_rows)
        assert str(jsonl[0]["reward"]) == csv_rows[0]["reward"]

    def test_summary_contents(self, tmp_path):
        cfg = tiny_config()
        records = [run_training(cfg, "random", s) for s in (0, 1)]
        path = write_summary(records, tmp_path)
        summary = json.loads(path.read_text())
        entry = summary["random"]
        assert entry["num_runs"] == 2
        assert entry["percent_of_theoretical"] > 0

    def test_reemission_byte_identical(self, tmp_path):
        cfg = tiny_config()
        records = [run_training(cfg, "random", 0), run_solve(cfg, 1)]
        a = emit_results(records, tmp_path / "a", fmt="csv").read_bytes()
        b = emit_results(records, tmp_path / "b", fmt="csv").read_bytes()
        assert a == b


class TestReproducibility:
    def test_identical_seeds_identical_csv_excluding_wall(self, tmp_path):
        cfg = tiny_config()

        def run(sub):
            rec = run_training(cfg, "random", seed=0)
            path = emit_results([rec], tmp_path / sub, fmt="csv")
            return [row[:-1] for row in
                    (line.split(",") for line in path.read_text().splitlines())]

        assert run("x") == run("y")


class TestCli:
    def _write_cfg(self, tmp_path):
        doc = {"instance": {"I": 1, "J": 1,
                            "ranges": {"similarity": [0.85, 1.0]}},
               "episodes": 2, "seeds": [0],
               "env": {"history_length": 1, "episode_length": 4}}
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(doc))
        return str(path)

    def test_solve_command(self, tmp_path, capsys):
        code = cli_main(["solve", "--config", self._write_cfg(tmp_path),
                         "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "results.csv").exists()
        assert (tmp_path / "out" / "summary.json").exists()

    def test_train_command(self, tmp_path):
        code = cli_main(["train", "--algo", "random",
                         "--config", self._write_cfg(tmp_path),
                         "--out", str(tmp_path / "out")])
        assert code == 0
        rows = parse_results_csv(tmp_path / "out" / "results.csv")
        assert len(rows) == 2

    def test_sweep_command(self, tmp_path, capsys):
        code = cli_main(["sweep", "--param", "c", "--grid", "1", "2",
                         "--config", self._write_cfg(tmp_path),
                         "--out", str(tmp_path / "out")])
        assert code == 0
        assert "c=1" in capsys.readouterr().out

    def test_compare_command(self, tmp_path):
        code = cli_main(["compare", "--algo", "random", "greedy",
                         "--config", self._write_cfg(tmp_path),
                         "--out", str(tmp_path / "out")])
        assert code == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert {"random", "greedy", "solve"} <= set(summary)

    def test_bad_config_exit_code(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"mystery": True}))
        assert cli_main(["solve", "--config", str(path)]) == 2

    def test_seed_override(self, tmp_path):
        code = cli_main(["train", "--algo", "random",
                         "--config", self._write_cfg(tmp_path),
                         "--seed", "9", "--out", str(tmp_path / "out")])
        assert code == 0
        rows = parse_results_csv(tmp_path / "out" / "results.csv")
        assert all(r["seed"] == "9" for r in rows)
