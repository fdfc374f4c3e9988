import json
import math
import os

import numpy as np
import pytest

from rapid.agent import Trainer
from rapid.config import (
    ConfigError,
    PpoConfig,
    RapidConfig,
    apply_sweep_value,
    env_spec_from_string,
    experiment_from_dict,
    load_experiment,
)
from rapid.envs import EnvSpec
from rapid.harness import (
    CSV_COLUMNS,
    MetricsRow,
    evaluate,
    read_metrics_csv,
    run_experiment,
    run_seed,
    seed_env_spec,
    sweep,
)
from rapid.nets import init_params, save_checkpoint


def chain_config(tmp_path, **overrides):
    base = {
        "name": "chain-test",
        "env": {"kind": "chain", "chain_length": 8, "layout_seed_stream": 1},
        "rapid": {"buffer_size": 200, "bc_batch": 16},
        "ppo": {"nstep": 64, "minibatches": 4, "epochs": 2},
        "total_frames": 1280,
        "seeds": [0, 1],
        "log_path": str(tmp_path),
    }
    base.update(overrides)
    return experiment_from_dict(base)


# ---------------------------------------------------------------------------
# config loading and validation


def test_load_experiment_round_trip(tmp_path):
    cfg = chain_config(tmp_path)
    path = os.path.join(tmp_path, "cfg.json")
    from rapid.config import experiment_to_dict

    with open(path, "w") as fh:
        json.dump(experiment_to_dict(cfg), fh)
    again = load_experiment(path)
    assert again == cfg


def test_unknown_mode_rejected_before_any_env_step(tmp_path):
    with pytest.raises(ConfigError, match="mode"):
        chain_config(tmp_path, rapid={"mode": "nosuch"})


def test_unknown_key_rejected_with_path(tmp_path):
    with pytest.raises(ConfigError, match="rapid"):
        chain_config(tmp_path, rapid={"buffer_sz": 10})


def test_json_errors_carry_line_numbers(tmp_path):
    path = os.path.join(tmp_path, "bad.json")
    with open(path, "w") as fh:
        fh.write('{\n  "env": {,}\n}')
    with pytest.raises(ConfigError, match=r"bad\.json:2:"):
        load_experiment(path)


def test_invalid_values_rejected(tmp_path):
    with pytest.raises(ConfigError):
        chain_config(tmp_path, total_frames=0)
    with pytest.raises(ConfigError):
        chain_config(tmp_path, seeds=[])
    with pytest.raises(ConfigError):
        chain_config(tmp_path, ppo={"gamma": 1.5})


def test_env_spec_from_string():
    assert env_spec_from_string("chain-8").chain_length == 8
    spec = env_spec_from_string("multiroom-n7-s4")
    assert (spec.n_rooms, spec.room_size) == (7, 4)
    spec = env_spec_from_string("keycorridor-s3-r2")
    assert (spec.room_size, spec.n_rooms) == (3, 2)
    assert env_spec_from_string("pointmass").kind == "pointmass"
    with pytest.raises(ConfigError):
        env_spec_from_string("atari-pong")


# ---------------------------------------------------------------------------
# runs


def test_run_writes_csvs_and_summary(tmp_path):
    cfg = chain_config(tmp_path)
    summary = run_experiment(cfg)
    run_dir = os.path.join(str(tmp_path), "chain-test")
    for seed in (0, 1):
        rows = read_metrics_csv(os.path.join(run_dir, f"{seed}.csv"))
        assert len(rows) == 20  # 1280 / 64
        assert [r.frames for r in rows] == [64 * (i + 1) for i in range(20)]
        assert os.path.exists(os.path.join(run_dir, f"{seed}.npz"))
    with open(os.path.join(run_dir, "summary.json")) as fh:
        on_disk = json.load(fh)
    assert on_disk["per_seed_max_return"] == summary["per_seed_max_return"]
    assert set(summary["per_seed_max_return"]) == {"0", "1"}


def test_summary_matches_recomputation_from_csvs(tmp_path):
    cfg = chain_config(tmp_path)
    summary = run_experiment(cfg)
    maxes = []
    for seed in (0, 1):
        rows = read_metrics_csv(os.path.join(str(tmp_path), "chain-test", f"{seed}.csv"))
        m = max(r.mean_return_100 for r in rows)
        assert summary["per_seed_max_return"][str(seed)] == m
        assert summary["per_seed_final_return"][str(seed)] == rows[-1].mean_return_100
        maxes.append(m)
    assert summary["mean_max"] == pytest.approx(float(np.mean(maxes)))
    assert summary["std_max"] == pytest.approx(float(np.std(maxes)))


def _strip_wall(path):
    with open(path) as fh:
        return [line.rsplit(",", 1)[0] for line in fh]


def test_rerun_reproduces_csv_bytes_except_wall_clock(tmp_path):
    cfg_a = chain_config(tmp_path, log_path=str(tmp_path / "a"))
    cfg_b = chain_config(tmp_path, log_path=str(tmp_path / "b"))
    run_experiment(cfg_a)
    run_experiment(cfg_b)
    for seed in (0, 1):
        a = _strip_wall(os.path.join(str(tmp_path / "a"), "chain-test", f"{seed}.csv"))
        b = _strip_wall(os.path.join(str(tmp_path / "b"), "chain-test", f"{seed}.csv"))
        assert a == b


def test_metrics_row_round_trip():
    row = MetricsRow(64, 1, 0.5, 0.25, float("nan"), 10, 0.1, -0.01, 0.69, 1.5)
    parsed = MetricsRow.from_csv_line(row.to_csv_line())
    for col in CSV_COLUMNS:
        a, b = getattr(row, col), getattr(parsed, col)
        assert (a == b) or (math.isnan(a) and math.isnan(b))


def test_log_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("RAPID_LOG_ROOT", str(tmp_path))
    cfg = chain_config(tmp_path, log_path="runs", total_frames=64, seeds=[0])
    run_experiment(cfg)
    assert os.path.exists(os.path.join(str(tmp_path), "runs", "chain-test", "0.csv"))


def test_eval_series_recorded(tmp_path):
    cfg = chain_config(tmp_path, total_frames=256, seeds=[0], eval_every=128, eval_episodes=5)
    summary = run_experiment(cfg)
    evals = summary["eval"]["0"]
    assert [e["frames"] for e in evals] == [128, 256]


# ---------------------------------------------------------------------------
# evaluation


def _scripted_chain_checkpoint(path):
    params = init_params(np.random.default_rng(0), 8, 2)
    params["pi.b3"] = np.array([-10.0, 10.0])  # always move right
    meta = {"obs_dim": 8, "action_dim": 2, "continuous": False}
    save_checkpoint(path, params, None, meta)


def test_scripted_optimal_chain_policy_evaluates_perfectly(tmp_path):
    path = os.path.join(tmp_path, "expert.npz")
    _scripted_chain_checkpoint(path)
    mean_return, success = evaluate(path, EnvSpec("chain", chain_length=8), 10, seed=0)
    assert success == 1.0
    assert mean_return == 1.0


def test_untrained_policy_near_zero_on_multiroom(tmp_path):
    spec = EnvSpec("multiroom", n_rooms=2, room_size=4, layout_seed_stream=7)
    params = init_params(np.random.default_rng(1), 147, 7)
    path = os.path.join(tmp_path, "fresh.npz")
    save_checkpoint(path, params, None, {"obs_dim": 147, "action_dim": 7, "continuous": False})
    mean_return, success = evaluate(path, spec, 20, seed=0)
    assert success <= 0.1


def test_eval_deterministic(tmp_path):
    path = os.path.join(tmp_path, "expert.npz")
    _scripted_chain_checkpoint(path)
    spec = EnvSpec("chain", chain_length=8)
    assert evaluate(path, spec, 8, seed=3) == evaluate(path, spec, 8, seed=3)


def test_eval_dimension_mismatch(tmp_path):
    path = os.path.join(tmp_path, "expert.npz")
    _scripted_chain_checkpoint(path)
    with pytest.raises(ValueError, match="obs_dim"):
        evaluate(path, EnvSpec("multiroom"), 2, seed=0)


# ---------------------------------------------------------------------------
# sweeps


def test_sweep_writes_one_summary_per_value(tmp_path):
    cfg = chain_config(tmp_path, total_frames=256, seeds=[0])
    summaries = sweep(cfg, "S", [1, 5])
    assert len(summaries) == 2
    names = [s["name"] for s in summaries]
    assert names == ["chain-test-S1", "chain-test-S5"]
    for name in names:
        assert os.path.exists(os.path.join(str(tmp_path), name, "summary.json"))


def test_sweep_value_propagates_into_buffer_capacity(tmp_path):
    cfg = chain_config(tmp_path, total_frames=256, seeds=[0])
    summaries = sweep(cfg, "D", [16, 64])
    for cap, s in zip((16, 64), summaries):
        rows = read_metrics_csv(os.path.join(s["run_dir"], "0.csv"))
        assert max(r.buffer_len for r in rows) <= cap
        assert s["config"]["rapid"]["buffer_size"] == cap


def test_sweep_equivalent_to_manual_runs(tmp_path):
    cfg = chain_config(tmp_path, total_frames=192, seeds=[0])
    swept = sweep(cfg, "w1", [0.0, 0.2])[1]
    manual_cfg = apply_sweep_value(cfg, "w1", 0.2)
    manual_cfg = experiment_from_dict(
        {**json.loads(json.dumps(_cfg_dict(manual_cfg))), "name": "manual", "log_path": str(tmp_path)}
    )
    manual = run_experiment(manual_cfg)
    assert manual["per_seed_max_return"] == swept["per_seed_max_return"]
    a = _strip_wall(os.path.join(swept["run_dir"], "0.csv"))
    b = _strip_wall(os.path.join(manual["run_dir"], "0.csv"))
    assert a == b


def _cfg_dict(cfg):
    from rapid.config import experiment_to_dict

    return experiment_to_dict(cfg)


# ---------------------------------------------------------------------------
# goldens and accounting


def test_chain_two_iteration_metrics_match_golden():
    tr = Trainer(
        EnvSpec("chain", chain_length=8, layout_seed_stream=1),
        RapidConfig(buffer_size=200, bc_batch=16),
        PpoConfig(nstep=64, minibatches=4, epochs=2),
        seed=0,
    )
    lines = []
    for _ in range(2):
        s = tr.iteration()
        lines.append(
            f"{s.frames},{s.iteration},{s.mean_return_100!r},{s.s_local_mean!r},"
            f"{s.s_global_mean!r},{s.buffer_len},{s.buffer_min_score!r},"
            f"{s.ppo_loss!r},{s.bc_loss!r}"
        )
    golden = os.path.join(os.path.dirname(__file__), "golden", "chain_two_iterations.csv")
    with open(golden) as fh:
        expected = fh.read().splitlines()
    assert lines == expected


def test_multiroom_layout_matches_golden():
    from rapid.envs import make_env

    env = make_env(EnvSpec("multiroom", n_rooms=2, room_size=4, layout_seed_stream=7))
    env.reset(0)
    golden = os.path.join(os.path.dirname(__file__), "golden", "multiroom_n2s4_stream7_ep0.txt")
    with open(golden) as fh:
        assert env.render_text() == fh.read()


def test_observation_matches_golden():
    from rapid.envs import make_env

    env = make_env(EnvSpec("multiroom", n_rooms=2, room_size=4, layout_seed_stream=7))
    obs = env.reset(0)
    for a in (2, 1):
        obs, _, _ = env.step(a)
    golden = os.path.join(os.path.dirname(__file__), "golden", "multiroom_obs_stream7_ep0.txt")
    with open(golden) as fh:
        expected = [int(v) for v in fh.read().split()]
    assert obs.tolist() == expected


def test_frames_accounting_exact(tmp_path):
    cfg = chain_config(tmp_path, total_frames=200, seeds=[0])  # not a multiple of 64
    run_experiment(cfg)
    rows = read_metrics_csv(os.path.join(str(tmp_path), "chain-test", "0.csv"))
    assert [r.frames for r in rows] == [64, 128, 192, 256]
    assert all(r.frames == r.iteration * 64 for r in rows)


def test_seed_env_spec_keeps_layout_contract():
    spec = EnvSpec("chain", chain_length=8, layout_seed_stream=5)
    derived = seed_env_spec(spec, 2)
    assert derived.layout_seed_stream != spec.layout_seed_stream
    assert seed_env_spec(spec, 2) == derived  # derivation itself is deterministic


def test_run_seed_rejects_negative_seed(tmp_path):
    cfg = chain_config(tmp_path)
    with pytest.raises(ValueError):
        run_seed(cfg, -1, str(tmp_path))


def test_mid_run_failure_keeps_partial_csv(tmp_path, monkeypatch):
    cfg = chain_config(tmp_path, seeds=[0], total_frames=1280)
    calls = {"n": 0}
    original = Trainer.iteration

    def flaky(self):
        calls["n"] += 1
        if calls["n"] > 3:
            raise RuntimeError("boom")
        return original(self)

    monkeypatch.setattr(Trainer, "iteration", flaky)
    with pytest.raises(RuntimeError, match="boom"):
        run_seed(cfg, 0, str(tmp_path / "partial"))
    rows = read_metrics_csv(os.path.join(str(tmp_path / "partial"), "0.csv"))
    assert len(rows) == 3  # flushed up to the failure


def test_shipped_configs_are_valid():
    cfg_dir = os.path.join(os.path.dirname(__file__), "..", "configs")
    experiment_configs = [
        f for f in sorted(os.listdir(cfg_dir)) if f.endswith(".json") and not f.startswith("plot_")
    ]
    assert len(experiment_configs) >= 5
    for name in experiment_configs:
        cfg = load_experiment(os.path.join(cfg_dir, name))
        assert cfg.total_frames > 0
    with open(os.path.join(cfg_dir, "plot_desk.json")) as fh:
        assert json.load(fh)["panels"]
