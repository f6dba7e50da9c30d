import json
import math
import os
from pathlib import Path

import numpy as np
import pytest
from scipy.signal import savgol_filter

import inril

SOURCE = Path(os.environ.get("INRIL_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def test_savgol_matches_scipy():
    rng = np.random.default_rng(0)
    for n, window, order in [(40, 5, 2), (31, 7, 3), (12, 11, 2), (9, 3, 1)]:
        y = rng.normal(size=n).cumsum()
        got = np.array(inril.savgol_filter(y.tolist(), window, order))
        want = savgol_filter(y, window, order, mode="interp")
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10)


def test_savgol_rejects_bad_window():
    with pytest.raises(inril.Error):
        inril.savgol_filter([1.0, 2.0, 3.0], 4, 2)


@pytest.mark.parametrize("dim", [2, 64, 1024])
def test_dual_cone_against_numpy(dim):
    rng = np.random.default_rng(dim)
    for _ in range(200):
        a, b = rng.normal(size=dim), rng.normal(size=dim)
        if rng.random() < 0.5:
            b -= 2.0 * abs(a @ b) / (a @ a) * a
        d = np.array(inril.dual_cone_combine(a.tolist(), b.tolist()))
        if a @ b >= 0:
            assert np.array_equal(d, a + b)
        else:
            assert d @ a >= -1e-10 and d @ b >= -1e-10
        assert inril.measure_alignment(a.tolist(), b.tolist()) == pytest.approx(
            -(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5])
@pytest.mark.parametrize("m", [1, 2, 5, 10])
def test_affine_fixed_point(alpha, m):
    q = 1.0 - alpha
    closed = (1.0 - q**m) / (1.0 - q ** (m + 1))
    assert inril.affine_fixed_point(alpha, m) == pytest.approx(closed, abs=1e-12)
    assert inril.simulate_affine_cycles(alpha, m, 5000) == pytest.approx(closed, abs=1e-9)


def test_efficiency_ratio():
    ratio, beta = inril.efficiency_ratio(3.0, 0.25, 1.0)
    assert beta == pytest.approx(0.25)
    assert ratio == pytest.approx(1.0, abs=1e-12)
    assert inril.break_even_beta(3.0) == pytest.approx(0.25)
    with pytest.raises(inril.DomainError):
        inril.efficiency_ratio(3.0, 2.0, 1.0)


def test_theory_suite_records():
    records = inril.theory_suite(bound_runs=10, bound_T=50, paired_seeds=4)
    names = [r["name"] for r in records]
    assert len(names) == len(set(names))
    by_name = {r["name"]: r for r in records}
    assert by_name["bound_rl_only"]["pass"]
    assert all(r["pass"] for r in records if r["name"].startswith("fixed_point"))
    assert all(set(r) >= {"name", "lhs", "rhs", "pass", "margin"} for r in records)


def test_derive_seed_is_stable():
    assert inril.derive_seed(0, 4, 1) == inril.derive_seed(0, 4, 1)
    assert inril.derive_seed(0, 4, 1) != inril.derive_seed(0, 4, 2)


def test_gridworld_expert_episode():
    env = inril.Env("gridworld")
    obs = env.reset(3)
    total = 0.0
    while not env.terminal:
        t = env.step(inril.expert_action(env, obs))
        obs, total = t["next_obs"], total + t["reward"]
    assert t["success"] and total == 1.0


def test_unknown_config_key():
    with pytest.raises(inril.ConfigError):
        inril.resolve_config(None, ["no_such_key=1"])
    cfg = inril.resolve_config(None, ['env="pointmass"', "m=3"])
    assert cfg["m"] == 3 and cfg["env"] == "pointmass"


def test_pipeline(tmp_path, monkeypatch):
    monkeypatch.setenv("INRIL_OUT_ROOT", str(tmp_path))
    over = ['env="pointmass"', "demos.n_trajectories=3", "pretrain.n_steps=40", "pretrain.eval_every=20",
            "pretrain.eval_episodes=2", "eval_episodes=2", "budget_env_steps=512", "m=2",
            "rl.steps_per_batch=128", "policy.hidden=[16]", "value_hidden=[16]"]
    n_traj, n_pairs = inril.gen_demos("demos.txt", overrides=over)
    assert n_traj == 3 and n_pairs > 0
    with pytest.raises(inril.FileError):
        inril.gen_demos("demos.txt", overrides=over)
    demos = tmp_path / "demos.txt"
    pre = inril.pretrain(demos, "pre", overrides=over)
    assert pre["final_step"] == 40
    assert pre["final_full_loss"] <= pre["initial_full_loss"]
    ft = inril.finetune(demos, "ft", checkpoint=tmp_path / "pre" / "final.ckpt", overrides=over)
    assert ft["cycles"] == 2 and ft["env_steps"] == 512
    s = inril.summarize_log(tmp_path / "ft" / "log.ndjson")
    assert s["cycles"] == 2 and math.isfinite(s["final_il_loss"])
    first = (tmp_path / "ft" / "log.ndjson").read_bytes()
    inril.finetune(demos, "ft2", checkpoint=tmp_path / "pre" / "final.ckpt", overrides=over)
    assert (tmp_path / "ft2" / "log.ndjson").read_bytes() == first


def test_shipped_configs_resolve():
    for p in sorted((SOURCE / "configs").glob("*.json")):
        cfg = inril.resolve_config(p, [])
        json.dumps(cfg)
