"""Tests for the episodic pricing environment."""

import numpy as np
import pytest

from bwmarket.env import (
    EnvConfig,
    PricingEnv,
    WARMUP_UNIFORM,
    default_demand_scale,
    theoretical_baseline,
)
from bwmarket.game import rsu_utility

from _oracles import random_instance, simple_instance


@pytest.fixture
def symmetric():
    return simple_instance(J=2, budget=2.0)


class TestReset:
    def test_zero_warmup_zero_observations(self, symmetric):
        env = PricingEnv(symmetric, EnvConfig(history_length=3, episode_length=5))
        obs = env.reset(seed=0)
        assert len(obs) == 2
        for o in obs:
            assert o.shape == (env.observation_dim,)
            assert np.all(o == 0.0)

    def test_same_seed_identical(self, symmetric):
        cfg = EnvConfig(history_length=2, episode_length=5,
                        warmup_policy=WARMUP_UNIFORM)
        a = PricingEnv(symmetric, cfg).reset(seed=42)
        b = PricingEnv(symmetric, cfg).reset(seed=42)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_uniform_warmup_price_range(self):
        rng = np.random.default_rng(1)
        inst = random_instance(rng, I=3, J=2)
        cfg = EnvConfig(history_length=4, episode_length=6,
                        warmup_policy=WARMUP_UNIFORM)
        env = PricingEnv(inst, cfg)
        obs = env.reset(seed=7)
        caps = inst.price_caps()
        cs = inst.costs()
        for j, o in enumerate(obs):
            blocks = o.reshape(cfg.history_length, 2, inst.num_uavs)
            prices = blocks[:, 0, :]
            assert np.all(prices >= cs[j] / caps[j] - 1e-12)
            assert np.all(prices <= 1.0 + 1e-12)


class TestStep:
    def test_cost_prices_zero_rewards(self, symmetric):
        env = PricingEnv(symmetric, EnvConfig(history_length=1, episode_length=3))
        env.reset(seed=0)
        out = env.step([np.full(1, 1.0), np.full(1, 1.0)])
        np.testing.assert_array_equal(out.rewards, [0.0, 0.0])

    def test_equilibrium_prices_match_solver_rewards(self, symmetric):
        env = PricingEnv(symmetric, EnvConfig(history_length=1, episode_length=3))
        env.reset(seed=0)
        out = env.step([np.full(1, 5.0), np.full(1, 5.0)])
        np.testing.assert_allclose(out.rewards, [0.8, 0.8], atol=1e-9)

    def test_reward_memoryless(self, symmetric):
        env = PricingEnv(symmetric, EnvConfig(history_length=1, episode_length=5))
        env.reset(seed=0)
        a = env.step([np.full(1, 3.0), np.full(1, 4.0)])
        b = env.step([np.full(1, 3.0), np.full(1, 4.0)])
        np.testing.assert_array_equal(a.rewards, b.rewards)

    def test_reward_equals_rsu_utility_bit_for_bit(self):
        rng = np.random.default_rng(2)
        inst = random_instance(rng, I=3, J=2)
        env = PricingEnv(inst, EnvConfig(history_length=1, episode_length=4))
        env.reset(seed=0)
        prices = [rng.uniform(inst.costs()[j], inst.price_caps()[j], 3)
                  for j in range(2)]
        out = env.step(prices)
        for j in range(2):
            expected = rsu_utility(inst, j, prices[j], out.demands.demands[:, j])
            assert out.rewards[j] == expected

    def test_out_of_box_actions_clamped(self, symmetric):
        env = PricingEnv(symmetric, EnvConfig(history_length=1, episode_length=3))
        env.reset(seed=0)
        out = env.step([np.full(1, 1000.0), np.full(1, -5.0)])
        # clamped to cap 35 and cost 1: reward of agent 1 is zero margin
        assert out.rewards[1] == 0.0
        newest_price = env._history[0][-1][0]
        assert newest_price[0] == pytest.approx(1.0)  # 35/35

    def test_done_after_episode_length(self, symmetric):
        env = PricingEnv(symmetric, EnvConfig(history_length=1, episode_length=2))
        env.reset(seed=0)
        act = [np.full(1, 5.0), np.full(1, 5.0)]
        assert not env.step(act).done
        assert env.step(act).done


class TestHistory:
    def test_history_order_newest_last(self, symmetric):
        env = PricingEnv(symmetric, EnvConfig(history_length=2, episode_length=5))
        env.reset(seed=0)
        env.step([np.full(1, 2.0), np.full(1, 2.0)])
        env.step([np.full(1, 10.0), np.full(1, 10.0)])
        obs = env.observations()[0].reshape(2, 2, 1)
        assert obs[0, 0, 0] == pytest.approx(2.0 / 35.0)
        assert obs[1, 0, 0] == pytest.approx(10.0 / 35.0)

    def test_determinism_full_rollout(self):
        rng = np.random.default_rng(3)
        inst = random_instance(rng, I=2, J=2)
        cfg = EnvConfig(history_length=2, episode_length=4,
                        warmup_policy=WARMUP_UNIFORM)
        actions = [[rng.uniform(inst.costs()[j], inst.price_caps()[j], 2)
                    for j in range(2)] for _ in range(4)]

        def rollout():
            env = PricingEnv(inst, cfg)
            env.reset(seed=11)
            outs = [env.step(a) for a in actions]
            return outs

        a, b = rollout(), rollout()
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.rewards, y.rewards)
            for ox, oy in zip(x.next_observations, y.next_observations):
                np.testing.assert_array_equal(ox, oy)

    def test_observation_entries_in_unit_interval(self):
        rng = np.random.default_rng(4)
        inst = random_instance(rng, I=2, J=3)
        cfg = EnvConfig(history_length=3, episode_length=6,
                        warmup_policy=WARMUP_UNIFORM)
        env = PricingEnv(inst, cfg)
        env.reset(seed=5)
        for _ in range(4):
            acts = [rng.uniform(inst.costs()[j], inst.price_caps()[j], 2)
                    for j in range(3)]
            out = env.step(acts)
            for o in out.next_observations:
                assert np.all(o >= 0.0) and np.all(o <= 1.0)


class TestBaseline:
    def test_symmetric_baseline(self, symmetric):
        value, consistent = theoretical_baseline(symmetric)
        assert consistent
        assert value == pytest.approx(0.8, abs=1e-6)

    def test_zero_surplus_baseline(self):
        inst = simple_instance(J=2, ssim=0.4, threshold=0.5)
        value, consistent = theoretical_baseline(inst)
        assert value == 0.0
        assert consistent

    def test_baseline_nonnegative_random(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            inst = random_instance(rng, I=2, J=2)
            value, _ = theoretical_baseline(inst)
            assert value >= -1e-12


class TestConfig:
    def test_invalid_history(self):
        with pytest.raises(ValueError):
            EnvConfig(history_length=0)

    def test_episode_shorter_than_history(self):
        with pytest.raises(ValueError):
            EnvConfig(history_length=5, episode_length=3)

    def test_default_demand_scale_positive(self, symmetric):
        assert default_demand_scale(symmetric) > 0
