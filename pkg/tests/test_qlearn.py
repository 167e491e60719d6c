import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groverdist import qlearn as ql
from groverdist.encoder import sample_values
from groverdist.envs import GridWorld, KArmedBandit, optimal_actions, value_iteration
from groverdist.errors import InvalidActionError, StalePartitionError


class FixedValues:
    """Value function stub returning one fixed array for every state."""

    def __init__(self, values):
        self._v = np.asarray(values, dtype=float)

    def values(self, s):
        return self._v


class TwoStateChain:
    """State 0 -> state 1 (reward 1) -> terminal 2 (reward 2)."""

    states = [0, 1, 2]

    def reset(self, rng=None):
        return 0

    def allowed_actions(self, s):
        return (0,)

    def is_terminal(self, s):
        return s == 2

    def step(self, s, a, rng=None):
        return (1, 1.0) if s == 0 else (2, 2.0)

    def transitions(self, s, a):
        return [(1.0, *self.step(s, a))]


class TestPartition:
    def test_unit_interval(self):
        assert ql.partition_intervals(0, 1, 4).boundaries == (0, 0.25, 0.5, 0.75, 1)

    def test_degenerate(self):
        p = ql.partition_intervals(0.3, 0.3, 4)
        assert p.n_intervals == 1
        assert ql.classify_values([0.3, 0.3], p).labels.tolist() == [0, 0]

    def test_symmetric(self):
        assert ql.partition_intervals(-2, 2, 2).boundaries == (-2, 0, 2)

    def test_classes(self):
        p = ql.partition_intervals(0, 1, 4)
        assert ql.classify_values([0.1, 0.3, 0.9], p).labels.tolist() == [0, 1, 3]

    def test_half_open_and_closed_last(self):
        p = ql.partition_intervals(0, 1, 4)
        assert ql.classify_values([0.25, 1.0], p).labels.tolist() == [1, 3]

    def test_stale_partition(self):
        with pytest.raises(StalePartitionError):
            ql.classify_values([1.5], ql.partition_intervals(0, 1, 4))

    @given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=40), st.integers(1, 8))
    @settings(max_examples=50, deadline=None)
    def test_every_value_filed_in_its_interval(self, values, j):
        values = np.asarray(values)
        p = ql.partition_intervals(values.min(), values.max(), j)
        a = ql.classify_values(values, p)
        assert a.counts.sum() == values.size
        b = p.boundaries
        for v, lab in zip(values, a.labels):
            assert b[lab] <= v <= b[lab + 1]


class TestClassProbabilities:
    def test_hot_limit_proportional_to_size(self):
        p = ql.partition_intervals(0, 1, 3)
        probs = ql.class_probabilities(p, [2, 5, 1], 1e9)
        np.testing.assert_allclose(probs, [0.25, 0.625, 0.125], atol=1e-9)

    def test_single_class(self):
        p = ql.partition_intervals(0, 1, 4)
        np.testing.assert_allclose(ql.class_probabilities(p, [0, 0, 3, 0], 0.1), [0, 0, 1, 0])

    def test_hand_computed(self):
        p = ql.partition_intervals(0, 1, 4)
        probs = ql.class_probabilities(p, [1, 1, 0, 1], 0.5)
        np.testing.assert_allclose(probs, [0.14024438316608848, 0.2312238976221491, 0.0, 0.6285317192117625], atol=1e-14)

    def test_exact_mode(self):
        values = np.array([0.0, 0.1, 0.9])
        p = ql.partition_intervals(0, 0.9, 2)
        a = ql.classify_values(values, p)
        probs = ql.class_probabilities(p, a.counts, 0.3, values, a.labels)
        w = np.exp(values / 0.3)
        np.testing.assert_allclose(probs, [w[:2].sum() / w.sum(), w[2] / w.sum()])

    def test_cold_does_not_overflow(self):
        p = ql.partition_intervals(0, 100, 4)
        probs = ql.class_probabilities(p, [1, 1, 1, 1], 1e-3)
        assert probs[-1] == pytest.approx(1.0)

    def test_schedule(self):
        sched = ql.exponential_schedule(1.0, 0.01)
        assert sched(0, 11) == 1.0 and sched(10, 11) == pytest.approx(0.01)


class TestSelectors:
    def test_single_action(self):
        q = FixedValues([3.0])
        a, stats = ql.select_action_quantum(0, q, ql.PolicyConfig(), 0)
        assert a == 0 and stats.j_calls == 0

    def test_classical_charges_every_action(self):
        _, stats = ql.select_action_classical(0, FixedValues(np.arange(10.0)), ql.PolicyConfig(), 0)
        assert stats.q_calls == 10

    def test_hot_quantum_selection_uniform(self):
        q = FixedValues(np.linspace(0, 1, 16))
        enc, _ = ql.quantum_distribution(0, q, ql.PolicyConfig(), 0, temperature=1e9)
        draws = sample_values(enc, 20_000, np.random.default_rng(1))
        freq = np.bincount(draws, minlength=16) / draws.size
        sigma = math.sqrt((1 / 16) * (15 / 16) / draws.size)
        assert np.all(np.abs(freq - 1 / 16) <= 3 * sigma)

    def test_same_targets_on_both_paths(self):
        values = np.random.default_rng(4).normal(size=32)
        q = FixedValues(values)
        pol = ql.PolicyConfig()
        enc, _ = ql.quantum_distribution(0, q, pol, 0, temperature=0.3)
        part = ql.partition_intervals(values.min(), values.max(), pol.n_intervals)
        counts = ql.classify_values(values, part).counts
        np.testing.assert_allclose(enc.dist.class_targets, ql.class_probabilities(part, counts, 0.3))

    def test_classical_uniform_values(self):
        q = FixedValues(np.zeros(64))
        rng = np.random.default_rng(3)
        draws = np.array([ql.select_action_classical(0, q, ql.PolicyConfig(), rng, 0.1)[0] for _ in range(6400)])
        freq = np.bincount(draws, minlength=64) / draws.size
        sigma = math.sqrt((1 / 64) * (63 / 64) / draws.size)
        assert np.all(np.abs(freq - 1 / 64) <= 3.5 * sigma)

    def test_quantum_counters(self):
        q = FixedValues(np.random.default_rng(0).normal(size=64))
        _, stats = ql.select_action_quantum(0, q, ql.PolicyConfig(), 0, 0.2)
        assert stats.j_calls == stats.grover_iterations + stats.counting_invocations
        assert stats.minmax_scan_calls == 64
        assert stats.q_calls == 0

    def test_j_calls_sublinear(self):
        per_action = []
        for n in (64, 256, 1024):
            env = KArmedBandit.dominant(n, np.random.default_rng(n))
            q = FixedValues(env.means)
            _, stats = ql.select_action_quantum(0, q, ql.PolicyConfig(), 0, 0.05)
            per_action.append(stats.j_calls / n)
        assert per_action[0] > per_action[1] > per_action[2]


class TestTdUpdate:
    def test_first_update(self):
        env = GridWorld(2, 1)
        q = ql.TabularQ(env)
        ql.td_update(q, 0, 1, 1.0, 1, ql.TrainingConfig(learning_rate=0.5, discount=0.9))
        assert q.evaluate(0, 1) == 0.5

    def test_zero_rate_is_noop(self):
        env = GridWorld(2, 1)
        q = ql.TabularQ(env)
        cfg = ql.TrainingConfig(learning_rate=0.0)
        ql.td_update(q, 0, 1, 1.0, 1, cfg)
        assert q.evaluate(0, 1) == 0.0

    def test_chain_converges(self):
        env = TwoStateChain()
        q = ql.TabularQ(env)
        cfg = ql.TrainingConfig(learning_rate=0.5, discount=0.9)
        for _ in range(60):
            ql.td_update(q, 1, 0, 2.0, 2, cfg, terminal=True)
            ql.td_update(q, 0, 0, 1.0, 1, cfg)
        q_star = value_iteration(env, 0.9)
        assert q.evaluate(0, 0) == pytest.approx(q_star[0][0], abs=1e-9)
        assert q.evaluate(0, 0) == pytest.approx(1.0 + 0.9 * 2.0, abs=1e-9)

    def test_bad_action(self):
        env = GridWorld(2, 2)
        with pytest.raises(InvalidActionError):
            ql.td_update(ql.TabularQ(env), 0, 7, 0.0, 1, ql.TrainingConfig())

    def test_linear_one_hot_matches_table(self):
        env = GridWorld(3, 3)
        lin, tab = ql.LinearQ.one_hot(env), ql.TabularQ(env)
        cfg = ql.TrainingConfig()
        for s, a, r, s2 in [(0, 1, -1, 1), (1, 2, -1, 4), (0, 1, -1, 1), (4, 1, 10, 5)]:
            ql.td_update(lin, s, a, r, s2, cfg)
            ql.td_update(tab, s, a, r, s2, cfg)
        for s in env.states:
            np.testing.assert_allclose(lin.values(s), tab.values(s))


class TestTrain:
    def test_zero_episodes(self):
        stats = ql.train(GridWorld(2, 2), ql.PolicyConfig(), ql.TrainingConfig(episodes=0))
        assert stats.episode_returns == [] and stats.decisions == 0

    def test_classical_gridworld_optimal(self):
        env = GridWorld(4, 4, exploring_starts=True)
        stats = ql.train(env, ql.PolicyConfig(selector="classical"), ql.TrainingConfig(episodes=1500, seed=1, initial_q=10))
        q_star = value_iteration(env, 0.9)
        policy = ql.greedy_policy(stats.q, env)
        assert all(policy[s] in optimal_actions(q_star, s) for s in policy)

    def test_quantum_bandit(self):
        env = KArmedBandit.dominant(16, np.random.default_rng(5))
        cfg = ql.TrainingConfig(episodes=20, max_steps=20, discount=0.0, learning_rate=0.2, initial_q=2.0, seed=5)
        stats = ql.train(env, ql.PolicyConfig(t_min=0.05), cfg)
        assert ql.greedy_policy(stats.q, env)[0] == env.best_arm
        assert stats.j_calls > 0 and stats.q_calls == 0

    def test_episode_counts_add_up(self):
        env = GridWorld(3, 3, exploring_starts=True)
        stats = ql.train(env, ql.PolicyConfig(), ql.TrainingConfig(episodes=20, seed=2))
        assert sum(c["j_calls"] for c in stats.episode_counts) == stats.j_calls
        assert sum(c["decisions"] for c in stats.episode_counts) == stats.decisions

    def test_seeded_runs_identical(self):
        env = GridWorld(3, 3, exploring_starts=True)
        a = ql.train(env, ql.PolicyConfig(), ql.TrainingConfig(episodes=30, seed=9))
        b = ql.train(env, ql.PolicyConfig(), ql.TrainingConfig(episodes=30, seed=9))
        assert a.episode_returns == b.episode_returns
        assert a.totals() == b.totals()

    def test_bad_config(self):
        with pytest.raises(ValueError):
            ql.PolicyConfig(selector="oracle")
        with pytest.raises(ValueError):
            ql.TrainingConfig(discount=1.0)
