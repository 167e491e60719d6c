import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groverdist import encoder as en
from groverdist import statevector as sv
from groverdist.errors import InfeasibleTargetError, NormalizationError, PartitionError

THREE_CLASS = en.TargetDistribution.build(8, [[0, 1], [2, 3, 4], [5, 6, 7]], [0.6, 0.3, 0.1])


def dense_schedule(dist, order, t_fs):
    """Brute-force replay with 2N x 2N matrices."""
    n = dist.n_values
    vec = sv.new_uniform(n).to_vector()
    for j, t in zip(order[:-1], t_fs):
        g = sv.conditional_grover_matrix(n, dist.classes[j])
        vec = np.linalg.matrix_power(g, t) @ vec
        for k in dist.classes[j]:
            vec[[2 * k, 2 * k + 1]] = vec[[2 * k + 1, 2 * k]]
    return vec.reshape(n, 2)


class TestTargetDistribution:
    def test_implied_last_target(self):
        d = en.TargetDistribution.build(4, [[0], [1, 2, 3]], [0.4])
        assert d.class_targets == pytest.approx((0.4, 0.6))

    def test_per_state_targets(self):
        np.testing.assert_allclose(THREE_CLASS.per_state_targets()[[0, 2, 5]], [0.3, 0.1, 0.1 / 3])


class TestValidation:
    def test_ok(self):
        d = en.TargetDistribution.build(4, [[0], [1], [2], [3]], [0.25] * 4)
        assert en.validate_targets(d).n_values == 4

    def test_overlap(self):
        d = en.TargetDistribution.build(4, [[0, 1], [1, 2, 3]], [0.5, 0.5])
        with pytest.raises(PartitionError):
            en.validate_targets(d)

    def test_gap(self):
        d = en.TargetDistribution.build(4, [[0], [1, 2]], [0.5, 0.5])
        with pytest.raises(PartitionError):
            en.validate_targets(d)

    def test_sum_below_one(self):
        d = en.TargetDistribution.build(4, [[0], [1, 2, 3]], [0.5, 0.4])
        with pytest.raises(NormalizationError):
            en.validate_targets(d)

    def test_unreachable_target(self):
        # four of eight marked: one iterate maps the class onto itself
        d = en.TargetDistribution.build(8, [[0, 1, 2, 3], [4, 5, 6, 7]], [0.9, 0.1])
        with pytest.raises(InfeasibleTargetError):
            en.validate_targets(d)


class TestEncode:
    def test_single_class_keeps_uniform(self):
        enc = en.encode(en.TargetDistribution.build(5, [range(5)], [1.0]))
        assert enc.plan.steps == ()
        np.testing.assert_allclose(enc.per_state, 0.2)

    def test_exact_search(self):
        enc = en.encode(en.TargetDistribution.build(4, [[2], [0, 1, 3]], [1.0, 0.0]))
        assert enc.t_f == {0: 1}
        assert abs(enc.state.amplitude(2, 0)) == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(enc.per_state, [0, 0, 1, 0], atol=1e-15)

    def test_three_class_matches_dense_replay(self):
        enc = en.encode(THREE_CLASS)
        t_fs = [s.t_f for s in enc.plan.steps]
        dense = dense_schedule(THREE_CLASS, enc.order, t_fs)
        np.testing.assert_allclose(enc.state.amplitudes, dense, atol=1e-12)
        for j, step in zip(enc.order, enc.plan.steps):
            assert enc.class_errors[j] == pytest.approx(step.class_abs_error, abs=1e-12)
        # coarse at N=8: every class stays at its uniform share
        np.testing.assert_allclose(enc.per_class, [0.25, 0.375, 0.375], atol=1e-12)

    @given(st.integers(8, 96), st.integers(2, 6), st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_predicted_equals_simulated(self, n, j, seed):
        size = max(1, n // (2 * j))
        dist = en.random_reachable_targets(n, j, size, seed)
        enc = en.encode(dist)
        classes = [dist.classes[c] for c in enc.order]
        np.testing.assert_allclose(enc.plan.per_state_probabilities(classes), enc.per_state, atol=1e-9)
        assert enc.per_state.sum() == pytest.approx(1.0, abs=1e-12)

    def test_observer_sees_every_operator(self):
        seen = []
        en.encode(THREE_CLASS, observer=lambda s, op, step: seen.append(op))
        assert seen[0] == "init"
        assert seen.count("tick") == 5

    def test_planning_sizes_override(self):
        enc = en.encode(THREE_CLASS, planning_sizes=[2, 3, 3])
        assert enc.per_class.sum() == pytest.approx(1.0)


class TestRemainderRules:
    def test_largest(self):
        d = en.TargetDistribution.build(6, [[0, 1, 2, 3], [4], [5]], [0.5, 0.25, 0.25])
        assert en.encoding_order(d, "largest") == [1, 2, 0]

    def test_least_likely_orders_by_target(self):
        d = en.TargetDistribution.build(4, [[0], [1], [2], [3]], [0.1, 0.6, 0.05, 0.25])
        assert en.encoding_order(d, "least-likely") == [1, 3, 0, 2]

    def test_least_likely_can_go_below_uniform_share(self):
        d = en.TargetDistribution.build(4, [[0], [1], [2], [3]], [0.02, 0.03, 0.05, 0.9])
        last = en.encode(d, strict=False)
        heavy = en.encode(d, remainder="least-likely", strict=False)
        assert last.per_class[0] >= 0.25 - 1e-12
        assert heavy.per_class[0] < 0.25
        assert heavy.max_class_error < last.max_class_error


class TestSampling:
    def test_ancilla_zero_mass(self):
        d = en.TargetDistribution.build(4, [[2], [0, 1, 3]], [1.0, 0.0])
        enc = en.encode(d)
        assert {en.sample_value(enc, s) for s in range(30)} == {2}

    def test_single_member_remainder(self):
        d = en.TargetDistribution.build(4, [[0, 1, 2], [3]], [0.75, 0.25])
        enc = en.encode(d)
        rng = np.random.default_rng(0)
        for _ in range(20):
            k = en.sample_value(enc, rng)
            assert k in (0, 1, 2, 3)
        # nothing was amplified, so ancilla 1 only holds index 3
        assert enc.state.amplitude(3, 1) != 0
        assert all(enc.state.amplitude(k, 1) == 0 for k in (0, 1, 2))

    def test_class_frequencies_within_three_sigma(self):
        enc = en.encode(THREE_CLASS)
        draws = en.sample_values(enc, 50_000, np.random.default_rng(11))
        labels = np.zeros(8, dtype=int)
        for j, c in enumerate(THREE_CLASS.classes):
            labels[list(c)] = j
        freq = np.bincount(labels[draws], minlength=3) / draws.size
        sigma = np.sqrt(enc.per_class * (1 - enc.per_class) / draws.size)
        assert np.all(np.abs(freq - enc.per_class) <= 3 * sigma)

    def test_scalar_and_vector_sampling_agree_in_law(self):
        enc = en.encode(THREE_CLASS)
        rng = np.random.default_rng(2)
        single = np.array([en.sample_value(enc, rng) for _ in range(4000)])
        freq = np.bincount(single, minlength=8) / single.size
        assert np.abs(freq - enc.per_state).max() < 0.03


class TestReport:
    def test_rows(self):
        rows = en.class_error_report(en.encode(THREE_CLASS))
        assert [r["role"] for r in rows] == ["encoded", "encoded", "remainder"]
        assert sum(r["achieved"] for r in rows) == pytest.approx(1.0)

    def test_achieved_distribution_is_a_copy(self):
        enc = en.encode(THREE_CLASS)
        per_class, per_state = en.achieved_distribution(enc)
        per_class[:] = 0
        assert enc.per_class.sum() == pytest.approx(1.0)
        assert per_state.sum() == pytest.approx(1.0)


class TestReachableTargets:
    def test_same_shape_across_n(self):
        a = en.random_reachable_targets(64, 4, 1, 3)
        b = en.random_reachable_targets(256, 4, 1, 3)
        assert a.sizes[:3] == b.sizes[:3] == (1, 1, 1)
        assert math.isclose(sum(a.class_targets), 1.0)

    def test_validates(self):
        for seed in range(10):
            en.validate_targets(en.random_reachable_targets(128, 5, 2, seed))

    def test_per_class_sizes(self):
        dist = en.random_reachable_targets(40, 4, [3, 1, 7], 2)
        assert dist.sizes == (3, 1, 7, 29)
        en.validate_targets(dist)

    def test_sizes_must_fit(self):
        with pytest.raises(ValueError):
            en.reachable_targets(8, 3, [4, 4], [0.5, 0.5])
        with pytest.raises(ValueError):
            en.reachable_targets(8, 3, [2], [0.5, 0.5])
