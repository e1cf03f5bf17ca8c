import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbrad.data import generate_synthetic
from fbrad.detectors import DetectorSpec, TrainingConfig
from fbrad.ensemble import (
    EnsembleConfig,
    binarize,
    build_member,
    ensemble_output,
    fit_ensemble,
    fit_threshold,
    majority_vote,
    member_point_scores,
    member_rng,
    nested_rotation,
    partition_features,
    quantile,
    sample_feature_subset,
    score_points,
    split_ab,
    window_scores_to_points,
)
from fbrad.errors import ValidationError

FAST = TrainingConfig(epochs=2)


def small_cfg(**kw):
    base = dict(M=3, K=2, W=8, method="fbr", training=FAST,
                detector_specs=(DetectorSpec("dense_autoencoder", {"hidden": [8, 4]}),))
    base.update(kw)
    return EnsembleConfig(**base)


@pytest.fixture(scope="module")
def series():
    return generate_synthetic(300, 8, 0.05, 2, 5.0, seed=3)


def type7(values, p):
    # independent oracle: h = (n-1)p, interpolate between floor and ceil order stats
    v = sorted(values)
    h = (len(v) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


class TestThreshold:
    def test_paper_iqr_1_to_100(self):
        scores = list(range(1, 101))
        assert type7(scores, 0.25) == 25.75 and type7(scores, 0.75) == 75.25
        assert fit_threshold(scores, "paper_iqr") == 74.25

    def test_tukey_1_to_100(self):
        assert fit_threshold(list(range(1, 101)), "tukey") == 149.5

    def test_constant_falls_back_to_q3(self):
        assert fit_threshold([3.0] * 10, "paper_iqr") == 3.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.floats(0, 1))
    def test_quantile_oracle(self, values, p):
        assert quantile(values, p) == pytest.approx(type7(values, p), rel=1e-12, abs=1e-6)

    def test_too_few_scores(self):
        with pytest.raises(ValidationError):
            fit_threshold([1.0, 2.0, 3.0])


class TestBinarizeAndVote:
    def test_strict_inequality(self):
        assert binarize([2.0], 2.0).tolist() == [0]
        assert binarize([0.0, 4.0], 2.0).tolist() == [0, 1]
        assert binarize([0.1, 5.0], 0.0).tolist() == [1, 1]

    def test_small_votes(self):
        assert majority_vote([1, 1, 0]) == 1
        assert majority_vote([1, 1, 0, 0]) == 0

    def test_brute_force_up_to_15(self):
        for m in range(1, 16):
            rows = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int8)
            expect = np.array([1 if bin(i).count("1") * 2 > m else 0 for i in range(2 ** m)])
            # itertools.product enumerates in binary counting order
            assert np.array_equal(majority_vote(rows), expect)


class TestSubsets:
    def test_d2(self):
        rng = np.random.default_rng(0)
        assert all(len(sample_feature_subset(2, rng)) == 1 for _ in range(50))

    def test_distribution_d8(self):
        rng = np.random.default_rng(123)
        counts = {k: 0 for k in range(4, 8)}
        n = 10_000
        for _ in range(n):
            s = sample_feature_subset(8, rng)
            assert len(set(s)) == len(s) and s == sorted(s)
            counts[len(s)] += 1
        sigma = math.sqrt(n * 0.25 * 0.75)
        for c in counts.values():
            assert abs(c - n / 4) <= 3 * sigma

    def test_d_below_2(self):
        with pytest.raises(ValidationError):
            sample_feature_subset(1, np.random.default_rng(0))

    @pytest.mark.parametrize("size,K,expect", [(6, 2, [3, 3]), (7, 2, [4, 3]), (5, 5, [1] * 5), (7, 3, [3, 2, 2])])
    def test_partition_sizes(self, size, K, expect):
        groups = partition_features(range(10, 10 + size), K, np.random.default_rng(1))
        assert [len(g) for g in groups] == expect
        assert sorted(j for g in groups for j in g) == list(range(10, 10 + size))

    def test_partition_too_many(self):
        with pytest.raises(ValidationError):
            partition_features([0, 1], 3, np.random.default_rng(0))


class TestRotation:
    @pytest.mark.parametrize("K", [2, 3])
    def test_orthogonal_block_structure(self, K):
        rng = np.random.default_rng(K)
        x = rng.normal(size=(200, 7))
        rot = nested_rotation(x, K, 0.75, rng)
        r = rot.assembled
        assert np.abs(r.T @ r - np.eye(7)).max() <= 1e-8
        at = 0
        mask = np.zeros_like(r, dtype=bool)
        for group in rot.partition_layout:
            mask[at:at + len(group), at:at + len(group)] = True
            at += len(group)
        assert np.all(r[~mask] == 0.0)

    def test_rotation_applied_to_all_rows(self, series):
        cfg = small_cfg(M=1)
        member = build_member(series.values, cfg, 0)
        z = member.transform(series.values)
        assert z.shape == (series.n, len(member.feature_subset))


class TestMembers:
    def test_plain_bypasses_bagging(self, series):
        m = build_member(series.values, small_cfg(method="plain", M=1), 0)
        assert m.feature_subset == tuple(range(8))
        assert np.array_equal(m.rotation.assembled, np.eye(8))

    def test_fb_identity_rotation(self, series):
        m = build_member(series.values, small_cfg(method="fb"), 0)
        assert 4 <= len(m.feature_subset) <= 7
        assert np.array_equal(m.rotation.assembled, np.eye(len(m.feature_subset)))

    def test_fbr_member_structure(self, series):
        m = build_member(series.values, small_cfg(), 0)
        assert len(m.rotation.partition_layout) == 2
        assert m.rotation.assembled.shape == (len(m.feature_subset),) * 2
        assert m.threshold >= 0

    def test_too_few_rows(self):
        with pytest.raises(ValidationError):
            build_member(np.zeros((15, 3)), small_cfg(), 0)

    def test_fit_ensemble_deterministic_and_thread_independent(self, series):
        cfg = small_cfg(M=4)
        a = fit_ensemble(series.values, cfg, stream=(2,))
        b = fit_ensemble(series.values, cfg, stream=(2,), threads=3)
        assert len(a) == 4
        for ma, mb in zip(a, b):
            assert ma.feature_subset == mb.feature_subset
            assert ma.detector.weights.tobytes() == mb.detector.weights.tobytes()
            assert ma.threshold == mb.threshold

    def test_round_robin_specs(self, series):
        specs = (DetectorSpec("dense_autoencoder", {"hidden": [4]}), DetectorSpec("linear_pca"))
        members = fit_ensemble(series.values, small_cfg(M=4, detector_specs=specs))
        assert [m.detector.spec.kind for m in members] == ["dense_autoencoder", "linear_pca"] * 2

    def test_member_streams_independent(self):
        # member j's draws depend only on (seed, stream, j)
        a = member_rng(5, 0, 3).random(4)
        b = member_rng(5, 0, 3).random(4)
        c = member_rng(5, 0, 4).random(4)
        assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.fixture(scope="module")
def members(series):
    return fit_ensemble(series.values, small_cfg(M=3))


class TestScoring:
    def test_shapes_and_binary(self, series, members):
        sm = score_points(members, series.values)
        assert sm.scores.shape == sm.binary.shape == (series.n, 3)
        thr = np.array([m.threshold for m in members])
        assert np.array_equal(sm.binary, (sm.scores > thr).astype(np.int8))

    def test_duplicate_members_duplicate_columns(self, series, members):
        sm = score_points([members[0], members[0]], series.values)
        assert np.array_equal(sm.scores[:, 0], sm.scores[:, 1])

    def test_leading_points_take_window_zero(self, series, members):
        s = member_point_scores(members[0], series.values)
        assert np.all(s[:8] == s[7])

    def test_window_mapping(self):
        out = window_scores_to_points([5.0, 6.0, 7.0], 5, 3)
        assert out.tolist() == [5.0, 5.0, 5.0, 6.0, 7.0]

    def test_vote_fraction_output(self, series, members):
        score, binary = ensemble_output(members, series.values)
        sm = score_points(members, series.values)
        assert np.array_equal(score, sm.binary.mean(axis=1))
        assert np.array_equal(binary, majority_vote(sm.binary))

    def test_single_member_raw_score(self, series, members):
        score, _ = ensemble_output(members[:1], series.values)
        assert np.array_equal(score, member_point_scores(members[0], series.values))

    def test_wrong_columns(self, members):
        with pytest.raises(ValidationError):
            score_points(members, np.zeros((50, 5)))


class TestSplitAB:
    def test_even(self):
        assert split_ab(400, 32) == (range(0, 200), range(200, 400))

    def test_odd_remainder_to_b(self):
        a, b = split_ab(401, 32)
        assert (len(a), len(b)) == (200, 201)

    def test_too_small(self):
        with pytest.raises(ValidationError):
            split_ab(20, 32)


def test_config_validation():
    with pytest.raises(ValidationError):
        EnsembleConfig(M=0)
    with pytest.raises(ValidationError):
        EnsembleConfig(subsample_fraction=0.0)
    with pytest.raises(ValidationError):
        EnsembleConfig(method="bagging")
