from itertools import combinations

import numpy as np
import pytest

from heatsense.criterion import (
    PENALTY,
    FitnessContext,
    condition_number,
    placement_fitness,
    verify_bounds,
)
from heatsense.errors import RankDeficientError
from heatsense.system import Placement, build_augmented, consistent_system


class TestConditionNumber:
    def test_identity(self):
        cv = condition_number(np.eye(5))
        assert cv.kappa == 1.0
        assert cv.log10_kappa == 0.0
        assert cv.rank_ok

    def test_diagonal(self):
        cv = condition_number(np.diag([3.0, 1.0]))
        assert np.isclose(cv.kappa, 3.0)

    def test_stacked_orthonormal_rows(self):
        W = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        assert np.isclose(condition_number(W).kappa, 1.0)

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        W = rng.normal(size=(30, 12))
        base = condition_number(W).kappa
        for c in (1e-3, 1.0, 1e3):
            assert np.isclose(condition_number(c * W).kappa, base, rtol=1e-10)

    def test_matches_norm_product_definition(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            W = rng.normal(size=(50, 20))
            kappa = condition_number(W).kappa
            ref = np.linalg.norm(W, 2) * np.linalg.norm(np.linalg.pinv(W), 2)
            assert np.isclose(kappa, ref, rtol=1e-8)

    def test_rank_deficient_flagged(self):
        W = np.ones((6, 3))
        cv = condition_number(W)
        assert not cv.rank_ok
        assert np.isinf(cv.kappa)

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError):
            condition_number(np.ones((2, 5)))


class TestPlacementFitness:
    def test_penalty_for_duplicates(self, heat1d_toy_ctx):
        _, ctx = heat1d_toy_ctx
        assert ctx.fitness([3, 3, 5]) == PENALTY

    def test_penalty_for_out_of_range(self, heat1d_toy_ctx):
        _, ctx = heat1d_toy_ctx
        assert ctx.fitness([0, 50]) == PENALTY

    def test_underdetermined_sources_penalized(self, heat1d_toy_ctx):
        # a single sensor cannot pin two source intensities: rank deficient
        _, ctx = heat1d_toy_ctx
        assert ctx.fitness([6]) == PENALTY

    def test_matches_direct_svd(self, heat1d_toy_ctx):
        _, ctx = heat1d_toy_ctx
        p = Placement((1, 4, 8), 12)
        sys = build_augmented(ctx.op, p, ctx.gamma)
        direct = condition_number(sys.W).log10_kappa
        assert np.isclose(placement_fitness(p, ctx), direct, rtol=1e-12)

    def test_full_observation_beats_minimal(self, heat1d_toy_ctx):
        _, ctx = heat1d_toy_ctx
        full = ctx.fitness(list(range(12)))
        minimal = ctx.fitness([5, 7])
        assert full < minimal

    def test_argmin_invariant_under_log(self, heat1d_toy_ctx):
        # ranking subsets by kappa or by log10(kappa) picks the same winner
        _, ctx = heat1d_toy_ctx
        subsets = list(combinations(range(12), 2))
        by_log = min(subsets, key=lambda s: ctx.fitness(s))
        kappas = {}
        for s in subsets:
            sys = build_augmented(ctx.op, Placement(s, 12), ctx.gamma)
            kappas[s] = condition_number(sys.W).kappa
        by_kappa = min(subsets, key=lambda s: kappas[s])
        assert by_log == by_kappa


class TestVerifyBounds:
    def test_no_violations_on_consistent_system(self, heat1d_small):
        _, _, op = heat1d_small
        p = Placement((4, 12, 25, 33, 47, 52), 60)
        sys, _ = consistent_system(op, p, 1.0, np.array([3.0, 1.5]))
        report = verify_bounds(sys, trials=1000, perturb_scale=1e-3, seed=11)
        assert report.violations == 0
        assert report.trials == 1000
        assert report.tightest_ratio_low >= 1.0
        assert report.tightest_ratio_high <= 1.0
        assert report.kappa > 1.0

    def test_zero_scale_gives_zero_ratios(self, heat1d_small):
        _, _, op = heat1d_small
        p = Placement((4, 12, 25), 60)
        sys, _ = consistent_system(op, p, 1.0, np.array([1.0, 1.0]))
        report = verify_bounds(sys, trials=10, perturb_scale=0.0)
        assert report.violations == 0
        assert report.tightest_ratio_low == 0.0
        assert report.tightest_ratio_high == 0.0

    def test_rank_deficient_rejected(self, heat1d_small):
        _, _, op = heat1d_small
        sys = build_augmented(op, Placement((9,), 60), 1.0, measurements=np.array([2.0]))
        with pytest.raises(RankDeficientError):
            verify_bounds(sys, trials=5, perturb_scale=1e-3)
