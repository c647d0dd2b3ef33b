import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as spstats

from helpers import (empirical_distribution, enumeration_log_partition,
                     exact_distribution, total_variation, window_of)
from wetting import core, statics


class TestFreeEnergy:
    def test_vanishes_up_to_two(self):
        assert statics.free_energy(1.0) == 0.0
        assert statics.free_energy(2.0) == 0.0

    def test_closed_form_above_two(self):
        assert statics.free_energy(4.0) == pytest.approx(
            math.log(2.0 / math.sqrt(3.0)), abs=1e-15)

    def test_continuous_at_two(self):
        assert statics.free_energy(2.0 + 1e-9) < 1e-9

    def test_matches_partition_growth(self):
        # (1/N) log Z - log 2 approaches the closed form monotonically
        target = statics.free_energy(4.0)
        errs = []
        for n in (250, 500, 1000, 2000):
            est = statics.partition_zero(4.0, n) / n - math.log(2.0)
            errs.append(abs(est - target))
        assert errs == sorted(errs, reverse=True)
        assert errs[-1] < 0.01


class TestEntropyQ:
    def test_anchors(self):
        assert statics.entropy_q(0.0) == 0.0
        assert statics.entropy_q(1.0) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_against_binomial_counting(self):
        # q(d) = -(1/N) log(#paths with drift d / 2^N) in the limit
        d = 0.5
        exact = statics.entropy_q(d)
        estimates = []
        for n in (200, 500, 1000, 2000):
            count = math.comb(n, (n + int(d * n)) // 2)
            estimates.append(-(math.log(count) - n * math.log(2.0)) / n)
        gaps = [abs(e - exact) for e in estimates]
        assert gaps == sorted(gaps, reverse=True)
        assert gaps[-1] < 5e-3
        assert exact == pytest.approx(0.13081, abs=5e-6)

    def test_domain(self):
        with pytest.raises(ValueError):
            statics.entropy_q(1.2)
        with pytest.raises(ValueError):
            statics.entropy_q(-0.1)

    def test_convexity_second_differences(self):
        d = np.linspace(0.0, 1.0, 401)
        q = np.array([statics.entropy_q(v) for v in d])
        assert np.all(np.diff(q, 2) >= -1e-12)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    @settings(max_examples=50)
    def test_midpoint_convexity(self, d1, d2):
        mid = statics.entropy_q(0.5 * (d1 + d2))
        assert mid <= 0.5 * (statics.entropy_q(d1) + statics.entropy_q(d2)) + 1e-12


class TestDLambda:
    def test_value(self):
        assert statics.d_lambda(4.0) == pytest.approx(0.5, abs=1e-15)

    def test_two_forms_agree_on_grid(self):
        for lam in np.linspace(2.001, 50.0, 200):
            d = statics.d_lambda(lam)
            alt = math.sqrt(1.0 - math.exp(-2.0 * statics.free_energy(lam)))
            assert abs(d - alt) <= 1e-12

    def test_boundary_limit(self):
        vals = [statics.d_lambda(2.0 + eps) for eps in (1e-2, 1e-4, 1e-6)]
        assert vals == sorted(vals, reverse=True)
        assert vals[-1] < 1e-5

    def test_rejected_at_or_below_two(self):
        with pytest.raises(ValueError):
            statics.d_lambda(2.0)


class TestElevatedFreeEnergy:
    def test_zero_below_two(self):
        for lam in (0.5, 1.0, 2.0):
            assert statics.free_energy_elevated(lam, 0.3).free_energy == 0.0

    def test_boundary_curve_point(self):
        # lam = 2/(1-2a): the two maximiser branches meet at d = 2a
        point = statics.free_energy_elevated(4.0, 0.25)
        assert point.free_energy == 0.0
        assert point.d_star == pytest.approx(0.5, abs=1e-6)
        assert point.regime == "free-fast"

    def test_pinned_point_matches_closed_form(self):
        point = statics.free_energy_elevated(6.0, 0.1)
        closed = statics.free_energy(6.0) - 0.1 * math.log(5.0)
        assert point.free_energy == pytest.approx(closed, abs=1e-12)
        assert point.d_star == pytest.approx(2.0 / 3.0, abs=1e-3)
        assert point.regime == "pinned-double-well"

    def test_variational_identity_on_grid(self):
        for a in np.linspace(0.05, 0.45, 9):
            for lam in np.linspace(2.5, 20.0, 8):
                statics.free_energy_elevated(lam, a)  # raises on mismatch

    def test_fast_branch_maximiser_at_2a(self):
        # for lam <= 2/(1-2a) the maximum sits at d = 2a with value -q(2a)
        for a, lam in ((0.25, 3.0), (0.3, 4.0), (0.2, 2.5)):
            assert lam <= statics.fast_phase_edge(a)
            d_star, val, step = statics._variational_maximum(lam, a)
            assert d_star == pytest.approx(2.0 * a, abs=2 * step)
            assert val == pytest.approx(-statics.entropy_q(2.0 * a), abs=1e-8)


class TestLambdaC:
    def test_residual_at_root(self):
        for a in (0.1, 0.25, 0.4):
            lc = statics.lambda_c(a)
            assert abs(statics.free_energy(lc) - a * math.log(lc - 1.0)) <= 1e-9

    def test_small_a_limit(self):
        assert statics.lambda_c(1e-5) == pytest.approx(2.0, abs=1e-2)

    def test_monotone_in_a(self):
        grid = np.linspace(0.05, 0.45, 17)
        vals = [statics.lambda_c(a) for a in grid]
        assert all(x < y for x, y in zip(vals, vals[1:]))

    def test_above_fast_edge(self):
        for a in np.arange(0.05, 0.46, 0.05):
            assert statics.lambda_c(a) >= statics.fast_phase_edge(a)


class TestPartitions:
    def test_n2_single_path(self):
        assert statics.partition_zero(3.0, 2) == pytest.approx(math.log(9.0),
                                                               abs=1e-12)

    def test_n4_two_paths(self):
        assert statics.partition_zero(3.0, 4) == pytest.approx(math.log(36.0),
                                                               abs=1e-12)

    @pytest.mark.parametrize("n", [2, 4, 8, 12, 16])
    def test_counting_at_lambda_one(self, n):
        expected = math.log(len(core.enumerate_bridges(n)))
        assert statics.partition_zero(1.0, n) == pytest.approx(expected,
                                                               abs=1e-10)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 3.0, 6.0])
    @pytest.mark.parametrize("n", [4, 8, 12])
    def test_elevated_against_enumeration(self, lam, n):
        params = core.ModelParams(n, 0.3, lam)
        parts = statics.partition_elevated(lam, 0.3, n)
        for log_val, ensemble in ((parts.log_z, "elevated"),
                                  (parts.log_z_free, "elevated-free"),
                                  (parts.log_z_pinned, "elevated-pinned")):
            oracle = enumeration_log_partition(
                core.enumerate_paths(params, ensemble), lam)
            assert log_val == pytest.approx(oracle, abs=1e-10)

    def test_split_identity(self):
        for lam, a, n in ((3.0, 0.2, 60), (0.8, 0.3, 40), (8.0, 0.25, 80)):
            parts = statics.partition_elevated(lam, a, n)
            total = np.logaddexp(parts.log_z_free, parts.log_z_pinned)
            assert total == pytest.approx(parts.log_z, abs=1e-10)

    def test_subtraction_guard_falls_back(self):
        # free phase at large N: pinned mass is tiny, the flag DP takes over
        parts = statics.partition_elevated(0.5, 0.25, 400)
        assert parts.pinned_method == "touch-flag-dp"
        assert parts.log_z_pinned < parts.log_z_free

    def test_flag_dp_matches_subtraction_when_safe(self):
        lam, a, n = 3.0, 0.25, 40
        parts = statics.partition_elevated(lam, a, n)
        assert parts.pinned_method == "log-subtraction"
        _, touch = statics._backward_pinned(n, lam,
                                            core.bracket(a * n),
                                            core.bracket(a * n))
        assert parts.log_z_pinned == pytest.approx(
            float(touch[0, core.bracket(a * n)]), abs=1e-10)

    def test_free_part_approaches_pure_entropy(self):
        # (1/N) log Zbar - log 2 -> 0 (the never-touching walk costs nothing)
        deficits = []
        for n in (250, 500, 1000, 2000):
            parts = statics.partition_elevated(3.0, 0.25, n)
            deficits.append(abs(parts.log_z_free / n - math.log(2.0)))
        assert deficits == sorted(deficits, reverse=True)
        assert deficits[-1] < 0.01


class TestBallotCounts:
    def test_forced_paths(self):
        for l in (2, 4, 10, 50):
            assert statics.ballot_count(l, l).count == 1

    def test_small_examples(self):
        assert statics.ballot_count(4, 2).count == 2
        assert statics.ballot_count(3, 1).count == 1

    @pytest.mark.parametrize("l", range(2, 18, 2))
    def test_against_enumeration(self, l):
        # the first step of a strictly positive walk is forced up, so
        # count bridges of length l-1 from height 1 staying >= 1
        for b in range(2, l + 1, 2):
            expected = len(core.enumerate_bridges(l - 1, 1, b, wall=1, cap=20))
            assert statics.ballot_count(l, b).count == expected

    def test_parity_violation(self):
        with pytest.raises(ValueError):
            statics.ballot_count(4, 1)

    def test_weak_counts(self):
        # non-negative walks 0 -> 0 are Catalan numbers
        assert statics.ballot_count(4, 0, strict=False).count == 2
        assert statics.ballot_count(6, 0, strict=False).count == 5
        assert statics.ballot_count(4, 2, strict=False).count == 3


class TestConditionedPositivity:
    def test_examples(self):
        assert statics.conditioned_positivity_probability(4, 2) == \
            Fraction(1, 2)
        assert statics.conditioned_positivity_probability(6, 6) == 1

    def test_exact_identity_large(self):
        for l in (100, 500, 1234, 2000):
            for b in (2, l // 2 if (l // 2) % 2 == 0 else l // 2 + 1, l):
                assert statics.conditioned_positivity_probability(l, b) == \
                    Fraction(b, l)


class TestContactWindows:
    def test_degenerate_window_value(self):
        lam, a, n = 3.0, 0.2, 12
        params = core.ModelParams(n, a, lam)
        c = params.boundary
        for l in range(c, n - c + 1, 2):
            got = statics.partition_window(lam, a, n, statics.ContactWindow(l, l))
            want = (math.log(lam) + statics.ballot_count(l, c).log
                    + statics.ballot_count(n - l, c).log)
            assert got == pytest.approx(want, abs=1e-12)

    def test_window_against_enumeration(self):
        lam, a, n = 3.0, 0.2, 10
        params = core.ModelParams(n, a, lam)
        pinned = core.enumerate_paths(params, "elevated-pinned")
        for w in statics.contact_windows(params):
            members = [eta for eta in pinned if window_of(eta) == (w.l, w.r)]
            got = statics.partition_window(lam, a, n, w)
            want = enumeration_log_partition(members, lam)
            assert got == pytest.approx(want, abs=1e-10)

    def test_counting_at_lambda_one(self):
        a, n = 0.25, 12
        params = core.ModelParams(n, a, 1.0)
        c = params.boundary
        for w in statics.contact_windows(params):
            got = statics.partition_window(1.0, a, n, w)
            mid = len(core.enumerate_bridges(w.r - w.l)) if w.r > w.l else 1
            want = (math.log(mid) + statics.ballot_count(w.l, c).log
                    + statics.ballot_count(n - w.r, c).log)
            assert got == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("n", [20, 60, 120, 200])
    def test_window_completeness(self, n):
        params = core.ModelParams(n, 0.2, 3.0)
        from_windows = statics.log_pinned_from_windows(params)
        direct = statics.partition_elevated(3.0, 0.2, n).log_z_pinned
        assert from_windows == pytest.approx(direct, abs=1e-9)

    def test_window_validation(self):
        params = core.ModelParams(12, 0.2, 3.0)
        with pytest.raises(ValueError):
            statics.ContactWindow(3, 8)
        with pytest.raises(ValueError):
            statics.ContactWindow(8, 4)
        with pytest.raises(ValueError):
            statics.ContactWindow(0, 8).validate(params)


class TestProfileWeight:
    def test_ratio_bounded_over_sizes(self):
        a, lam = 0.25, 6.0
        lo, hi = math.inf, -math.inf
        for n in (50, 100, 200, 400):
            params = core.ModelParams(n, a, lam)
            pos, table = statics.window_log_table(params)
            for i, l in enumerate(pos):
                for j in range(i, len(pos)):
                    w = statics.ContactWindow(int(l), int(pos[j]))
                    diff = table[i, j] - statics.log_profile_weight(lam, a, n, w)
                    lo, hi = min(lo, diff), max(hi, diff)
        assert hi - lo < 3.0

    def test_exponent_peak_formula(self):
        # the real-valued maximiser sits at boundary/d_lambda
        a, lam, n = 0.25, 6.0, 400
        params = core.ModelParams(n, a, lam)
        c = params.boundary
        f = statics.free_energy(lam)

        def exponent(l):
            return (f * (n - 2 * l) - 2 * l * statics.entropy_q(c / l))

        ls = np.linspace(c, n / 2, 20001)
        vals = np.array([exponent(v) for v in ls])
        peak = ls[np.argmax(vals)]
        assert peak == pytest.approx(statics.profile_weight_peak(params),
                                     abs=0.05)
        assert statics.profile_weight_peak(params) == pytest.approx(
            c * lam / (lam - 2.0), abs=1e-12)

    def test_bounded_at_criticality(self):
        a = 0.25
        lc = statics.lambda_c(a)
        vals = []
        for n in (100, 200, 400, 800):
            parts = statics.partition_elevated(lc, a, n)
            vals.append(parts.log_z_pinned - n * math.log(2.0))
        assert max(np.abs(vals)) < 5.0


class TestGibbsSampler:
    def test_chi_square_against_enumeration(self, rng):
        params = core.ModelParams(8, 0.25, 3.0)
        paths = core.enumerate_paths(params, "elevated")
        probs = exact_distribution(paths, 3.0)
        sampler = statics.PathSampler(params, "elevated")
        heights = sampler.sample_heights(100_000, rng)
        index = {eta: i for i, eta in enumerate(paths)}
        counts = np.zeros(len(paths))
        for row in heights:
            counts[index[tuple(int(v) for v in row)]] += 1
        res = spstats.chisquare(counts, probs * len(heights))
        assert res.pvalue > 0.001

    def test_uniform_at_lambda_one(self, rng):
        params = core.ModelParams(8, 0.25, 1.0)
        paths = core.enumerate_paths(params, "elevated")
        sampler = statics.PathSampler(params, "elevated")
        heights = sampler.sample_heights(60_000, rng)
        emp = empirical_distribution(paths, heights)
        assert total_variation(emp, np.full(len(paths), 1 / len(paths))) < 0.02

    def test_contact_count_moments(self, rng):
        params = core.ModelParams(30, 0.2, 4.0)
        sampler = statics.PathSampler(params, "elevated")
        heights = sampler.sample_heights(40_000, rng)
        counts = (heights == 0).sum(axis=1)
        exact = sampler.expected_contacts()
        se = counts.std(ddof=1) / math.sqrt(len(counts))
        assert abs(counts.mean() - exact) < 3.0 * se

    def test_restricted_samplers_stay_in_their_wells(self, rng):
        params = core.ModelParams(20, 0.2, 3.0)
        free = statics.PathSampler(params, "elevated-free")
        assert free.sample_heights(2000, rng).min() > 0
        pinned = statics.PathSampler(params, "elevated-pinned")
        assert (pinned.sample_heights(2000, rng).min(axis=1) == 0).all()

    def test_pinned_sampler_distribution(self, rng):
        params = core.ModelParams(10, 0.25, 3.0)
        paths = core.enumerate_paths(params, "elevated-pinned")
        probs = exact_distribution(paths, 3.0)
        sampler = statics.PathSampler(params, "elevated-pinned")
        heights = sampler.sample_heights(50_000, rng)
        emp = empirical_distribution(paths, heights)
        assert total_variation(emp, probs) < 0.02

    def test_gibbs_sample_is_a_valid_path(self, rng):
        params = core.ModelParams(12, 0.3, 2.0)
        eta = statics.gibbs_sample(params, "elevated", rng)
        core.validate_path(eta, boundary=params.boundary)


class TestScalingProfile:
    def test_boundary_values(self):
        for lam in (1.0, 6.0):
            assert statics.scaling_profile(0.1, lam, 0.0) == pytest.approx(0.1)
            assert statics.scaling_profile(0.1, lam, 1.0) == pytest.approx(0.1)

    def test_flat_zero_stretch(self):
        d = statics.d_lambda(6.0)
        x = np.linspace(0.1 / d + 1e-9, 1.0 - 0.1 / d - 1e-9, 50)
        assert np.all(statics.scaling_profile(0.1, 6.0, x) == 0.0)
        assert 0.1 / d == pytest.approx(0.15)

    def test_flat_profile_in_free_phase(self):
        x = np.linspace(0.0, 1.0, 11)
        assert np.all(statics.scaling_profile(0.25, 3.0, x) == 0.25)

    def test_domain_checked(self):
        with pytest.raises(ValueError):
            statics.scaling_profile(0.1, 6.0, 1.5)


class TestContactWindowStats:
    def test_concentration_and_symmetry(self, rng):
        params = core.ModelParams(400, 0.1, 6.0)
        stats_ = statics.contact_window_stats(params, 3000, rng)
        assert stats_.l_center == pytest.approx(60.0)
        assert stats_.frac_l_in_window >= 0.95
        assert stats_.ks_pvalue_reflection > 0.001

    def test_requires_pinned_regime(self, rng):
        params = core.ModelParams(100, 0.25, 3.0)
        with pytest.raises(ValueError):
            statics.contact_window_stats(params, 100, rng)
