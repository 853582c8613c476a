"""Weighted densities, tail-limit estimation and the real-sequence detector."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnstat.density import (
    ConvergenceVerdict,
    DensityConfig,
    Verdict,
    density_limit,
    dn_stat_limit,
    level_density_limit,
    trace_csv,
    weighted_density,
)
from dnstat.schedules import (
    DegenerateNormalizerError,
    DeferredSchedule,
    Affine,
    NormalizerMode,
    WeightScheme,
    constant_seq,
    schedule_preset,
    tabulated,
    weight_preset,
)

from conftest import brute_density_count, is_square


def squares_pred(m, n):
    if isinstance(n, np.ndarray):
        roots = np.floor(np.sqrt(n.astype(np.float64))).astype(np.int64)
        return roots * roots == n
    return is_square(int(n))


class TestWeightedDensity:
    def test_false_pred(self, cesaro, ones):
        assert weighted_density(lambda m, n: False, cesaro, ones, 10) == 0.0

    def test_true_pred_unit_weights(self, cesaro, ones):
        assert weighted_density(lambda m, n: True, cesaro, ones, 10) == 1.0

    def test_squares_at_r_100(self, cesaro, ones):
        assert weighted_density(squares_pred, cesaro, ones, 100) == 0.10

    def test_degenerate_normalizer_rejected(self, cesaro):
        zeros = WeightScheme(tabulated([0.0] * 40), tabulated([0.0] * 40), label="z")
        with pytest.raises(DegenerateNormalizerError):
            weighted_density(lambda m, n: True, cesaro, zeros, 5)

    @given(m=st.integers(min_value=1, max_value=80), k=st.integers(min_value=2, max_value=7))
    @settings(max_examples=60, deadline=None)
    def test_monotone_inclusion_and_complement(self, m, k):
        sched = schedule_preset("example")
        ones = weight_preset("ones")
        pred_a = lambda mm, n: n % (2 * k) == 0  # noqa: E731
        pred_b = lambda mm, n: n % k == 0  # noqa: E731
        da = weighted_density(pred_a, sched, ones, m)
        db = weighted_density(pred_b, sched, ones, m)
        assert da <= db
        # Complement identity holds exactly at the integer-count level.
        ca, r = brute_density_count(pred_a, sched, ones, m)
        cna, _ = brute_density_count(lambda mm, n: not pred_a(mm, n), sched, ones, m)
        assert ca + cna == math.floor(r)
        dna = weighted_density(lambda mm, n: not pred_a(mm, n), sched, ones, m)
        assert da + dna == pytest.approx(math.floor(r) / r, rel=1e-15)

    @given(m=st.integers(min_value=1, max_value=60))
    @settings(max_examples=60, deadline=None)
    def test_density_in_unit_interval(self, m):
        sched = schedule_preset("stretch")
        idw = weight_preset("identity")
        d = weighted_density(squares_pred, sched, idw, m)
        assert 0.0 <= d <= 1.0


class TestDensityLimit:
    def test_false_pred_converges_to_zero(self, cesaro, ones):
        v = density_limit(lambda m, n: False, cesaro, ones, DensityConfig(horizon=500))
        assert v.verdict is Verdict.CONVERGES
        assert v.tail_max == 0.0

    def test_squares_converge_at_default_horizon(self, cesaro, ones):
        v = density_limit(squares_pred, cesaro, ones, DensityConfig(horizon=10_000))
        assert v.verdict is Verdict.CONVERGES
        # Exact tail maximum: the tail window starts at m = 8001 where
        # floor(sqrt(8001)) = 89 squares lie at or below the bound.
        assert v.tail_max == 89 / 8001

    def test_evens_diverge_to_one_half(self, cesaro, ones):
        v = density_limit(lambda m, n: n % 2 == 0, cesaro, ones, DensityConfig(horizon=2000))
        assert v.verdict is Verdict.DIVERGES
        assert v.tail_max == pytest.approx(0.5, abs=1e-3)

    def test_finite_modification_keeps_the_verdict(self, cesaro, ones):
        # Changing a predicate on finitely many indices cannot move the
        # limit; at a finite horizon the modified set must stay small
        # against tolerance * R over the tail for the verdict to match.
        cfg = DensityConfig(horizon=10_000)
        base = density_limit(squares_pred, cesaro, ones, cfg)
        dropped = density_limit(
            lambda m, n: squares_pred(m, n) & (n > 20), cesaro, ones, cfg
        )
        added = density_limit(
            lambda m, n: squares_pred(m, n) | (n <= 20), cesaro, ones, cfg
        )
        assert base.verdict is dropped.verdict is added.verdict is Verdict.CONVERGES
        diverging = density_limit(lambda m, n: n % 2 == 0, cesaro, ones, cfg)
        modified = density_limit(
            lambda m, n: (n % 2 == 0) & (n > 20), cesaro, ones, cfg
        )
        assert diverging.verdict is modified.verdict is Verdict.DIVERGES

    def test_oscillating_tail_is_inconclusive(self, cesaro, ones):
        v = density_limit(lambda m, n: m % 2 == 0, cesaro, ones, DensityConfig(horizon=200))
        assert v.verdict is Verdict.INCONCLUSIVE

    def test_trace_is_subsampled_with_dense_tail(self, cesaro, ones):
        cfg = DensityConfig(horizon=10_000)
        v = density_limit(lambda m, n: False, cesaro, ones, cfg)
        ms = [p.m for p in v.trace]
        tail_start = cfg.tail_start()
        tail = [m for m in ms if m >= tail_start]
        assert tail == list(range(tail_start, 10_001))
        assert len(ms) - len(tail) <= 1000
        assert ms[0] == 1

    def test_error_names_the_failing_index(self, cesaro, ones):
        def pred(m, n):
            if m == 37:
                raise RuntimeError("boom")
            return False

        with pytest.raises(RuntimeError, match="m=37"):
            density_limit(pred, cesaro, ones, DensityConfig(horizon=100))

    def test_underpowered_horizon_rejected(self):
        with pytest.raises(ValueError, match="underpowered"):
            DensityConfig(horizon=5)

    def test_matches_brute_counts_on_a_small_horizon(self, deferred, ones):
        cfg = DensityConfig(horizon=60, tail_fraction=0.5, tolerance=0.1)
        v = density_limit(squares_pred, deferred, ones, cfg)
        for point in v.trace:
            count, r = brute_density_count(squares_pred, deferred, ones, point.m)
            assert point.count == count
            assert point.normalizer == pytest.approx(r, rel=1e-14)
            assert point.density == count / point.normalizer


class TestLevelEngine:
    def test_levels_callable_and_array_agree(self, cesaro, ones):
        cfg = DensityConfig(horizon=300, tolerance=0.05)
        levels = np.array([1.0 / n for n in range(1, 301)])
        va = level_density_limit(levels, 0.25, cesaro, ones, cfg)
        vb = level_density_limit(lambda n: 1.0 / n, 0.25, cesaro, ones, cfg)
        assert [p.count for p in va.trace] == [p.count for p in vb.trace]
        assert va.verdict is vb.verdict is Verdict.CONVERGES

    def test_weight_override_reaches_the_predicate(self, cesaro, ones):
        # Override weight n with unit levels puts w * level = n >= 1
        # exactly, so every counted index qualifies and the density
        # sticks at floor(R)/R = 1 with R = m(m+1)/2.
        scheme = WeightScheme(ones.e, ones.g, override=lambda m, n: float(n), label="ov")
        cfg = DensityConfig(horizon=80, tail_fraction=0.5, tolerance=0.5)
        v = level_density_limit(lambda n: 1.0, 1.0, cesaro, scheme, cfg)
        assert v.verdict is Verdict.DIVERGES
        assert v.tail_max == 1.0
        assert v.trace[-1].normalizer == 80 * 81 / 2

    def test_short_level_array_rejected(self, cesaro, ones):
        with pytest.raises(ValueError, match="too short"):
            level_density_limit(np.zeros(3), 0.5, cesaro, ones, DensityConfig(horizon=100))


class TestDnStatLimit:
    def test_constant_sequence_converges(self, cesaro, ones):
        v = dn_stat_limit(constant_seq(3.0), 3.0, 0.5, cesaro, ones, DensityConfig(horizon=500))
        assert v.verdict is Verdict.CONVERGES
        assert v.tail_max == 0.0

    def test_square_indicator_converges(self, cesaro, ones):
        seq = lambda n: 1.0 if is_square(n) else 0.0  # noqa: E731
        v = dn_stat_limit(seq, 0.0, 0.5, cesaro, ones, DensityConfig(horizon=10_000))
        assert v.verdict is Verdict.CONVERGES
        assert v.tail_max == 89 / 8001

    def test_alternating_sequence_diverges(self, cesaro, ones):
        v = dn_stat_limit(
            lambda n: (-1.0) ** n, 0.0, 0.5, cesaro, ones, DensityConfig(horizon=1000)
        )
        assert v.verdict is Verdict.DIVERGES
        assert v.tail_max == 1.0

    @given(scale_pow=st.integers(min_value=-6, max_value=6))
    @settings(max_examples=20, deadline=None)
    def test_power_of_two_scaling_keeps_the_verdict(self, scale_pow):
        # Power-of-two scaling is exact in binary floating point, so the
        # weighted comparisons are bitwise unchanged; arbitrary scales
        # could flip exact-boundary comparisons by rounding.
        sched = schedule_preset("cesaro")
        ones = weight_preset("ones")
        lam = 2.0**scale_pow
        seq = lambda n: 1.0 / n + 0.25  # noqa: E731
        cfg = DensityConfig(horizon=400, tolerance=0.05)
        base = dn_stat_limit(seq, 0.25, 0.5, sched, ones, cfg)
        scaled = dn_stat_limit(
            lambda n: lam * seq(n), lam * 0.25, lam * 0.5, sched, ones, cfg
        )
        assert base.verdict is scaled.verdict
        assert [p.count for p in base.trace] == [p.count for p in scaled.trace]

    def test_eps_must_be_positive(self, cesaro, ones):
        with pytest.raises(ValueError, match="eps"):
            dn_stat_limit(constant_seq(0.0), 0.0, 0.0, cesaro, ones, DensityConfig(horizon=100))

    def test_degenerate_normalizer_propagates(self, cesaro):
        zeros = WeightScheme(tabulated([0.0] * 200), tabulated([0.0] * 200), label="z")
        with pytest.raises(DegenerateNormalizerError, match="m=1"):
            dn_stat_limit(constant_seq(1.0), 0.0, 0.5, cesaro, zeros, DensityConfig(horizon=100))


class TestVerdictShape:
    def test_trace_csv_columns(self, cesaro, ones):
        v = density_limit(lambda m, n: False, cesaro, ones, DensityConfig(horizon=50))
        text = trace_csv(v)
        lines = text.strip().splitlines()
        assert lines[0] == "m,R_m,count,d_m"
        assert len(lines) == 1 + len(v.trace)

    def test_summary_records_the_mode(self, cesaro, ones):
        cfg = DensityConfig(horizon=50, mode=NormalizerMode.LITERAL)
        v = density_limit(lambda m, n: False, cesaro, ones, cfg)
        assert v.summary()["normalizer_mode"] == "literal"

    def test_tail_points_cover_the_tail_window(self, cesaro, ones):
        cfg = DensityConfig(horizon=100, tail_fraction=0.25)
        v = density_limit(lambda m, n: False, cesaro, ones, cfg)
        assert [p.m for p in v.tail_points()] == list(range(76, 101))
