"""Operator series accuracy, lifted variants and the condition checker."""

from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest

from dnstat.density import Verdict
from dnstat.korovkin import (
    CUBE,
    DIST_HALF,
    EXP,
    IDENTITY,
    KorovkinConfig,
    ONE,
    Perturbation,
    SQUARE,
    SampledFunction,
    audit_quadratic_moment,
    function_preset,
    korovkin_check,
    lifted_apply,
    lifted_operator,
    mkz_apply,
    mkz_operator,
    sup_distance,
)
from dnstat.schedules import schedule_preset, weight_preset


def rational_series(f_exact, m: int, y: Fraction, terms: int) -> float:
    """Exact-series oracle: rational partial sum of the operator's series.

    The coefficient recurrence c_{t+1} = c_t y (m+t+1)/(t+1) and the
    nodes t/(t+m) are evaluated in exact rational arithmetic; with a few
    hundred terms past the coefficient peak the neglected tail is far
    below float resolution for the (m, y) used here.
    """
    total = Fraction(0)
    coef = (Fraction(1) - y) ** (m + 1)
    for t in range(terms):
        node = Fraction(t, t + m) if t else Fraction(0)
        total += f_exact(node) * coef
        coef = coef * y * (m + t + 1) / (t + 1)
    return float(total)


class TestSeriesAgainstRationalOracle:
    @pytest.mark.parametrize(
        "m,y,terms",
        [(5, Fraction(1, 2), 700), (50, Fraction(1, 2), 900), (10, Fraction(1, 4), 400),
         (3, Fraction(3, 4), 1200)],
    )
    def test_second_power(self, m, y, terms):
        oracle = rational_series(lambda u: u * u, m, y, terms)
        assert mkz_apply(SQUARE, m, float(y), 1e-12) == pytest.approx(oracle, abs=5e-12)

    def test_third_power(self):
        oracle = rational_series(lambda u: u**3, 12, Fraction(2, 5), 600)
        assert mkz_apply(CUBE, 12, 0.4, 1e-12) == pytest.approx(oracle, abs=5e-12)


class TestOperatorPointValues:
    @pytest.mark.parametrize("m", [1, 7, 80])
    def test_normalization(self, m):
        assert mkz_apply(ONE, m, 0.5, 1e-10) == pytest.approx(1.0, abs=1e-10)

    def test_first_moment_is_reproduced(self):
        assert mkz_apply(IDENTITY, 50, 0.3, 1e-10) == pytest.approx(0.3, abs=1e-8)

    def test_endpoints_short_circuit(self):
        assert mkz_apply(CUBE, 9, 1.0) == 1.0
        assert mkz_apply(CUBE, 9, 0.0) == 0.0

    @pytest.mark.parametrize("y", [-0.1, 1.0000001, 2.0])
    def test_domain_rejected(self, y):
        with pytest.raises(ValueError):
            mkz_apply(ONE, 5, y)

    def test_bad_tail_tol_rejected(self):
        with pytest.raises(ValueError):
            mkz_apply(ONE, 5, 0.5, 0.0)

    def test_series_cap_is_enforced(self):
        # So close to 1 that certifying the tail would need ~5e12 terms.
        with pytest.raises(RuntimeError, match="did not certify"):
            mkz_apply(ONE, 500, 1.0 - 1e-10)


class TestOperatorInvariants:
    def test_normalization_and_first_moment_on_the_default_grid(self):
        grid = np.linspace(0.0, 1.0, 257)
        ops = mkz_operator(1e-10)
        target_one = np.ones_like(grid)
        for m in range(1, 201):
            table = ops.batch(m, [ONE, IDENTITY], grid)
            assert float(np.max(np.abs(table[0] - target_one))) <= 1e-10
            assert float(np.max(np.abs(table[1] - grid))) <= 1e-10 + 1e-9

    def test_second_moment_decay(self):
        grid = np.linspace(0.0, 1.0, 257)
        ops = mkz_operator(1e-10)
        dev = {}
        for m in (25, 50, 100, 200):
            table = ops.batch(m, [SQUARE], grid)
            dev[m] = float(np.max(np.abs(table[0] - grid * grid)))
        assert dev[50] <= dev[25] + 1e-6
        assert dev[100] <= dev[50] + 1e-6
        assert dev[200] <= dev[100] + 1e-6
        assert dev[200] <= 0.5 * dev[100] + 1e-4

    def test_linearity_and_positivity_on_generated_functions(self):
        rng = random.Random(12345)
        ys = [0.0, 0.2, 0.45, 0.7, 0.95, 1.0]
        for _ in range(100):
            coeffs = [rng.uniform(0.0, 2.0) for _ in range(4)]

            def poly(u, c=tuple(coeffs)):
                return c[0] + c[1] * u + c[2] * u * u + c[3] * u * u * u

            f = SampledFunction(poly, "poly")
            g = SampledFunction(lambda u: np.exp(u) * 0.5, "halfexp")
            a, b = rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)
            combo = SampledFunction(lambda u, _a=a, _b=b: _a * poly(u) + _b * g(u), "combo")
            m = rng.randint(1, 40)
            y = rng.choice(ys)
            left = mkz_apply(combo, m, y, 1e-11)
            right = a * mkz_apply(f, m, y, 1e-11) + b * mkz_apply(g, m, y, 1e-11)
            assert abs(left - right) <= 1e-9
            # positivity: non-negative input, non-negative output
            assert mkz_apply(f, m, y, 1e-11) >= -1e-9


class TestLiftedOperators:
    def test_cdf_factor_at_one_half(self):
        assert lifted_apply(ONE, 9, 0.5, Perturbation.CDF_FACTOR) == pytest.approx(
            1.5, abs=1e-9
        )

    def test_bare_is_the_identity_lift(self):
        assert lifted_apply(ONE, 9, 0.5, Perturbation.NONE) == pytest.approx(1.0, abs=1e-9)

    def test_null_set_factor_depends_on_squareness(self):
        assert lifted_apply(ONE, 8, 0.5, Perturbation.NULL_SET) == pytest.approx(1.0, abs=1e-9)
        assert lifted_apply(ONE, 9, 0.5, Perturbation.NULL_SET) == pytest.approx(2.0, abs=1e-9)

    def test_cdf_factor_jumps_at_the_right_edge(self):
        assert lifted_apply(ONE, 4, 1.0, Perturbation.CDF_FACTOR) == pytest.approx(2.0, abs=1e-9)


class TestSupDistance:
    def test_identical_functions(self):
        assert sup_distance(IDENTITY, IDENTITY) == 0.0

    def test_identity_versus_square(self):
        assert sup_distance(IDENTITY, SQUARE) == 0.25

    def test_constants(self):
        assert sup_distance(ONE, SampledFunction(lambda y: y * 0.0, "0")) == 1.0

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            sup_distance(ONE, ONE, grid=[])


class TestConditionChecker:
    def test_bare_operator_all_conditions_converge(self):
        cfg = KorovkinConfig(horizon=60, grid_points=33, tail_tol=1e-8, tolerance=0.05)
        report = korovkin_check(
            mkz_operator(cfg.tail_tol),
            "dnp",
            [CUBE],
            schedule_preset("stretch"),
            weight_preset("ones"),
            cfg,
        )
        assert report.all_conditions_converge
        for verdict in report.conditions.values():
            assert verdict.tail_max == 0.0
        assert report.conclusions["y^3"].verdict is Verdict.CONVERGES

    def test_null_set_instance_converges_despite_square_spikes(self):
        cfg = KorovkinConfig(horizon=100, grid_points=33, tail_tol=1e-8, tolerance=0.07)
        report = korovkin_check(
            lifted_operator(Perturbation.NULL_SET, cfg.tail_tol),
            "dnp",
            [CUBE],
            schedule_preset("stretch"),
            weight_preset("ones"),
            cfg,
        )
        assert report.all_conditions_converge
        # the sup trace spikes at square indices, ordinary convergence fails
        trace = report.sup_trace("1")
        assert trace[8] >= 0.5 and trace[24] >= 0.5
        assert trace[7] <= 1e-6

    def test_cdf_factor_instance_reports_the_measured_divergence(self):
        cfg = KorovkinConfig(horizon=40, grid_points=17, tail_tol=1e-8)
        report = korovkin_check(
            lifted_operator(Perturbation.CDF_FACTOR, cfg.tail_tol),
            "dndc",
            [CUBE],
            schedule_preset("stretch"),
            weight_preset("ones"),
            cfg,
        )
        assert not report.all_conditions_converge
        assert report.conditions["1"].verdict is Verdict.DIVERGES
        # grid includes y = 1 where the lift factor is 2
        assert report.conditions["1"].extras["levels"][0] == pytest.approx(1.0, abs=1e-8)
        assert report.notes

    def test_report_echoes_its_configuration(self):
        cfg = KorovkinConfig(horizon=30, grid_points=9, tail_tol=1e-6)
        report = korovkin_check(
            mkz_operator(cfg.tail_tol),
            "dndc",
            [EXP],
            schedule_preset("cesaro"),
            weight_preset("ones"),
            cfg,
        )
        payload = report.to_json_dict()
        assert payload["mode"] == "dndc"
        assert payload["grid_points"] == 9
        assert payload["horizon"] == 30
        assert payload["normalizer_mode"] == "regular"

    def test_mode_tag_is_validated(self):
        cfg = KorovkinConfig(horizon=30, grid_points=9)
        with pytest.raises(ValueError, match="mode tag"):
            korovkin_check(
                mkz_operator(), "dnq", [CUBE], schedule_preset("cesaro"),
                weight_preset("ones"), cfg,
            )

    def test_conclusion_list_must_be_nonempty(self):
        cfg = KorovkinConfig(horizon=30, grid_points=9)
        with pytest.raises(ValueError, match="conclusion"):
            korovkin_check(
                mkz_operator(), "dnp", [], schedule_preset("cesaro"),
                weight_preset("ones"), cfg,
            )


class TestMomentFormAudit:
    def test_series_value_matches_the_rational_oracle(self):
        oracle = rational_series(lambda u: u * u, 50, Fraction(1, 2), 900)
        audit = audit_quadratic_moment()
        assert audit.series_value == pytest.approx(oracle, abs=1e-11)

    def test_quoted_form_disagrees_and_is_logged(self):
        audit = audit_quadratic_moment()
        assert audit.quoted_value == pytest.approx(0.25 * 52 / 51 + 0.5 / 51, rel=1e-12)
        assert not audit.agrees
        note = audit.note()
        assert note is not None and "erratum" in note

    def test_function_presets_resolve(self):
        assert function_preset("y^3") is CUBE
        assert function_preset("|y-1/2|") is DIST_HALF
        with pytest.raises(ValueError):
            function_preset("sinh")
