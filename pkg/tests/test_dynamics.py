"""Discrete-time simulation: the AR(1) recursion, wealth assembly
under each withdrawal rule, ergodicity, and the sustainability
formulas.

The recursion test compares the chunked closed form against a naive
loop bitwise; path identities are algebraic and hold to 1e-12.
"""

import numpy as np
import pytest

from valuation_lab.dynamics import (DiscreteModelSpec, WithdrawalProcess,
                                    check_lln, earnings_linked_stats,
                                    geometric_ergodicity_estimate,
                                    path_from_components, path_to_csv,
                                    simulate_ar1, stationary_moments,
                                    sustainability_bounds)
from valuation_lab.errors import LengthMismatch

SPEC = DiscreteModelSpec(alpha=-0.02421, beta=0.86785, c=0.04708,
                         sigma_eps=0.17136)


class TestAr1Simulation:
    def test_matches_naive_loop(self):
        rng = np.random.default_rng(123)
        eps = SPEC.sigma_eps * rng.standard_normal(257)
        b = simulate_ar1(SPEC, 0.4, 257, seed=123)
        cur = 0.4
        worst = 0.0
        for t in range(257):
            cur = SPEC.alpha + SPEC.beta * cur + eps[t]
            worst = max(worst, abs(b[t + 1] - cur))
        assert worst < 1e-11  # chunked closed form vs naive recursion

    def test_same_seed_identical(self):
        a = simulate_ar1(SPEC, -0.18, 500, seed=9)
        b = simulate_ar1(SPEC, -0.18, 500, seed=9)
        assert np.array_equal(a, b)
        c = simulate_ar1(SPEC, -0.18, 500, seed=10)
        assert not np.array_equal(a, c)

    def test_noiseless_converges_to_fixed_point(self):
        quiet = DiscreteModelSpec(alpha=SPEC.alpha, beta=SPEC.beta,
                                  c=SPEC.c, sigma_eps=0.0)
        b = simulate_ar1(quiet, 2.0, 400, seed=0)
        h = quiet.alpha / (1.0 - quiet.beta)
        assert abs(b[-1] - h) < 1e-12
        gaps = np.abs(b - h)
        assert np.all(gaps[1:] <= gaps[:-1] + 1e-15)

    def test_starting_at_fixed_point_stays_noiselessly(self):
        quiet = DiscreteModelSpec(alpha=0.1, beta=0.5, c=0.0, sigma_eps=0.0)
        b = simulate_ar1(quiet, 0.2, 50, seed=0)
        assert np.all(b == 0.2)

    def test_stationary_moments_formulas(self):
        mom = stationary_moments(SPEC)
        assert abs(mom["mean"] - SPEC.alpha / (1.0 - SPEC.beta)) < 1e-15
        assert abs(mom["variance"]
                   - SPEC.sigma_eps ** 2 / (1.0 - SPEC.beta ** 2)) < 1e-15

    def test_long_run_histogram_matches_moments(self):
        mom = stationary_moments(SPEC)
        b = simulate_ar1(SPEC, mom["mean"], 200000, seed=4)[1000:]
        assert abs(b.mean() - mom["mean"]) < 0.01
        assert abs(b.var() / mom["variance"] - 1.0) < 0.05

    def test_lln_report(self):
        rep = check_lln(SPEC, -0.18318, 200000, 0.0178, 0.01, seed=5)
        assert rep["delta_pass"] and rep["b_pass"] and rep["r_pass"]
        assert abs(rep["r_avg"] - rep["r_limit"]) < 0.01


class TestWealthAssembly:
    def _components(self, t=60, seed=2):
        b = simulate_ar1(SPEC, -0.18, t, seed=seed)
        rng = np.random.default_rng(seed + 1000)
        g = 0.0178 + 0.0366 * rng.standard_normal(t)
        return b, g

    def test_no_withdrawal_telescopes(self):
        b, g = self._components()
        path = path_from_components(b, g, SPEC.c)
        ln_v = b[-1] - b[0] + SPEC.c * 60 + g.sum()
        assert abs(np.log(path.V[-1]) - ln_v) < 1e-10
        assert path.ruined_at is None

    def test_return_decomposition(self):
        b, g = self._components(seed=5)
        path = path_from_components(b, g, SPEC.c)
        assert np.allclose(path.R, np.diff(b) + SPEC.c + g, atol=1e-14)
        assert np.allclose(np.log(path.V[1:]), np.cumsum(path.R), atol=1e-10)

    def test_constant_fraction_compounds(self):
        b, g = self._components(seed=7)
        w = 0.03
        path = path_from_components(b, g, SPEC.c,
                                    WithdrawalProcess("constant_fraction", w))
        bare = path_from_components(b, g, SPEC.c)
        ratio = path.V[1:] / bare.V[1:]
        expected = (1.0 - w) ** np.arange(1, 61)
        assert np.allclose(ratio, expected, rtol=1e-10)

    def test_earnings_linked_wealth_ignores_growth(self):
        b, _ = self._components(seed=9)
        g_a = 0.05 * np.ones(60)
        g_b = np.linspace(-0.2, 0.2, 60)
        w = 0.01
        rule = WithdrawalProcess("earnings_linked", w)
        path_a = path_from_components(b, g_a, SPEC.c, rule)
        path_b = path_from_components(b, g_b, SPEC.c, rule)
        assert np.allclose(path_a.V, path_b.V, rtol=1e-12)
        ln_v = b[-1] - b[0] + (SPEC.c + w) * 60
        assert abs(np.log(path_a.V[-1]) - ln_v) < 1e-10

    def test_earnings_linked_flags_negative_fractions(self):
        b = np.zeros(4)
        g = np.array([0.5, 0.005, -0.3, 0.4])  # two years below w=0.01
        rule = WithdrawalProcess("earnings_linked", 0.01)
        path = path_from_components(b, g, 0.0, rule)
        assert path.out_of_range_withdrawals == 2

    def test_constant_real_ruin_is_detected_and_final(self):
        b = np.zeros(11)
        g = np.zeros(10)  # flat wealth, withdrawals eat 0.3 per year
        rule = WithdrawalProcess("constant_real", 0.3)
        path = path_from_components(b, g, 0.0, rule)
        assert path.ruined_at == 4  # 1 - 4*0.3 <= 0
        assert np.all(np.isnan(path.V[5:]))
        assert path.V[3] > 0.0 >= path.V[4]

    def test_constant_real_no_ruin_when_growth_dominates(self):
        b = np.zeros(31)
        g = np.full(30, 0.10)
        path = path_from_components(b, g, 0.0,
                                    WithdrawalProcess("constant_real", 0.05))
        assert path.ruined_at is None
        assert path.V[-1] > 1.0

    def test_custom_series_matches_fraction_rule(self):
        b, g = self._components(seed=11)
        w = 0.025
        const = path_from_components(
            b, g, SPEC.c, WithdrawalProcess("constant_fraction", w))
        custom = path_from_components(
            b, g, SPEC.c, WithdrawalProcess("custom", series=np.full(60, w)))
        assert np.allclose(const.V, custom.V, rtol=1e-12)

    def test_length_contract(self):
        with pytest.raises(LengthMismatch):
            path_from_components(np.zeros(5), np.zeros(2), 0.0)
        with pytest.raises(LengthMismatch):
            path_from_components(
                np.zeros(5), np.zeros(4), 0.0,
                WithdrawalProcess("custom", series=np.zeros(3)))

    def test_bad_rules_rejected(self):
        with pytest.raises(ValueError):
            WithdrawalProcess("lump_sum", 0.5)
        with pytest.raises(ValueError):
            WithdrawalProcess("constant_fraction", 1.5)
        with pytest.raises(ValueError):
            WithdrawalProcess("custom")

    def test_csv_header(self):
        b, g = self._components(t=5, seed=1)
        text = path_to_csv(path_from_components(b, g, SPEC.c))
        lines = text.strip().split("\n")
        assert lines[0] == "t,B,Delta,G,R,V"
        assert len(lines) == 7


class TestErgodicity:
    def test_distinct_starts_couple(self):
        tv = geometric_ergodicity_estimate(SPEC, 1.0, -1.0, 30, 4000, seed=17)
        assert tv[0] == 1.0
        assert tv[30] < 0.1
        # geometric decay: later gaps no larger than a decayed early gap
        assert tv[30] <= tv[5]

    def test_same_start_never_separates(self):
        # the histogram TV estimate has a finite-sample floor, so the
        # same-start ensembles need enough paths to sit below 0.05
        tv = geometric_ergodicity_estimate(SPEC, -0.18, -0.18, 10, 10000,
                                           seed=18)
        assert tv.max() < 0.05

    def test_noiseless_paths_never_mix(self):
        quiet = DiscreteModelSpec(alpha=SPEC.alpha, beta=SPEC.beta,
                                  c=SPEC.c, sigma_eps=0.0)
        tv = geometric_ergodicity_estimate(quiet, 1.0, -1.0, 5, 100, seed=1)
        assert np.all(tv == 1.0)


class TestSustainability:
    def test_bounds_order_and_values(self):
        bounds = sustainability_bounds(0.04668, 0.01773)
        assert abs(bounds["unsafe_rate"] - 0.06441) < 1e-10
        assert abs(bounds["safe_rate"] - (1.0 - np.exp(-0.06441))) < 1e-10
        assert bounds["safe_rate"] < bounds["unsafe_rate"]

    def test_safe_rate_never_ruins(self):
        bounds = sustainability_bounds(0.02, 0.01)
        b = np.zeros(101)
        g = np.full(100, 0.01)
        path = path_from_components(
            b, g, 0.02, WithdrawalProcess("constant_real",
                                          bounds["safe_rate"] * 0.999))
        assert path.ruined_at is None

    def test_unsafe_rate_eventually_ruins(self):
        b = np.zeros(2001)
        g = np.full(2000, 0.01)
        path = path_from_components(
            b, g, 0.02, WithdrawalProcess("constant_real", 0.0306))
        assert path.ruined_at is not None


class TestEarningsLinkedStats:
    def test_frozen_table(self, pipeline):
        st = earnings_linked_stats(0.0, pipeline.g_nom)
        assert abs(st["mean_discount_factor"] - 0.921532) < 1e-5
        frozen = {0.01: 0.06921, 0.02: 0.05985, 0.03: 0.05040, 0.04: 0.04086}
        for w, want in frozen.items():
            st = earnings_linked_stats(w, pipeline.g_nom)
            assert abs(st["mean_withdrawal"] - want) < 5e-5

    def test_mean_withdrawal_identity(self, pipeline):
        st = earnings_linked_stats(0.02, pipeline.g_nom)
        by_hand = 1.0 - np.exp(0.02) * np.mean(np.exp(-pipeline.g_nom))
        assert abs(st["mean_withdrawal"] - by_hand) < 1e-14
        assert np.allclose(st["W"], 1.0 - np.exp(0.02 - pipeline.g_nom),
                           atol=1e-14)

    def test_monotone_in_rate(self, pipeline):
        values = [earnings_linked_stats(w, pipeline.g_nom)["mean_withdrawal"]
                  for w in (0.0, 0.01, 0.02, 0.03, 0.04)]
        assert all(a > b for a, b in zip(values, values[1:]))
