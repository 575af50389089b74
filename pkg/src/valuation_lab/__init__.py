"""Valuation measures, their dynamics, and portfolio simulation tools.

The pipeline starts from an annual market CSV (year, price, dividend,
earnings, CPI), builds deflated series and valuation ratios, fits the
log-ratio autoregressions, and feeds the fitted parameters into
withdrawal-rate Monte Carlo and continuous-time factor models. The
cli module exposes every stage as a command; goldens pins the
reference values the bundled file is expected to reproduce.
"""

from .errors import (DegenerateSeries, GapInYears, GridUnstable,
                     LengthMismatch, MalformedRow, NoConvergence, NonPositive,
                     NonPositiveTheta, NonPositiveWealth, RankDeficient,
                     SampleSizeOutOfRange, StepTooLarge, TooFewObservations,
                     TooFewRows, ValuationLabError, WindowTooLarge)
from .market_data import (DerivedSeries, RawMarketTable, build_derived,
                          deflate, derived_to_csv, load_bundled_csv,
                          parse_derived_csv, parse_market_csv, total_returns,
                          trailing_average, wealth)
from .econostats import (OlsFit, TestReport, adf_test, correlation_test,
                         jarque_bera, ljung_box, ols, shapiro_wilk)
from .valuation import (Ar1Fit, BubbleFit, fit_bubble, fit_to_json,
                        fit_tr_cape, predictive_correlation,
                        student_t_slope_test)
from .dynamics import (DiscreteModelSpec, SimulatedPath, WithdrawalProcess,
                       check_lln, earnings_linked_stats,
                       geometric_ergodicity_estimate, path_from_components,
                       simulate_ar1, stationary_moments,
                       sustainability_bounds)
from .ruin import (PortfolioRuleConfig, RuinConfig, RuinSurface,
                   block_bootstrap_growth, parse_ruin_surface_csv,
                   portfolio_ruin, portfolio_rule_share, riskfree_real,
                   ruin_surface)
from .ctmodels import (CtModelSpec, CtPortfolioPath, CustomDrift, JumpDist,
                       LevySpec, LinearOU, ThetaSolution, consumption_rule,
                       ct_spec_from_json, ct_spec_to_json,
                       ergodicity_check_ct, integrate_portfolio,
                       log_utility_grid, optimal_pi, parse_path_csv,
                       parse_theta_csv, path_to_csv, simulate_factor,
                       simulate_fundamental, simulate_levy_factor,
                       solve_consumption_ode, solve_terminal_pde,
                       wealth_from_factor)
from .goldens import GOLDEN_TABLE, GoldenEntry, compare, compute_actuals
from .cli import RunConfig, main, run

__version__ = "0.1.0"

__all__ = [
    "Ar1Fit", "BubbleFit", "CtModelSpec", "CtPortfolioPath", "CustomDrift",
    "DegenerateSeries", "DerivedSeries", "DiscreteModelSpec", "GOLDEN_TABLE",
    "GapInYears", "GoldenEntry", "GridUnstable", "JumpDist", "LengthMismatch",
    "LevySpec", "LinearOU", "MalformedRow", "NoConvergence", "NonPositive",
    "NonPositiveTheta", "NonPositiveWealth", "OlsFit", "PortfolioRuleConfig",
    "RankDeficient", "RawMarketTable", "RuinConfig", "RuinSurface",
    "RunConfig", "SampleSizeOutOfRange", "SimulatedPath", "StepTooLarge",
    "TestReport", "ThetaSolution", "TooFewObservations", "TooFewRows",
    "ValuationLabError", "WindowTooLarge", "WithdrawalProcess", "adf_test",
    "block_bootstrap_growth", "build_derived", "check_lln", "compare",
    "compute_actuals", "consumption_rule", "correlation_test",
    "ct_spec_from_json", "ct_spec_to_json", "deflate", "derived_to_csv",
    "earnings_linked_stats", "ergodicity_check_ct", "fit_bubble",
    "fit_to_json", "fit_tr_cape", "geometric_ergodicity_estimate",
    "integrate_portfolio", "jarque_bera", "ljung_box", "load_bundled_csv",
    "log_utility_grid", "main", "ols", "optimal_pi", "parse_derived_csv",
    "parse_market_csv", "parse_path_csv", "parse_ruin_surface_csv",
    "parse_theta_csv", "path_from_components", "path_to_csv",
    "portfolio_ruin", "portfolio_rule_share", "predictive_correlation",
    "riskfree_real", "ruin_surface", "run", "shapiro_wilk", "simulate_ar1",
    "simulate_factor", "simulate_fundamental", "simulate_levy_factor",
    "solve_consumption_ode", "solve_terminal_pde", "stationary_moments",
    "student_t_slope_test", "sustainability_bounds", "total_returns",
    "trailing_average", "wealth", "wealth_from_factor",
]
