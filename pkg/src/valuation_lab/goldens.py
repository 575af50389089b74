"""Frozen reference values and the comparison report.

Each row of GOLDEN_TABLE pins one reference statistic for the bundled
1871-2020 annual file: regression coefficients, residual test
p-values, predictive correlations, moment summaries, and the
growth-linked withdrawal table. compare() recomputes every statistic
from a raw table and grades it against the reference at the stated
tolerance.

Rows with known_miss=True are expected to land outside their band on
the bundled file; they are reported as failures rather than
recalibrated. Most are p-values of residual tests, which are
sensitive to small differences in the source-table vintage even when
the fitted coefficients agree to three decimals.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import DiscreteModelSpec, earnings_linked_stats
from .market_data import build_derived, load_bundled_csv, parse_market_csv
from .ruin import RuinConfig, ruin_surface
from .valuation import (fit_bubble, fit_tr_cape, predictive_correlation,
                        student_t_slope_test)


@dataclass(frozen=True)
class GoldenEntry:
    """One reference comparison: abs mode checks |actual - target| <= tol,
    max mode checks actual <= target, min mode checks actual >= target."""

    key: str
    category: str
    target: float
    tol: float = 0.0
    mode: str = "abs"
    known_miss: bool = False


GOLDEN_TABLE = (
    # log TR-CAPE autoregression
    GoldenEntry("ar1_alpha", "tr_cape", 0.34452, 0.005),
    GoldenEntry("ar1_beta", "tr_cape", 0.88321, 0.005),
    GoldenEntry("ar1_sigma_eps", "tr_cape", 0.16907, 0.005),
    # detrended log ratio regression
    GoldenEntry("bubble_raw_intercept", "bubble", 0.0220, 0.002),
    GoldenEntry("bubble_raw_lag", "bubble", -0.1315, 0.002),
    GoldenEntry("bubble_raw_trend", "bubble", 0.0061, 0.002),
    GoldenEntry("bubble_c", "bubble", 0.04668, 0.003),
    GoldenEntry("bubble_beta_h", "bubble", 0.8685, 0.005),
    GoldenEntry("bubble_long_run_mean", "bubble", -0.1875, 0.01),
    GoldenEntry("bubble_b_final", "bubble", -0.3434, 0.01),
    # residual diagnostics, TR-CAPE fit
    GoldenEntry("lb_resid_tr_lag5", "diagnostics", 0.16, 0.03),
    GoldenEntry("lb_resid_tr_lag10", "diagnostics", 0.15, 0.03),
    GoldenEntry("lb_resid_tr_lag15", "diagnostics", 0.29, 0.03, known_miss=True),
    GoldenEntry("lb_resid_tr_lag20", "diagnostics", 0.24, 0.03),
    GoldenEntry("lb_abs_tr_lag5", "diagnostics", 0.07, 0.03, known_miss=True),
    GoldenEntry("lb_abs_tr_lag10", "diagnostics", 0.08, 0.03, known_miss=True),
    GoldenEntry("lb_abs_tr_lag15", "diagnostics", 0.18, 0.03),
    GoldenEntry("lb_abs_tr_lag20", "diagnostics", 0.29, 0.03),
    GoldenEntry("sw_tr_p", "diagnostics", 0.045, 0.02),
    GoldenEntry("jb_tr_p", "diagnostics", 0.031, 0.02),
    # residual diagnostics, detrended fit
    GoldenEntry("lb_resid_bubble_lag5", "diagnostics", 0.16, 0.03),
    GoldenEntry("lb_resid_bubble_lag10", "diagnostics", 0.14, 0.03),
    GoldenEntry("lb_resid_bubble_lag15", "diagnostics", 0.17, 0.03),
    GoldenEntry("lb_resid_bubble_lag20", "diagnostics", 0.03, 0.03),
    GoldenEntry("lb_abs_bubble_lag5", "diagnostics", 0.12, 0.03, known_miss=True),
    GoldenEntry("lb_abs_bubble_lag10", "diagnostics", 0.03, 0.03),
    GoldenEntry("lb_abs_bubble_lag15", "diagnostics", 0.06, 0.03),
    GoldenEntry("lb_abs_bubble_lag20", "diagnostics", 0.16, 0.03),
    GoldenEntry("sw_bubble_p", "diagnostics", 0.06, 0.02, known_miss=True),
    GoldenEntry("jb_bubble_p", "diagnostics", 0.06, 0.02),
    # unit root and slope tests on the log TR-CAPE level
    GoldenEntry("adf_lng_p", "diagnostics", 0.073, 0.03),
    GoldenEntry("slope_test_p", "diagnostics", 0.01, mode="max"),
    # residual vs growth independence p-values
    GoldenEntry("pearson_level_p", "diagnostics", 0.14, 0.03, known_miss=True),
    GoldenEntry("pearson_abs_p", "diagnostics", 0.92, 0.03, known_miss=True),
    GoldenEntry("spearman_level_p", "diagnostics", 0.12, 0.03, known_miss=True),
    GoldenEntry("spearman_abs_p", "diagnostics", 0.99, 0.03, known_miss=True),
    GoldenEntry("kendall_level_p", "diagnostics", 0.13, 0.03, known_miss=True),
    GoldenEntry("kendall_abs_p", "diagnostics", 0.90, 0.03, known_miss=True),
    # predictive correlations with mean forward returns
    GoldenEntry("pred_lng_10y", "predictive", -0.541, 0.02),
    GoldenEntry("pred_lnf_10y", "predictive", -0.538, 0.02),
    GoldenEntry("pred_bubble_10y", "predictive", -0.49, 0.02),
    GoldenEntry("pred_lng_1y", "predictive", -0.178, 0.02),
    GoldenEntry("pred_lnf_1y", "predictive", -0.182, 0.02),
    GoldenEntry("pred_bubble_1y", "predictive", -0.180, 0.02),
    GoldenEntry("corr_lnf_lng", "predictive", 0.99, mode="min"),
    # moment summaries of the derived series
    GoldenEntry("sd_total_returns", "moments", 0.17076, 0.002),
    GoldenEntry("tr_growth_mean", "moments", 0.05933, 0.001),
    GoldenEntry("tr_growth_sd", "moments", 0.03566, 0.001),
    GoldenEntry("real_growth_mean", "moments", 0.01773, 0.0005),
    GoldenEntry("real_growth_sd", "moments", 0.03689, 0.001),
    GoldenEntry("mean_cape", "moments", 17.0, 0.5),
    GoldenEntry("mean_tr_cape", "moments", 19.9, 0.5),
    # growth-linked withdrawal table and a ruin spot check
    GoldenEntry("mean_discount_factor", "withdrawal", 0.917, 0.01),
    GoldenEntry("m_rate_1pct", "withdrawal", 0.074, 0.005),
    GoldenEntry("m_rate_2pct", "withdrawal", 0.064, 0.005),
    GoldenEntry("m_rate_3pct", "withdrawal", 0.055, 0.005),
    GoldenEntry("m_rate_4pct", "withdrawal", 0.046, 0.005, known_miss=True),
    GoldenEntry("ruin_4pct_30y", "withdrawal", 0.10, mode="max"),
)

KNOWN_MISS_KEYS = frozenset(e.key for e in GOLDEN_TABLE if e.known_miss)


def entry_passes(entry, actual):
    if not np.isfinite(actual):
        return False
    if entry.mode == "abs":
        return abs(actual - entry.target) <= entry.tol
    if entry.mode == "max":
        return actual <= entry.target
    if entry.mode == "min":
        return actual >= entry.target
    raise ValueError(f"unknown mode {entry.mode!r}")


def _diag_p(diags, name, series, lags=None):
    for rep in diags:
        if rep.name != name or rep.params.get("series") != series:
            continue
        if lags is not None and rep.params.get("lags") != lags:
            continue
        return rep.p_value
    raise KeyError(f"no diagnostic ({name}, {series}, {lags})")


def compute_actuals(raw, n_sims=4000, master_seed=0):
    """Recompute every golden statistic from a raw market table.

    The single Monte Carlo row (ruin_4pct_30y) uses n_sims paths and
    master_seed; everything else is deterministic in the data.
    """
    der = build_derived(raw)
    k = der.base_index
    ln_g = np.log(der.tr_cape[k:])
    ln_f = np.log(der.cape[k:])
    ln_h = np.log(der.modified_ratio[k:])
    ebar10 = der.Ebar10[k:]
    g_tr = np.log(ebar10[1:] / ebar10[:-1])
    e10 = der.E10[k:]
    g_e10 = np.log(e10[1:] / e10[:-1])
    inflation = np.log(raw.cpi[1:] / raw.cpi[:-1])
    g_nom = g_tr + inflation[k:]

    fit = fit_tr_cape(ln_g, growth=g_tr)
    bub = fit_bubble(ln_h)
    out = {
        "ar1_alpha": fit.alpha,
        "ar1_beta": fit.beta,
        "ar1_sigma_eps": fit.sigma_eps,
        "bubble_raw_intercept": float(bub.raw_coeffs[0]),
        "bubble_raw_lag": float(bub.raw_coeffs[1]),
        "bubble_raw_trend": float(bub.raw_coeffs[2]),
        "bubble_c": bub.c,
        "bubble_beta_h": bub.beta_h,
        "bubble_long_run_mean": bub.long_run_mean,
        "bubble_b_final": float(bub.b_series[-1]),
    }

    d_tr, d_bub = fit.diagnostics, bub.diagnostics
    for lag in (5, 10, 15, 20):
        out[f"lb_resid_tr_lag{lag}"] = _diag_p(d_tr, "LjungBox", "residuals", lag)
        out[f"lb_abs_tr_lag{lag}"] = _diag_p(d_tr, "LjungBox", "abs_residuals", lag)
        out[f"lb_resid_bubble_lag{lag}"] = _diag_p(d_bub, "LjungBox", "residuals", lag)
        out[f"lb_abs_bubble_lag{lag}"] = _diag_p(d_bub, "LjungBox", "abs_residuals", lag)
    out["sw_tr_p"] = _diag_p(d_tr, "ShapiroWilk", "residuals")
    out["jb_tr_p"] = _diag_p(d_tr, "JarqueBera", "residuals")
    out["sw_bubble_p"] = _diag_p(d_bub, "ShapiroWilk", "residuals")
    out["jb_bubble_p"] = _diag_p(d_bub, "JarqueBera", "residuals")
    out["adf_lng_p"] = _diag_p(d_tr, "ADF", "series")
    out["slope_test_p"] = student_t_slope_test(bub, 1.0).p_value
    for kind, label in (("PearsonT", "pearson"), ("SpearmanT", "spearman"),
                        ("KendallT", "kendall")):
        out[f"{label}_level_p"] = _diag_p(d_tr, kind, "residuals_vs_growth")
        out[f"{label}_abs_p"] = _diag_p(d_tr, kind, "abs_residuals_vs_abs_growth")

    n = raw.years.shape[0]

    def padded(series):
        full = np.full(n, np.nan)
        full[k:] = series
        return full

    for name, series in (("lng", ln_g), ("lnf", ln_f), ("bubble", bub.b_series)):
        out[f"pred_{name}_10y"] = predictive_correlation(padded(series), der.R, 10)
        out[f"pred_{name}_1y"] = predictive_correlation(padded(series), der.R, 1)
    out["corr_lnf_lng"] = float(np.corrcoef(ln_f, ln_g)[0, 1])

    out["sd_total_returns"] = float(der.R[1:].std(ddof=1))
    out["tr_growth_mean"] = float(g_tr.mean())
    out["tr_growth_sd"] = float(g_tr.std(ddof=1))
    out["real_growth_mean"] = float(g_e10.mean())
    out["real_growth_sd"] = float(g_e10.std(ddof=1))
    out["mean_cape"] = float(der.cape[k:].mean())
    out["mean_tr_cape"] = float(der.tr_cape[k:].mean())

    out["mean_discount_factor"] = earnings_linked_stats(0.0, g_nom)[
        "mean_discount_factor"]
    for pct in (1, 2, 3, 4):
        out[f"m_rate_{pct}pct"] = earnings_linked_stats(pct / 100.0, g_nom)[
            "mean_withdrawal"]

    model = DiscreteModelSpec(alpha=bub.alpha_h, beta=bub.beta_h, c=bub.c,
                              sigma_eps=bub.sigma_eps)
    surface = ruin_surface(RuinConfig(
        model=model, b0=bub.long_run_mean, horizons=[30],
        withdrawal_grid=[0.04], n_sims=n_sims, master_seed=master_seed,
        growth_history=g_e10))
    out["ruin_4pct_30y"] = float(surface.entries[(0.04, 30)])
    return out


def compare(raw=None, n_sims=4000, master_seed=0):
    """Grade recomputed statistics against the reference table.

    Returns a dict with one row per golden entry plus summary counts
    and the list of failures outside the documented known-miss set.
    """
    if raw is None:
        raw = parse_market_csv(load_bundled_csv())
    actuals = compute_actuals(raw, n_sims=n_sims, master_seed=master_seed)
    rows = []
    unexpected = []
    n_pass = 0
    for entry in GOLDEN_TABLE:
        actual = float(actuals[entry.key])
        ok = entry_passes(entry, actual)
        n_pass += ok
        if not ok and not entry.known_miss:
            unexpected.append(entry.key)
        rows.append({
            "key": entry.key,
            "category": entry.category,
            "target": entry.target,
            "tolerance": entry.tol,
            "mode": entry.mode,
            "actual": actual,
            "passed": bool(ok),
            "known_miss": entry.known_miss,
        })
    return {
        "rows": rows,
        "n_rows": len(rows),
        "n_pass": n_pass,
        "n_fail": len(rows) - n_pass,
        "unexpected_misses": unexpected,
        "n_sims": n_sims,
        "master_seed": master_seed,
    }
