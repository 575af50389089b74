"""AR(1) fits of the valuation measures and the detrended mispricing
measure, with the full diagnostic battery attached to each fit.

Two model families:

* a plain first-order autoregression for the log valuation ratio
  (used for the TR-adjusted earnings ratio G);
* a differenced regression with intercept, lagged level and linear
  time trend for the hybrid ratio H, whose implied parameters give
  the trend rate c and the detrended series B(t) = ln-ratio - c t.
"""

from dataclasses import dataclass, field

import numpy as np

from .econostats import (
    TestReport,
    adf_test,
    correlation_test,
    jarque_bera,
    ljung_box,
    ols,
    shapiro_wilk,
)
from .errors import TooFewObservations
from .special import t_two_sided

LJUNG_BOX_LAGS = (5, 10, 15, 20)


@dataclass
class Ar1Fit:
    """x(t) = alpha + beta x(t-1) + eps(t)."""

    alpha: float
    beta: float
    sigma_eps: float
    residuals: np.ndarray
    long_run_mean: float
    diagnostics: list = field(default_factory=list)
    standard_errors: np.ndarray = None
    n: int = 0


@dataclass
class BubbleFit:
    """Differenced trend regression and its implied AR(1) parameters.

    raw_coeffs are the (intercept, lag, trend) estimates of
    dx(t) = b0 + b1 x(t-1) + b2 tau(t-1); implied values satisfy
    b0 = alpha_h + c, b1 = beta_h - 1, b2 = c (1 - beta_h).
    b_series is the detrended log ratio B(t) = x(t) - c tau(t).
    """

    alpha_h: float
    beta_h: float
    c: float
    sigma_eps: float
    long_run_mean: float
    b_series: np.ndarray
    raw_coeffs: np.ndarray
    diagnostics: list = field(default_factory=list)
    raw_standard_errors: np.ndarray = None
    n: int = 0


def _tag(report, label):
    report.params["series"] = label
    return report


def _residual_battery(resid, diagnostics):
    for lags in LJUNG_BOX_LAGS:
        diagnostics.append(_tag(ljung_box(resid, lags), "residuals"))
    for lags in LJUNG_BOX_LAGS:
        diagnostics.append(_tag(ljung_box(np.abs(resid), lags), "abs_residuals"))
    diagnostics.append(_tag(shapiro_wilk(resid), "residuals"))
    diagnostics.append(_tag(jarque_bera(resid), "residuals"))


def fit_tr_cape(ln_g, growth=None):
    """Fit an AR(1) to a log valuation series.

    Parameters
    ----------
    ln_g : array
        Log ratio series, one value per year.
    growth : array, optional
        Log growth of the averaging denominator, aligned with the
        residuals (length len(ln_g) - 1). When given, independence of
        residuals and growth is tested with all three correlation
        tests on levels and absolute values.

    Diagnostics: Ljung-Box at lags 5/10/15/20 on residuals and their
    absolute values, Shapiro-Wilk, Jarque-Bera, a unit-root test on
    the input series, and the optional growth correlations.
    """
    ln_g = np.asarray(ln_g, dtype=float)
    if ln_g.shape[0] < 30:
        raise TooFewObservations("need at least 30 observations")
    y = ln_g[1:]
    design = np.column_stack([np.ones(y.shape[0]), ln_g[:-1]])
    fit = ols(y, design)
    alpha, beta = fit.coefficients
    resid = fit.residuals

    diagnostics = []
    _residual_battery(resid, diagnostics)
    diagnostics.append(_tag(adf_test(ln_g), "series"))
    if growth is not None:
        growth = np.asarray(growth, dtype=float)
        if growth.shape[0] != resid.shape[0]:
            raise ValueError("growth must align with residuals")
        for kind in ("pearson", "spearman", "kendall"):
            diagnostics.append(
                _tag(correlation_test(resid, growth, kind), "residuals_vs_growth"))
            diagnostics.append(
                _tag(correlation_test(np.abs(resid), np.abs(growth), kind),
                     "abs_residuals_vs_abs_growth"))

    return Ar1Fit(
        alpha=float(alpha),
        beta=float(beta),
        sigma_eps=fit.sigma_hat,
        residuals=resid,
        long_run_mean=float(alpha / (1.0 - beta)),
        diagnostics=diagnostics,
        standard_errors=fit.standard_errors,
        n=fit.n,
    )


def fit_bubble(h_log_ratio, t_index=None):
    """Fit the trend model to the log hybrid ratio.

    The series is first recentered at its initial value, so only the
    shape matters. The regression is of one-year differences on an
    intercept, the lagged recentered level, and the lagged time
    index; implied parameters follow from the identities in the
    class docstring. long_run_mean is alpha_h / (1 - beta_h), the
    fixed point of the implied recursion.
    """
    x = np.asarray(h_log_ratio, dtype=float)
    if x.shape[0] < 30:
        raise TooFewObservations("need at least 30 observations")
    x = x - x[0]
    if t_index is None:
        t_index = np.arange(1, x.shape[0] + 1, dtype=float)
    else:
        t_index = np.asarray(t_index, dtype=float)
        if t_index.shape != x.shape:
            raise ValueError("t_index must align with the series")

    dx = np.diff(x)
    design = np.column_stack([np.ones(dx.shape[0]), x[:-1], t_index[:-1]])
    fit = ols(dx, design)
    b0, b1, b2 = fit.coefficients
    beta_h = 1.0 + b1
    c = b2 / (1.0 - beta_h)
    alpha_h = b0 - c
    b_series = x - c * t_index

    diagnostics = []
    _residual_battery(fit.residuals, diagnostics)
    dof = fit.n - fit.k
    t_stat = float(b1 / fit.standard_errors[1])
    diagnostics.append(TestReport(
        name="StudentT",
        statistic=t_stat,
        p_value=t_two_sided(t_stat, dof),
        params={"coefficient": "lag", "null_value": 1.0, "df": dof,
                "series": "slope_vs_unit"},
    ))

    return BubbleFit(
        alpha_h=float(alpha_h),
        beta_h=float(beta_h),
        c=float(c),
        sigma_eps=fit.sigma_hat,
        long_run_mean=float(alpha_h / (1.0 - beta_h)),
        b_series=b_series,
        raw_coeffs=fit.coefficients,
        diagnostics=diagnostics,
        raw_standard_errors=fit.standard_errors,
        n=fit.n,
    )


def predictive_correlation(measure, returns, horizon):
    """Correlation between a measure and mean forward returns.

    measure and returns must be aligned by position (same index means
    same year; NaN marks undefined years). For each t with measure(t)
    defined and a full window of returns t+1..t+horizon, the pair
    (measure(t), mean forward return) enters a Pearson correlation.
    """
    measure = np.asarray(measure, dtype=float)
    returns = np.asarray(returns, dtype=float)
    if measure.shape != returns.shape:
        raise ValueError("measure and returns must be aligned")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    n = measure.shape[0]
    xs, ys = [], []
    for t in range(n - horizon):
        window = returns[t + 1:t + horizon + 1]
        if np.isnan(measure[t]) or np.any(np.isnan(window)):
            continue
        xs.append(measure[t])
        ys.append(window.mean())
    if len(xs) < 3:
        raise TooFewObservations("fewer than 3 full forward windows")
    rep = correlation_test(np.asarray(xs), np.asarray(ys), "pearson")
    return float(rep.statistic)


def student_t_slope_test(fit, null_value):
    """Two-sided t-test of the fitted slope against a null value.

    For the plain AR(1) the slope is beta; for the trend model it is
    beta_h, tested through the raw lag coefficient whose standard
    error it shares.
    """
    if isinstance(fit, BubbleFit):
        slope = fit.beta_h
        se = float(fit.raw_standard_errors[1])
        dof = fit.n - 3
    else:
        slope = fit.beta
        se = float(fit.standard_errors[1])
        dof = fit.n - 2
    if se == 0.0:
        stat = 0.0 if slope == null_value else np.inf
        p = 1.0 if slope == null_value else 0.0
    else:
        stat = (slope - null_value) / se
        p = t_two_sided(stat, dof)
    return TestReport(
        name="StudentT",
        statistic=float(stat),
        p_value=float(p),
        params={"null_value": float(null_value), "df": int(dof)},
    )


def fit_to_json(fit):
    """Serializable summary: model, coefficients, implied parameters
    and the diagnostic reports."""
    if isinstance(fit, BubbleFit):
        return {
            "model": "trend_bubble",
            "coefficients": {
                "intercept": float(fit.raw_coeffs[0]),
                "lag": float(fit.raw_coeffs[1]),
                "trend": float(fit.raw_coeffs[2]),
            },
            "implied": {
                "alpha": fit.alpha_h,
                "beta": fit.beta_h,
                "c": fit.c,
                "h": fit.long_run_mean,
                "sigma_eps": fit.sigma_eps,
            },
            "diagnostics": [d.to_dict() for d in fit.diagnostics],
        }
    return {
        "model": "ar1",
        "coefficients": {"intercept": fit.alpha, "lag": fit.beta},
        "implied": {
            "alpha": fit.alpha,
            "beta": fit.beta,
            "c": None,
            "h": fit.long_run_mean,
            "sigma_eps": fit.sigma_eps,
        },
        "diagnostics": [d.to_dict() for d in fit.diagnostics],
    }
