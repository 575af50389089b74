"""Regression and diagnostic-test kernel.

Everything downstream (valuation fits, unit-root checks, simulation
diagnostics) goes through the small set of estimators and tests in this
module. All p-values are computed from the tail functions in
``special`` so results are reproducible bit for bit across machines.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSeries,
    RankDeficient,
    SampleSizeOutOfRange,
    TooFewObservations,
)
from .special import chi2_sf, norm_cdf, norm_ppf, norm_sf, t_two_sided

TEST_NAMES = (
    "LjungBox",
    "JarqueBera",
    "ShapiroWilk",
    "ADF",
    "PearsonT",
    "SpearmanT",
    "KendallT",
    "StudentT",
)


@dataclass
class OlsFit:
    """Ordinary least squares result.

    sigma_hat is the residual standard error with the n - k degrees of
    freedom correction. r_squared is centered when the design contains
    a constant column and uncentered otherwise.
    """

    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    sigma_hat: float
    r_squared: float
    n: int
    k: int


@dataclass
class TestReport:
    """Outcome of a single statistical test."""

    __test__ = False  # not a pytest class despite the name

    name: str
    statistic: float
    p_value: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in TEST_NAMES:
            raise ValueError(f"unknown test name {self.name!r}")

    def to_dict(self):
        return {
            "name": self.name,
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "params": dict(self.params),
        }


def ols(y, x):
    """Fit y on the columns of x by least squares.

    Parameters
    ----------
    y : array, shape (n,)
    x : array, shape (n, k)
        Design matrix. A constant column must be included explicitly
        when an intercept is wanted.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError("y must be 1-d with one row of x per observation")
    n, k = x.shape
    if n <= k:
        raise TooFewObservations(f"need more than {k} observations, got {n}")
    if np.linalg.matrix_rank(x) < k:
        raise RankDeficient("design matrix is rank deficient")

    beta, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    fitted = x @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    dof = n - k
    sigma2 = rss / dof
    xtx_inv = np.linalg.inv(x.T @ x)
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = np.where(se > 0, beta / se, np.inf)
    pvals = np.array([t_two_sided(t, dof) for t in tvals])

    has_const = bool(np.any(np.all(x == x[0, :], axis=0) & (x[0, :] != 0.0)))
    if has_const:
        tss = float(np.sum((y - y.mean()) ** 2))
    else:
        tss = float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else 0.0

    return OlsFit(
        coefficients=beta,
        standard_errors=se,
        t_stats=tvals,
        p_values=pvals,
        residuals=resid,
        fitted=fitted,
        sigma_hat=float(np.sqrt(sigma2)),
        r_squared=r2,
        n=n,
        k=k,
    )


def _autocorrelations(x, max_lag):
    # biased estimator: both numerator and denominator divide by n,
    # so the 1/n factors cancel in the ratio
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 0.0:
        raise DegenerateSeries("series has zero variance")
    return np.array([float(xc[k:] @ xc[:-k]) / denom for k in range(1, max_lag + 1)])


def ljung_box(x, lags, fitted_params=0):
    """Portmanteau test for autocorrelation up to the given lag.

    Q = n (n + 2) sum_k acf_k^2 / (n - k), referred to a chi-square
    with lags - fitted_params degrees of freedom. fitted_params should
    be the number of ARMA parameters estimated from the same data.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if lags < 1:
        raise ValueError("lags must be at least 1")
    df = lags - fitted_params
    if df < 1:
        raise ValueError("lags must exceed fitted_params")
    if n <= lags + 1:
        raise TooFewObservations(f"need more than {lags + 1} observations, got {n}")
    rho = _autocorrelations(x, lags)
    q = float(n * (n + 2.0) * np.sum(rho ** 2 / (n - np.arange(1, lags + 1))))
    p = chi2_sf(q, df)
    return TestReport(
        name="LjungBox",
        statistic=q,
        p_value=p,
        params={"lags": lags, "fitted_params": fitted_params, "df": df},
    )


def jarque_bera(x):
    """Moment-based normality test (skewness and excess kurtosis)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 8:
        raise TooFewObservations(f"need at least 8 observations, got {n}")
    xc = x - x.mean()
    m2 = float(np.mean(xc ** 2))
    if m2 <= 0.0:
        raise DegenerateSeries("series has zero variance")
    skew = float(np.mean(xc ** 3)) / m2 ** 1.5
    kurt = float(np.mean(xc ** 4)) / m2 ** 2
    jb = n / 6.0 * (skew ** 2 + 0.25 * (kurt - 3.0) ** 2)
    p = chi2_sf(jb, 2)
    return TestReport(
        name="JarqueBera",
        statistic=jb,
        p_value=p,
        params={"skewness": skew, "kurtosis": kurt},
    )


# polynomial corrections for the two largest order-statistic weights
_SW_C1 = (0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_SW_C2 = (0.042981, -0.293762, -1.752461, 5.682633, -3.582633)


def _sw_poly(coeffs, u):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * u + c
    return acc * u


def shapiro_wilk(x):
    """Order-statistic correlation test of normality.

    Uses the 1995 approximation to the weights and the log-normal /
    normal transforms of W for the p-value. Valid for sample sizes
    between 3 and 5000.
    """
    x = np.sort(np.asarray(x, dtype=float))
    n = x.shape[0]
    if n < 3 or n > 5000:
        raise SampleSizeOutOfRange(f"sample size {n} outside [3, 5000]")
    rng = x[-1] - x[0]
    if rng <= 0.0:
        raise DegenerateSeries("all observations identical")

    m = np.array([norm_ppf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    msq = float(m @ m)
    c = m / np.sqrt(msq)
    a = np.empty(n)
    if n == 3:
        a[0], a[1], a[2] = -np.sqrt(0.5), 0.0, np.sqrt(0.5)
    else:
        rsn = 1.0 / np.sqrt(n)
        an = c[-1] + _sw_poly(_SW_C1, rsn)
        if n > 5:
            an1 = c[-2] + _sw_poly(_SW_C2, rsn)
            phi = (msq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / \
                  (1.0 - 2.0 * an ** 2 - 2.0 * an1 ** 2)
            a[2:-2] = m[2:-2] / np.sqrt(phi)
            a[-2], a[1] = an1, -an1
        else:
            phi = (msq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * an ** 2)
            a[1:-1] = m[1:-1] / np.sqrt(phi)
        a[-1], a[0] = an, -an

    xc = x - x.mean()
    w = float(a @ x) ** 2 / float(xc @ xc)
    if w >= 1.0:
        return TestReport(name="ShapiroWilk", statistic=1.0, p_value=1.0,
                          params={"n": n})

    if n == 3:
        p = 6.0 / np.pi * (np.arcsin(np.sqrt(w)) - np.arcsin(np.sqrt(0.75)))
        p = min(max(p, 0.0), 1.0)
    elif n <= 11:
        g = -2.273 + 0.459 * n
        mu = 0.5440 - 0.39978 * n + 0.025054 * n ** 2 - 0.0006714 * n ** 3
        sd = np.exp(1.3822 - 0.77857 * n + 0.062767 * n ** 2 - 0.0020322 * n ** 3)
        z = (-np.log(g - np.log1p(-w)) - mu) / sd
        p = norm_sf(z)
    else:
        ln_n = np.log(n)
        mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n ** 2 + 0.0038915 * ln_n ** 3
        sd = np.exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n ** 2)
        z = (np.log1p(-w) - mu) / sd
        p = norm_sf(z)

    return TestReport(name="ShapiroWilk", statistic=w, p_value=p, params={"n": n})


# response-surface coefficients for the unit-root t statistic with a
# constant term, single series case
_ADF_TAU_MAX = 2.74
_ADF_TAU_MIN = -18.83
_ADF_TAU_STAR = -1.61
_ADF_SMALL_P = (2.1659, 1.4412, 0.038269)
_ADF_LARGE_P = (1.7339, 0.93202, -0.12745, -0.010368)


def _adf_pvalue(stat):
    if stat > _ADF_TAU_MAX:
        return 1.0
    if stat < _ADF_TAU_MIN:
        return 0.0
    coeffs = _ADF_SMALL_P if stat <= _ADF_TAU_STAR else _ADF_LARGE_P
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * stat + c
    return norm_cdf(acc)


def _lag_matrix(dx, lags, level):
    # rows t = lags .. len(dx)-1, columns [level_{t-1}, dx_{t-1}, ..., dx_{t-lags}]
    nobs = dx.shape[0] - lags
    cols = [level[-nobs - 1:-1]]
    for j in range(1, lags + 1):
        cols.append(dx[lags - j:dx.shape[0] - j])
    return np.column_stack(cols), dx[lags:]


def adf_test(x, max_lags=None):
    """Augmented Dickey-Fuller test with a constant and no trend.

    Lag order is chosen by AIC over 0..max_lags on a common trimmed
    sample, then the regression is refit at the chosen order on the
    longest sample it allows. The default max_lags follows the usual
    12 (n/100)^{1/4} rule.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 20:
        raise TooFewObservations(f"need at least 20 observations, got {n}")
    if max_lags is None:
        max_lags = int(np.ceil(12.0 * (n / 100.0) ** 0.25))
        max_lags = min(n // 2 - 2, max_lags)
    dx = np.diff(x)

    # AIC comparison on the sample trimmed to the largest candidate lag
    design_full, y_full = _lag_matrix(dx, max_lags, x)
    nobs = y_full.shape[0]
    const = np.ones(nobs)
    best = None
    for lag in range(0, max_lags + 1):
        design = np.column_stack([const, design_full[:, :lag + 1]])
        beta, _, _, _ = np.linalg.lstsq(design, y_full, rcond=None)
        resid = y_full - design @ beta
        rss = float(resid @ resid)
        k = design.shape[1]
        aic = nobs * np.log(rss / nobs) + 2.0 * k
        if best is None or aic < best[0] - 1e-14:
            best = (aic, lag)
    best_lag = best[1]

    # refit at the chosen order using every available observation
    design, y = _lag_matrix(dx, best_lag, x)
    design = np.column_stack([design, np.ones(y.shape[0])])
    fit = ols(y, design)
    stat = float(fit.t_stats[0])
    p = _adf_pvalue(stat)
    return TestReport(
        name="ADF",
        statistic=stat,
        p_value=p,
        params={"used_lag": best_lag, "n_obs": int(y.shape[0]),
                "max_lags": int(max_lags)},
    )


def _average_ranks(x):
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.shape[0])
    i = 0
    while i < x.shape[0]:
        j = i
        while j + 1 < x.shape[0] and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson_t(x, y, name):
    n = x.shape[0]
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom <= 0.0:
        raise DegenerateSeries("correlation undefined for constant series")
    r = float(xc @ yc) / denom
    r = min(max(r, -1.0), 1.0)
    if abs(r) == 1.0:
        return TestReport(name=name, statistic=r, p_value=0.0, params={"n": n})
    t = r * np.sqrt((n - 2.0) / (1.0 - r * r))
    p = t_two_sided(t, n - 2)
    return TestReport(name=name, statistic=r, p_value=p,
                      params={"n": n, "t": float(t)})


def _tie_counts(x):
    _, counts = np.unique(x, return_counts=True)
    return counts[counts > 1].astype(float)


def _kendall(x, y):
    n = x.shape[0]
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    s = float(np.sum(np.triu(sx * sy, k=1)))

    tx = _tie_counts(x)
    ty = _tie_counts(y)
    n0 = 0.5 * n * (n - 1.0)
    n1 = float(np.sum(tx * (tx - 1.0))) / 2.0
    n2 = float(np.sum(ty * (ty - 1.0))) / 2.0
    denom = np.sqrt((n0 - n1) * (n0 - n2))
    if denom <= 0.0:
        raise DegenerateSeries("correlation undefined for constant series")
    tau = s / denom

    v0 = n * (n - 1.0) * (2.0 * n + 5.0)
    vt = float(np.sum(tx * (tx - 1.0) * (2.0 * tx + 5.0)))
    vu = float(np.sum(ty * (ty - 1.0) * (2.0 * ty + 5.0)))
    v1 = float(np.sum(tx * (tx - 1.0))) * float(np.sum(ty * (ty - 1.0))) / \
        (2.0 * n * (n - 1.0))
    v2 = float(np.sum(tx * (tx - 1.0) * (tx - 2.0))) * \
        float(np.sum(ty * (ty - 1.0) * (ty - 2.0))) / \
        (9.0 * n * (n - 1.0) * (n - 2.0))
    var_s = (v0 - vt - vu) / 18.0 + v1 + v2
    if var_s <= 0.0:
        raise DegenerateSeries("degenerate tie structure")
    z = s / np.sqrt(var_s)
    p = 2.0 * norm_sf(abs(z))
    return tau, min(p, 1.0), float(z)


def correlation_test(x, y, kind="pearson"):
    """Test for association between two series.

    kind is one of pearson, spearman, kendall. The first two use the
    exact-t approximation; the rank version applies it to average
    ranks. The concordance version uses the tie-corrected normal
    approximation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.shape[0] < 3:
        raise TooFewObservations("need at least 3 paired observations")
    if kind == "pearson":
        return _pearson_t(x, y, "PearsonT")
    if kind == "spearman":
        rep = _pearson_t(_average_ranks(x), _average_ranks(y), "SpearmanT")
        return rep
    if kind == "kendall":
        tau, p, z = _kendall(x, y)
        return TestReport(name="KendallT", statistic=tau, p_value=p,
                          params={"n": x.shape[0], "z": z})
    raise ValueError(f"unknown correlation kind {kind!r}")
