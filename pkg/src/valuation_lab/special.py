"""Special functions backing the statistical tests.

Normal CDF/quantile come from the standard library. The incomplete
gamma and incomplete beta functions are evaluated with the classic
series / continued-fraction split so that chi-square, Student-t and F
tail probabilities need no external dependency.
"""

import math
from statistics import NormalDist

_STD_NORMAL = NormalDist()

_MAX_ITER = 400
_EPS = 3.0e-15
_FPMIN = 1.0e-300


def norm_cdf(x):
    """Standard normal CDF."""
    return _STD_NORMAL.cdf(x)


def norm_sf(x):
    """Standard normal survival function, computed on the far tail
    through the CDF of -x to keep precision."""
    return _STD_NORMAL.cdf(-x)


def norm_ppf(p):
    """Standard normal quantile."""
    return _STD_NORMAL.inv_cdf(p)


def _gamma_series(a, x):
    # series development of P(a, x), valid for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x):
    # Lentz continued fraction for Q(a, x), valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    frac = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        frac *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return frac * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0.0:
        raise ValueError("shape parameter must be positive")
    if x < 0.0:
        raise ValueError("argument must be nonnegative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammainc_upper(a, x):
    """Regularized upper incomplete gamma Q(a, x)."""
    if a <= 0.0:
        raise ValueError("shape parameter must be positive")
    if x < 0.0:
        raise ValueError("argument must be nonnegative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def _beta_cf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    frac = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        frac *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        frac *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return frac


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("shape parameters must be positive")
    if x < 0.0 or x > 1.0:
        raise ValueError("argument must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    # use the side of the symmetry relation where the CF converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def chi2_sf(x, df):
    """Chi-square upper tail probability."""
    if x <= 0.0:
        return 1.0
    return gammainc_upper(0.5 * df, 0.5 * x)


def t_sf(t, df):
    """Student-t upper tail probability."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    p = 0.5 * betainc(0.5 * df, 0.5, df / (df + t * t))
    if t < 0.0:
        p = 1.0 - p
    return p


def t_two_sided(t, df):
    """Two sided Student-t p-value for a t statistic."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    return betainc(0.5 * df, 0.5, df / (df + t * t))


def f_sf(f, df1, df2):
    """F distribution upper tail probability."""
    if f <= 0.0:
        return 1.0
    return betainc(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f))
