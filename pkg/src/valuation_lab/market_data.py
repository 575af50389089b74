"""Annual market data ingestion and derived valuation series.

The input is a small annual CSV with nominal index level, per-share
dividend and earnings, and the January CPI level. Conventions:

* row labeled year y carries the January-y index level and CPI, and
  the dividend/earnings accrued over calendar year y;
* with rows indexed t = 0..T, the flow variables d(t), e(t) used at
  time t are the calendar flows of the year ending at January t, so
  they come from row t-1 and run t = 1..T;
* the final row may leave dividend and earnings empty (not realized
  yet); its price and CPI still anchor S(T) and the deflator.

All deflated values are expressed in final-year dollars.
"""

import csv
import io
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

import numpy as np

from .errors import (
    GapInYears,
    MalformedRow,
    NonPositive,
    TooFewRows,
    WindowTooLarge,
)

RAW_HEADER = ["year", "price", "dividend", "earnings", "cpi"]
DERIVED_HEADER = ["year", "S", "D", "E", "R", "V", "E10", "Ebar",
                  "Ebar10", "cape", "tr_cape", "H"]


@dataclass
class RawMarketTable:
    """Validated annual table. dividend/earnings hold NaN in the final
    row when those fields were empty."""

    years: np.ndarray
    price: np.ndarray
    dividend: np.ndarray
    earnings: np.ndarray
    cpi: np.ndarray

    @property
    def n_rows(self):
        return int(self.years.shape[0])


@dataclass
class DerivedSeries:
    """Deflated series and valuation ratios, all aligned to the raw
    rows (index t = 0..T) with NaN where a value is undefined.

    cape is the price-to-average-earnings ratio F, tr_cape the
    wealth-to-adjusted-average-earnings ratio G, and modified_ratio
    the hybrid H = V / E10 that drives the mispricing measure.
    """

    S: np.ndarray
    D: np.ndarray
    E: np.ndarray
    R: np.ndarray
    V: np.ndarray
    E10: np.ndarray
    Ebar: np.ndarray
    Ebar10: np.ndarray
    cape: np.ndarray
    tr_cape: np.ndarray
    modified_ratio: np.ndarray
    window: int
    base_index: int


def _decimal_cell(cell, year, name):
    try:
        return float(Decimal(cell))
    except InvalidOperation:
        raise MalformedRow(f"row {year}: non-numeric {name} {cell!r}") from None


def parse_market_csv(content):
    """Parse CSV bytes or text into a RawMarketTable.

    The header must be exactly year,price,dividend,earnings,cpi.
    Trailing blank lines are ignored. Empty dividend/earnings cells
    are accepted on the final row only.
    """
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    reader = csv.reader(io.StringIO(content))
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        raise TooFewRows("empty input")
    if rows[0] != RAW_HEADER:
        raise MalformedRow(f"bad header {rows[0]!r}, expected {RAW_HEADER!r}")
    body = rows[1:]
    if len(body) < 2:
        raise TooFewRows(f"need at least 2 data rows, got {len(body)}")

    years, price, dividend, earnings, cpi = [], [], [], [], []
    last = len(body) - 1
    for i, row in enumerate(body):
        if len(row) != 5:
            raise MalformedRow(f"row {i + 2}: expected 5 fields, got {len(row)}")
        y_cell, p_cell, d_cell, e_cell, c_cell = (c.strip() for c in row)
        try:
            y = int(y_cell)
        except ValueError:
            raise MalformedRow(f"row {i + 2}: non-integer year {y_cell!r}") from None
        p = _decimal_cell(p_cell, y, "price")
        c = _decimal_cell(c_cell, y, "cpi")
        if (d_cell == "" or e_cell == "") and i != last:
            raise MalformedRow(
                f"row {i + 2}: dividend/earnings may be empty only in the "
                "final row")
        d = np.nan if d_cell == "" else _decimal_cell(d_cell, y, "dividend")
        e = np.nan if e_cell == "" else _decimal_cell(e_cell, y, "earnings")
        if p <= 0.0:
            raise NonPositive(f"row {y}: price must be positive")
        if c <= 0.0:
            raise NonPositive(f"row {y}: cpi must be positive")
        if not np.isnan(d) and d <= 0.0:
            raise NonPositive(f"row {y}: dividend must be positive")
        years.append(y)
        price.append(p)
        dividend.append(d)
        earnings.append(e)
        cpi.append(c)

    years = np.asarray(years, dtype=int)
    if np.any(np.diff(years) != 1):
        bad = int(years[np.argmax(np.diff(years) != 1)])
        raise GapInYears(f"years must increase by exactly 1 (break after {bad})")

    return RawMarketTable(
        years=years,
        price=np.asarray(price),
        dividend=np.asarray(dividend),
        earnings=np.asarray(earnings),
        cpi=np.asarray(cpi),
    )


def deflate(raw):
    """Deflate the nominal columns to final-year dollars.

    Returns (S, D, E), each of length n_rows and aligned to t; D and E
    are NaN at t = 0 because the flows of the year before the first
    price observation are unobserved. D(t), E(t) are the calendar
    flows from row t-1 deflated by the January CPI of row t.
    """
    c = raw.cpi
    scale = c[-1] / c
    s_real = scale * raw.price
    d_real = np.full(raw.n_rows, np.nan)
    e_real = np.full(raw.n_rows, np.nan)
    d_real[1:] = scale[1:] * raw.dividend[:-1]
    e_real[1:] = scale[1:] * raw.earnings[:-1]
    return s_real, d_real, e_real


def total_returns(s_real, d_real):
    """Log total returns R(t) = ln((S(t) + D(t)) / S(t-1)), t = 1..T.

    d_real may have length n (leading entry ignored) or n - 1.
    """
    s_real = np.asarray(s_real, dtype=float)
    d_real = np.asarray(d_real, dtype=float)
    if d_real.shape[0] == s_real.shape[0]:
        d_real = d_real[1:]
    elif d_real.shape[0] != s_real.shape[0] - 1:
        raise ValueError("dividend series length must be n or n-1")
    gross = s_real[1:] + d_real
    if np.any(gross <= 0.0):
        raise NonPositive("price plus dividend must be positive")
    return np.log(gross / s_real[:-1])


def wealth(r):
    """Wealth index V with V(0) = 1 and V(t) = exp(R(1) + ... + R(t))."""
    r = np.asarray(r, dtype=float)
    return np.concatenate([[1.0], np.exp(np.cumsum(r))])


def trailing_average(x, window):
    """Inclusive trailing mean: out[j] = mean(x[j..j+window-1]).

    The output is aligned so its first entry corresponds to index
    window-1 of the input.
    """
    x = np.asarray(x, dtype=float)
    if window < 1:
        raise ValueError("window must be at least 1")
    if window > x.shape[0]:
        raise WindowTooLarge(
            f"window {window} exceeds series length {x.shape[0]}")
    return np.array([x[k - window + 1:k + 1].mean()
                     for k in range(window - 1, x.shape[0])])


def build_derived(raw, window=10):
    """Construct every derived series from a validated table.

    Ratios are defined from base_index = window onward because the
    flow series starts at t = 1, so the first full trailing window
    ends at t = window.
    """
    n = raw.n_rows
    t_last = n - 1
    if n < window + 2:
        raise TooFewRows(f"need at least window+2 = {window + 2} rows, got {n}")
    if np.any(np.isnan(raw.dividend[:-1])) or np.any(np.isnan(raw.earnings[:-1])):
        raise MalformedRow("dividend/earnings may be missing only in the final row")

    s_real, d_full, e_full = deflate(raw)
    d_c = d_full[1:]
    e_c = e_full[1:]
    r = total_returns(s_real, d_c)
    v = wealth(r)
    ebar_c = v[1:] / s_real[1:] * e_c
    e10_c = trailing_average(e_c, window)
    ebar10_c = trailing_average(ebar_c, window)
    if np.any(e10_c <= 0.0) or np.any(ebar10_c <= 0.0):
        raise NonPositive("trailing average earnings must stay positive")
    cape = s_real[window:] / e10_c
    tr_cape = v[window:] / ebar10_c
    modified = v[window:] / e10_c

    def pad(values, start):
        out = np.full(n, np.nan)
        out[start:] = values
        return out

    return DerivedSeries(
        S=s_real,
        D=d_full,
        E=e_full,
        R=pad(r, 1),
        V=v,
        E10=pad(e10_c, window),
        Ebar=pad(ebar_c, 1),
        Ebar10=pad(ebar10_c, window),
        cape=pad(cape, window),
        tr_cape=pad(tr_cape, window),
        modified_ratio=pad(modified, window),
        window=window,
        base_index=window,
    )


def _cell(v):
    return "" if np.isnan(v) else repr(float(v))


def derived_to_csv(derived, years):
    """Serialize a DerivedSeries (plus the year labels) to CSV text.

    Floats are written as shortest round-trip representations so the
    file parses back bit for bit.
    """
    years = np.asarray(years)
    if years.shape[0] != derived.S.shape[0]:
        raise ValueError("years length must match series length")
    cols = [derived.S, derived.D, derived.E, derived.R, derived.V,
            derived.E10, derived.Ebar, derived.Ebar10, derived.cape,
            derived.tr_cape, derived.modified_ratio]
    lines = [",".join(DERIVED_HEADER)]
    for i in range(years.shape[0]):
        lines.append(",".join([str(int(years[i]))] + [_cell(c[i]) for c in cols]))
    return "\n".join(lines) + "\n"


def parse_derived_csv(content):
    """Read a CSV produced by derived_to_csv.

    Returns (years, DerivedSeries). window/base_index are recovered as
    the first index where cape is defined.
    """
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    reader = csv.reader(io.StringIO(content))
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows or rows[0] != DERIVED_HEADER:
        raise MalformedRow(f"bad header, expected {DERIVED_HEADER!r}")
    body = rows[1:]
    if not body:
        raise TooFewRows("no data rows")
    years = []
    cols = [[] for _ in range(11)]
    for i, row in enumerate(body):
        if len(row) != 12:
            raise MalformedRow(f"row {i + 2}: expected 12 fields")
        try:
            years.append(int(row[0]))
        except ValueError:
            raise MalformedRow(f"row {i + 2}: non-integer year") from None
        for j in range(11):
            cell = row[j + 1].strip()
            cols[j].append(float(cell) if cell else np.nan)
    arrays = [np.asarray(c) for c in cols]
    cape = arrays[8]
    defined = np.flatnonzero(~np.isnan(cape))
    base = int(defined[0]) if defined.size else len(years)
    series = DerivedSeries(
        S=arrays[0], D=arrays[1], E=arrays[2], R=arrays[3], V=arrays[4],
        E10=arrays[5], Ebar=arrays[6], Ebar10=arrays[7], cape=arrays[8],
        tr_cape=arrays[9], modified_ratio=arrays[10],
        window=base, base_index=base,
    )
    return np.asarray(years, dtype=int), series


def load_bundled_csv():
    """Return the packaged annual history as raw CSV bytes."""
    from importlib.resources import files

    return (files("valuation_lab") / "data" /
            "shiller_annual_1871_2020.csv").read_bytes()
