"""Monte Carlo ruin engine for constant real withdrawals and the
discrete portfolio rule.

Each simulation draws an AR(1) valuation path and, independently, one
contiguous block of historical growth (and risk-free rates, for the
portfolio engine: the same window selects both). Per-simulation seeds
are a pure function of (master_seed, horizon index, simulation index),
so results do not depend on scheduling and any chunk of simulations
can run on any thread.

Set VALUATION_LAB_THREADS to parallelize across simulations; counts
are accumulated by commutative integer addition, so the surface is
identical for any thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DiscreteModelSpec, _ar1_recursion
from .errors import WindowTooLarge

THREADS_ENV = "VALUATION_LAB_THREADS"
SURFACE_HEADER = "rate,horizon,ruin_prob,n_sims"


@dataclass
class RuinConfig:
    """Inputs for the withdrawal-rate ruin surface."""

    model: DiscreteModelSpec
    b0: float
    horizons: list
    withdrawal_grid: list
    n_sims: int
    master_seed: int
    growth_history: np.ndarray

    def __post_init__(self):
        if self.n_sims < 1:
            raise ValueError("n_sims must be at least 1")
        self.growth_history = np.asarray(self.growth_history, dtype=float)
        limit = self.growth_history.shape[0] - 1
        for t in self.horizons:
            if t < 1:
                raise ValueError("horizons must be positive")
            if t > limit:
                raise WindowTooLarge(
                    f"horizon {t} exceeds growth history limit {limit}")


@dataclass
class RuinSurface:
    """Ruin probability per (withdrawal rate, horizon) cell."""

    entries: dict
    n_sims: int
    config: RuinConfig = None

    def to_csv(self):
        lines = [SURFACE_HEADER]
        for (rate, horizon), prob in self.entries.items():
            lines.append(f"{repr(float(rate))},{int(horizon)},"
                         f"{repr(float(prob))},{self.n_sims}")
        return "\n".join(lines) + "\n"


def parse_ruin_surface_csv(content):
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    lines = [ln for ln in content.splitlines() if ln.strip()]
    if not lines or lines[0] != SURFACE_HEADER:
        raise ValueError(f"expected header {SURFACE_HEADER!r}")
    entries = {}
    n_sims = 0
    for ln in lines[1:]:
        rate, horizon, prob, n = ln.split(",")
        entries[(float(rate), int(horizon))] = float(prob)
        n_sims = int(n)
    return RuinSurface(entries=entries, n_sims=n_sims)


@dataclass
class PortfolioRuleConfig:
    """Inputs for the CRRA portfolio-share ruin study.

    riskfree_series is either a constant real rate or a per-year
    series aligned with growth_history (jointly bootstrapped). rho
    defaults to the sample sd of the growth history. pi_mode "simple"
    uses share 1/(2g) + (g_growth + alpha - beta b - r)/(gamma q);
    "drift_consistent" replaces the numerator with the AR(1) increment
    drift (see portfolio_rule_share). clamp optionally bounds the
    share to an interval.
    """

    model: DiscreteModelSpec
    b0: float
    horizon: int
    withdrawal: float
    gamma_grid: list
    riskfree_series: object
    growth_history: np.ndarray
    n_sims: int
    master_seed: int
    rho: float = None
    pi_mode: str = "simple"
    clamp: tuple = None

    def __post_init__(self):
        self.growth_history = np.asarray(self.growth_history, dtype=float)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.horizon > self.growth_history.shape[0] - 1:
            raise WindowTooLarge("horizon exceeds growth history limit")
        for g in self.gamma_grid:
            if g <= 0.0:
                raise ValueError("risk aversions must be positive")
        if self.pi_mode not in ("simple", "drift_consistent"):
            raise ValueError(f"unknown pi_mode {self.pi_mode!r}")
        if self.rho is None:
            self.rho = float(np.std(self.growth_history, ddof=1))


def block_bootstrap_growth(history, t_years, rng):
    """One uniformly placed contiguous block of length t_years."""
    history = np.asarray(history, dtype=float)
    n = history.shape[0]
    if t_years > n:
        raise WindowTooLarge(f"block {t_years} exceeds history {n}")
    start = int(rng.integers(0, n - t_years + 1))
    return history[start:start + t_years]


def _thread_count():
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_chunked(n_sims, worker):
    """Split [0, n_sims) into fixed chunks and sum worker counts.

    Chunk boundaries do not depend on the thread count, and the
    per-chunk counts are summed with commutative addition, so the
    result is identical however the chunks are scheduled.
    """
    threads = _thread_count()
    chunk = max(256, -(-n_sims // max(threads, 1) // 4))
    spans = [(i, min(i + chunk, n_sims)) for i in range(0, n_sims, chunk)]
    if threads == 1 or len(spans) == 1:
        parts = [worker(a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: worker(*s), spans))
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total


def _sim_rng(master_seed, horizon_idx, sim_idx):
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(horizon_idx, sim_idx)))


def _draw_eps(model, t_years, rng):
    if model.noise == "gaussian":
        return model.sigma_eps * rng.standard_normal(t_years)
    return rng.choice(np.asarray(model.residual_pool, dtype=float),
                      size=t_years, replace=True)


def ruin_surface(config):
    """Ruin probabilities over the (withdrawal rate, horizon) grid.

    For each simulation one valuation path and one growth block are
    drawn; every withdrawal rate is applied to that same path, which
    makes the counts exactly nondecreasing in the rate.
    """
    model = config.model
    rates = np.asarray(config.withdrawal_grid, dtype=float)
    entries = {}
    for horizon_idx, t_years in enumerate(config.horizons):

        def worker(lo, hi, t_years=t_years, horizon_idx=horizon_idx):
            counts = np.zeros(rates.shape[0], dtype=np.int64)
            for i in range(lo, hi):
                rng = _sim_rng(config.master_seed, horizon_idx, i)
                eps = _draw_eps(model, t_years, rng)
                b = _ar1_recursion(config.b0, model.alpha, model.beta, eps)
                block = block_bootstrap_growth(
                    config.growth_history, t_years, rng)
                delta = np.diff(np.concatenate([[config.b0], b])) + model.c
                growth_factor = np.exp(delta + block)
                v = np.ones(rates.shape[0])
                alive = np.ones(rates.shape[0], dtype=bool)
                for t in range(t_years):
                    v = v * growth_factor[t] - rates
                    newly = alive & (v <= 0.0)
                    counts[newly] += 1
                    alive &= ~newly
                    if not alive.any():
                        break
                    v = np.where(alive, v, 0.0)
            return counts

        counts = _run_chunked(config.n_sims, worker)
        for j, rate in enumerate(rates):
            entries[(float(rate), int(t_years))] = counts[j] / config.n_sims
    return RuinSurface(entries=entries, n_sims=config.n_sims, config=config)


def portfolio_rule_share(b, cfg, t, g, gamma=None):
    """Stock share for the CRRA rule at valuation level b.

    Default mode evaluates 1/(2 gamma) + (g + alpha - beta b - r(t))
    / (gamma (sigma_eps^2 + rho^2)). The drift-consistent variant uses
    the AR(1) increment drift alpha + (beta - 1) b plus c in the
    numerator instead. r(t) is read from cfg.riskfree_series, which
    may be a scalar.
    """
    model = cfg.model
    if gamma is None:
        gamma = cfg.gamma_grid[0]
    r_series = cfg.riskfree_series
    r_t = float(r_series) if np.isscalar(r_series) else float(r_series[t])
    q = model.sigma_eps ** 2 + cfg.rho ** 2
    if cfg.pi_mode == "simple":
        excess = g + model.alpha - model.beta * b - r_t
    else:
        excess = g + model.c + model.alpha + (model.beta - 1.0) * b - r_t
    pi = 1.0 / (2.0 * gamma) + excess / (gamma * q)
    if cfg.clamp is not None:
        pi = min(max(pi, cfg.clamp[0]), cfg.clamp[1])
    return pi


def portfolio_ruin(cfg):
    """Ruin probability per risk aversion for the portfolio rule.

    Wealth blends the stock factor e^{R(t)} and risk-free factor
    e^{r(t)} in proportions (pi, 1 - pi), then the constant real
    withdrawal is subtracted. The share uses the valuation level at
    the start of each year and the mean of the growth history as g.
    """
    model = cfg.model
    gammas = np.asarray(cfg.gamma_grid, dtype=float)
    t_years = cfg.horizon
    g_bar = float(np.mean(cfg.growth_history))
    q = model.sigma_eps ** 2 + cfg.rho ** 2
    scalar_r = np.isscalar(cfg.riskfree_series)
    if not scalar_r:
        r_hist = np.asarray(cfg.riskfree_series, dtype=float)
        if r_hist.shape[0] != cfg.growth_history.shape[0]:
            raise ValueError("riskfree series must align with growth history")

    def worker(lo, hi):
        counts = np.zeros(gammas.shape[0], dtype=np.int64)
        for i in range(lo, hi):
            rng = _sim_rng(cfg.master_seed, 0, i)
            eps = _draw_eps(model, t_years, rng)
            b_path = _ar1_recursion(cfg.b0, model.alpha, model.beta, eps)
            n_hist = cfg.growth_history.shape[0]
            start = int(rng.integers(0, n_hist - t_years + 1))
            block = cfg.growth_history[start:start + t_years]
            r_block = (np.full(t_years, float(cfg.riskfree_series))
                       if scalar_r else r_hist[start:start + t_years])
            b_full = np.concatenate([[cfg.b0], b_path])
            delta = np.diff(b_full) + model.c
            stock_factor = np.exp(delta + block)
            free_factor = np.exp(r_block)
            v = np.ones(gammas.shape[0])
            alive = np.ones(gammas.shape[0], dtype=bool)
            for t in range(t_years):
                if cfg.pi_mode == "simple":
                    excess = g_bar + model.alpha - model.beta * b_full[t] \
                        - r_block[t]
                else:
                    excess = g_bar + model.c + model.alpha \
                        + (model.beta - 1.0) * b_full[t] - r_block[t]
                pi = 1.0 / (2.0 * gammas) + excess / (gammas * q)
                if cfg.clamp is not None:
                    pi = np.clip(pi, cfg.clamp[0], cfg.clamp[1])
                factor = pi * stock_factor[t] + (1.0 - pi) * free_factor[t]
                v = v * factor - cfg.withdrawal
                newly = alive & (v <= 0.0)
                counts[newly] += 1
                alive &= ~newly
                if not alive.any():
                    break
                v = np.where(alive, v, 0.0)
        return counts

    counts = _run_chunked(cfg.n_sims, worker)
    return {float(g): counts[j] / cfg.n_sims for j, g in enumerate(gammas)}


def riskfree_real(nominal_rates, cpi, window=10):
    """Deflate nominal short rates by trailing average log-inflation.

    nominal_rates and cpi are aligned per year (length n). Annual
    log-inflation ln(C(t)/C(t-1)) is averaged over the trailing
    window, so the real rate is defined from index window onward;
    returns (start_index, series) with series[j] the real rate at
    index start_index + j.
    """
    nominal_rates = np.asarray(nominal_rates, dtype=float)
    cpi = np.asarray(cpi, dtype=float)
    if nominal_rates.shape != cpi.shape:
        raise ValueError("nominal rates and cpi must be aligned")
    n = cpi.shape[0]
    if n < window + 1:
        raise WindowTooLarge("need window+1 observations")
    infl = np.log(cpi[1:] / cpi[:-1])
    trail = np.array([infl[k - window + 1:k + 1].mean()
                      for k in range(window - 1, infl.shape[0])])
    return window, nominal_rates[window:] - trail
