"""Continuous-time factor models: OU and Levy-driven log-mispricing factor,
wealth and portfolio SDE integration, ergodicity diagnostics, and numerical
optimal investment/consumption via HJB reductions.

The state is a factor H with dH = f(H)dt + noise, a log-fundamental F
following Brownian motion with drift g and volatility rho, and wealth
V = exp(c*t + F + H).  Portfolio shares blend V with a risk-free leg.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .errors import (
    GridUnstable,
    LengthMismatch,
    NoConvergence,
    NonPositiveTheta,
    NonPositiveWealth,
    StepTooLarge,
)

_MAX_STEPS = 10 ** 8


# ---------------------------------------------------------------------------
# drift and noise specifications


@dataclass
class LinearOU:
    """Mean-reverting linear drift f(h) = -beta_rev * (h - h_inf)."""

    beta_rev: float
    h_inf: float

    def __post_init__(self):
        if not self.beta_rev > 0.0:
            raise ValueError("beta_rev must be positive")

    def value(self, h):
        return -self.beta_rev * (h - self.h_inf)

    @property
    def lipschitz(self) -> float:
        return self.beta_rev


@dataclass
class CustomDrift:
    """User-supplied drift with a declared global Lipschitz bound."""

    fn: Callable
    lipschitz_bound: float

    def __post_init__(self):
        if self.lipschitz_bound < 0.0:
            raise ValueError("lipschitz_bound must be nonnegative")

    def value(self, h):
        return self.fn(h)

    @property
    def lipschitz(self) -> float:
        return self.lipschitz_bound


@dataclass
class JumpDist:
    """Jump-size distribution with finite second moment.

    kinds: "constant" (always a), "normal" (mean a, sd b),
    "uniform" (on [a, b]), "symmetric" (+-a with equal probability).
    """

    kind: str
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "normal", "uniform", "symmetric"):
            raise ValueError("unknown jump distribution kind %r" % (self.kind,))
        if self.kind == "normal" and self.b < 0.0:
            raise ValueError("normal jump sd must be nonnegative")
        if self.kind == "uniform" and not self.a < self.b:
            raise ValueError("uniform jump needs a < b")

    def mean(self) -> float:
        if self.kind == "constant":
            return self.a
        if self.kind == "normal":
            return self.a
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        return 0.0

    def second_moment(self) -> float:
        if self.kind == "constant":
            return self.a ** 2
        if self.kind == "normal":
            return self.a ** 2 + self.b ** 2
        if self.kind == "uniform":
            return (self.a ** 2 + self.a * self.b + self.b ** 2) / 3.0
        return self.a ** 2

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.a)
        if self.kind == "normal":
            return self.a + self.b * rng.standard_normal(n)
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, n)
        return self.a * (2.0 * rng.integers(0, 2, n) - 1.0)


@dataclass
class LevySpec:
    """Levy noise: linear drift b, Gaussian part sigma, and a finite
    compound-Poisson jump mixture [(rate per year, JumpDist), ...].

    With zero_mean_enforced the drift is overwritten so increments have
    mean zero: b = -sum(rate * E[jump]).
    """

    b: float
    sigma: float
    jumps: List[Tuple[float, JumpDist]] = field(default_factory=list)
    zero_mean_enforced: bool = True

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        for rate, _dist in self.jumps:
            if rate < 0.0:
                raise ValueError("jump rate must be nonnegative")
        if self.zero_mean_enforced:
            self.b = -sum(rate * dist.mean() for rate, dist in self.jumps)

    def jump_intensity(self) -> float:
        # sum of rate * E[J^2], the jump part of the quadratic variation
        return sum(rate * dist.second_moment() for rate, dist in self.jumps)


@dataclass
class CtModelSpec:
    """Full continuous-time model: factor drift and volatility, fundamental
    drift g and volatility rho, implied dividend yield c, risk-free rate r
    (constant or a function of time), and optional Levy factor noise."""

    drift: Union[LinearOU, CustomDrift]
    sigma: float
    g: float
    rho: float
    c: float
    r: Union[float, Callable]
    levy: Optional[LevySpec] = None

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if self.rho < 0.0:
            raise ValueError("rho must be nonnegative")

    def rate(self, t: float = 0.0) -> float:
        if callable(self.r):
            return float(self.r(t))
        return float(self.r)

    def factor_noise_intensity(self) -> float:
        """Quadratic-variation intensity of the factor noise per year."""
        if self.levy is not None:
            return self.levy.sigma ** 2 + self.levy.jump_intensity()
        return self.sigma ** 2

    def quadratic_intensity(self) -> float:
        """Quadratic-variation intensity of ln V per year (factor plus
        fundamental)."""
        return self.factor_noise_intensity() + self.rho ** 2

    def stationary_moments(self) -> Optional[dict]:
        """Stationary mean/variance when the drift is linear mean-reverting."""
        if not isinstance(self.drift, LinearOU):
            return None
        var = self.factor_noise_intensity() / (2.0 * self.drift.beta_rev)
        return {"mean": self.drift.h_inf, "variance": var}


def ct_spec_to_json(spec: CtModelSpec) -> dict:
    if not isinstance(spec.drift, LinearOU):
        raise ValueError("only linear mean-reverting drift is serializable")
    if callable(spec.r):
        raise ValueError("only constant risk-free rates are serializable")
    out = {
        "drift": {"kind": "linear_ou", "beta_rev": spec.drift.beta_rev,
                  "h_inf": spec.drift.h_inf},
        "sigma": spec.sigma, "g": spec.g, "rho": spec.rho,
        "c": spec.c, "r": spec.r,
    }
    if spec.levy is not None:
        out["levy"] = {
            "b": spec.levy.b, "sigma": spec.levy.sigma,
            "zero_mean_enforced": spec.levy.zero_mean_enforced,
            "jumps": [{"rate": rate, "dist": {"kind": d.kind, "a": d.a, "b": d.b}}
                      for rate, d in spec.levy.jumps],
        }
    return out


def ct_spec_from_json(data: dict) -> CtModelSpec:
    drift_data = data["drift"]
    if drift_data.get("kind") != "linear_ou":
        raise ValueError("unknown drift kind %r" % (drift_data.get("kind"),))
    drift = LinearOU(beta_rev=float(drift_data["beta_rev"]),
                     h_inf=float(drift_data["h_inf"]))
    levy = None
    if data.get("levy") is not None:
        ld = data["levy"]
        jumps = [(float(j["rate"]),
                  JumpDist(kind=j["dist"]["kind"], a=float(j["dist"].get("a", 0.0)),
                           b=float(j["dist"].get("b", 0.0))))
                 for j in ld.get("jumps", [])]
        levy = LevySpec(b=float(ld.get("b", 0.0)), sigma=float(ld["sigma"]),
                        jumps=jumps,
                        zero_mean_enforced=bool(ld.get("zero_mean_enforced", True)))
    return CtModelSpec(drift=drift, sigma=float(data["sigma"]), g=float(data["g"]),
                       rho=float(data["rho"]), c=float(data["c"]),
                       r=float(data["r"]), levy=levy)


# ---------------------------------------------------------------------------
# path simulation


def _n_steps(dt: float, horizon: float) -> int:
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if horizon / dt > _MAX_STEPS:
        raise ValueError("horizon/dt exceeds %d steps" % _MAX_STEPS)
    n = int(round(horizon / dt))
    return max(n, 1)

def _check_step(spec: CtModelSpec, dt: float) -> None:
    if dt * spec.drift.lipschitz > 0.5:
        raise StepTooLarge("dt * drift Lipschitz bound = %g exceeds 0.5"
                           % (dt * spec.drift.lipschitz,))


def simulate_factor(spec: CtModelSpec, h0: float, dt: float, horizon: float,
                    seed) -> np.ndarray:
    """Euler path of dH = f(H)dt + sigma dW on a fixed grid.

    Returns an array of length n+1 with H(0) = h0.
    """
    n = _n_steps(dt, horizon)
    _check_step(spec, dt)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    shocks = (spec.sigma * math.sqrt(dt)) * z
    noise = shocks.tolist()
    fv = spec.drift.value
    out = np.empty(n + 1)
    h = float(h0)
    out[0] = h
    for k in range(n):
        h = h + fv(h) * dt + noise[k]
        out[k + 1] = h
    return out


def _bucketed_jumps(levy: LevySpec, dt: float, n: int, horizon: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Per-step jump totals: exponential clocks laid over [0, horizon],
    each jump attributed to the Euler step containing it."""
    totals = np.full(n, levy.b * dt)
    for rate, dist in levy.jumps:
        if rate == 0.0:
            continue
        times = []
        acc = 0.0
        block = max(16, int(rate * horizon + 6.0 * math.sqrt(rate * horizon) + 10))
        while acc < horizon:
            draws = rng.exponential(1.0 / rate, block)
            for d in draws.tolist():
                acc += d
                if acc >= horizon:
                    break
                times.append(acc)
        if not times:
            continue
        idx = np.minimum((np.asarray(times) / dt).astype(np.int64), n - 1)
        sizes = dist.sample(rng, len(times))
        np.add.at(totals, idx, sizes)
    return totals


def simulate_levy_factor(spec: CtModelSpec, h0: float, dt: float, horizon: float,
                         seed) -> np.ndarray:
    """Euler path of dH = f(H)dt + dL with L a Levy process given by
    spec.levy.  Gaussian increments are drawn first, so a spec with zero
    jump rates reproduces simulate_factor exactly under the same seed."""
    if spec.levy is None:
        raise ValueError("spec has no Levy noise component")
    n = _n_steps(dt, horizon)
    _check_step(spec, dt)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    shocks = (spec.levy.sigma * math.sqrt(dt)) * z
    extra = _bucketed_jumps(spec.levy, dt, n, horizon, rng)
    noise = shocks.tolist()
    el = extra.tolist()
    fv = spec.drift.value
    out = np.empty(n + 1)
    h = float(h0)
    out[0] = h
    for k in range(n):
        h = h + fv(h) * dt + noise[k] + el[k]
        out[k + 1] = h
    return out


def simulate_fundamental(spec: CtModelSpec, dt: float, horizon: float, seed,
                         f0: float = 0.0) -> np.ndarray:
    """Log-fundamental path: Brownian motion with drift g and volatility rho."""
    n = _n_steps(dt, horizon)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    incr = spec.g * dt + (spec.rho * math.sqrt(dt)) * z
    out = np.empty(n + 1)
    out[0] = f0
    np.cumsum(incr, out=out[1:])
    out[1:] += f0
    return out


def wealth_from_factor(h: np.ndarray, f: np.ndarray, c: float,
                       dt: float) -> np.ndarray:
    """Wealth V(t) = exp(c*t + F(t) + H(t)) on the shared grid."""
    h = np.asarray(h, dtype=float)
    f = np.asarray(f, dtype=float)
    if h.shape != f.shape:
        raise LengthMismatch("factor and fundamental paths differ in length")
    t = np.arange(h.shape[0]) * dt
    return np.exp(c * t + f + h)


# ---------------------------------------------------------------------------
# portfolios


@dataclass
class CtPortfolioPath:
    """Wealth path under a portfolio rule; ruined_at is the first index with
    nonpositive wealth (wealth is NaN from there on), or None."""

    v: np.ndarray
    pi: np.ndarray
    ruined_at: Optional[int] = None


def integrate_portfolio(h: np.ndarray, f: np.ndarray, spec: CtModelSpec,
                        pi_rule: Callable, dt: float, v0: float = 1.0,
                        consumption_rule: Optional[Callable] = None,
                        pi_bound: float = 10.0) -> CtPortfolioPath:
    """Euler integration of the blended-wealth dynamics.

    Per step: dV/V = pi*(c dt + dF + dH + (q/2) dt) + (1 - pi)*r dt, with
    q the quadratic-variation intensity of ln V; consumption, when given
    as a rate C(t, v, h), is subtracted as C dt.  pi_rule(t, h) must stay
    within pi_bound in absolute value.
    """
    h = np.asarray(h, dtype=float)
    f = np.asarray(f, dtype=float)
    if h.shape != f.shape:
        raise LengthMismatch("factor and fundamental paths differ in length")
    if v0 <= 0.0:
        raise NonPositiveWealth("initial wealth must be positive")
    n = h.shape[0] - 1
    t = np.arange(n + 1) * dt
    pis = np.array([float(pi_rule(t[k], h[k])) for k in range(n + 1)])
    if np.max(np.abs(pis)) > pi_bound:
        raise ValueError("portfolio rule exceeds declared bound %g" % pi_bound)
    q = spec.quadratic_intensity()
    dh = np.diff(h)
    df = np.diff(f)
    risky = pis[:n] * (spec.c * dt + df + dh + 0.5 * q * dt)
    v = np.empty(n + 1)
    v[0] = float(v0)
    ruined_at = None
    for k in range(n):
        growth = v[k] * (risky[k] + (1.0 - pis[k]) * spec.rate(t[k]) * dt)
        cons = 0.0
        if consumption_rule is not None:
            cons = float(consumption_rule(t[k], v[k], h[k])) * dt
            if cons < 0.0:
                raise ValueError("consumption rate must be nonnegative")
        v[k + 1] = v[k] + growth - cons
        if v[k + 1] <= 0.0:
            ruined_at = k + 1
            v[k + 1:] = np.nan
            break
    return CtPortfolioPath(v=v, pi=pis, ruined_at=ruined_at)


def optimal_pi(h, spec: CtModelSpec, gamma: float, t: float = 0.0):
    """Closed-form optimal share 1/(2*gamma) + (g + c + f(h) - r)/(gamma*q).

    For gamma = 1 this is the bounded-portfolio log-utility optimum.
    Accepts scalar or array h.
    """
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    q = spec.quadratic_intensity()
    excess = spec.g + spec.c + spec.drift.value(h) - spec.rate(t)
    return 1.0 / (2.0 * gamma) + excess / (gamma * q)


def log_utility_grid(spec: CtModelSpec, h0: float, horizon: float, dt: float,
                     n_paths: int, offsets, seed) -> dict:
    """Mean terminal log-wealth for portfolio rules pi_*(h) + offset, using
    common random draws across offsets.  Integrates d ln V directly, which
    keeps wealth positive for any leverage."""
    n = _n_steps(dt, horizon)
    _check_step(spec, dt)
    rng = np.random.default_rng(seed)
    q = spec.quadratic_intensity()
    sig_dt = spec.sigma * math.sqrt(dt)
    rho_dt = spec.rho * math.sqrt(dt)
    offsets = [float(o) for o in offsets]
    h = np.full(n_paths, float(h0))
    lnv = {off: np.zeros(n_paths) for off in offsets}
    for k in range(n):
        tk = k * dt
        r_k = spec.rate(tk)
        fh = spec.drift.value(h)
        dh = fh * dt + sig_dt * rng.standard_normal(n_paths)
        df = spec.g * dt + rho_dt * rng.standard_normal(n_paths)
        base = optimal_pi(h, spec, 1.0, tk)
        carry = spec.c * dt + dh + df
        for off in offsets:
            pi = base + off
            lnv[off] += pi * carry + (1.0 - pi) * r_k * dt \
                + (0.5 * q * dt) * (pi - pi * pi)
        h = h + dh
    return {off: float(np.mean(lnv[off])) for off in offsets}


# ---------------------------------------------------------------------------
# HJB reductions


@dataclass
class ThetaSolution:
    """Value-scaling function theta on an h grid.

    kind "terminal_pde": values has shape (n_t+1, n_h) over t_grid x h_grid,
    with values[-1] the terminal condition.  kind "consumption_ode": values
    is the 1-D stationary solution.  residual_norm is the max absolute
    residual of the discrete equations on the interior grid.
    """

    kind: str
    h_grid: np.ndarray
    values: np.ndarray
    gamma: float
    residual_norm: float
    t_grid: Optional[np.ndarray] = None
    discount_rate: Optional[float] = None

    def theta_at(self, h):
        """Interpolated theta; for the PDE kind, the t = 0 slice."""
        vals = self.values[0] if self.values.ndim == 2 else self.values
        return np.interp(h, self.h_grid, vals)

    def to_csv(self) -> str:
        lines = []
        if self.values.ndim == 1:
            lines.append("h,theta")
            for hx, th in zip(self.h_grid, self.values):
                lines.append("%s,%s" % (repr(float(hx)), repr(float(th))))
        else:
            lines.append("t,h,theta")
            for i, tx in enumerate(self.t_grid):
                for j, hx in enumerate(self.h_grid):
                    lines.append("%s,%s,%s" % (repr(float(tx)), repr(float(hx)),
                                               repr(float(self.values[i, j]))))
        return "\n".join(lines) + "\n"


def _source_bracket(h, spec: CtModelSpec, gamma: float, t: float = 0.0):
    """(1 - gamma) * (r - pi_*(h)^2 / (2 gamma q)), the theta source term."""
    q = spec.quadratic_intensity()
    pi = optimal_pi(h, spec, gamma, t)
    return (1.0 - gamma) * (spec.rate(t) - pi * pi / (2.0 * gamma * q))


def _thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
            rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal solve; lower/upper have length n-1."""
    n = diag.shape[0]
    c = np.empty(n - 1)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n - 1):
        denom = diag[i] - lower[i - 1] * c[i - 1]
        c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom
    denom = diag[n - 1] - lower[n - 2] * c[n - 2]
    d[n - 1] = (rhs[n - 1] - lower[n - 2] * d[n - 2]) / denom
    x = np.empty(n)
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _tri_mul(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
             x: np.ndarray) -> np.ndarray:
    out = diag * x
    out[:-1] += upper * x[1:]
    out[1:] += lower * x[:-1]
    return out


def _space_operator(spec: CtModelSpec, hgrid: np.ndarray):
    """Tridiagonal f(h) d/dh + sigma^2/2 d2/dh2 with zero-second-derivative
    boundary rows (one-sided first derivative at the edges)."""
    n = hgrid.shape[0]
    dh = hgrid[1] - hgrid[0]
    fvals = np.asarray(spec.drift.value(hgrid), dtype=float)
    half_s2 = 0.5 * spec.sigma ** 2
    lower = np.zeros(n - 1)
    diag = np.zeros(n)
    upper = np.zeros(n - 1)
    # interior central differences
    lower[:-1] = half_s2 / dh ** 2 - fvals[1:-1] / (2.0 * dh)
    diag[1:-1] = -2.0 * half_s2 / dh ** 2
    upper[1:] = half_s2 / dh ** 2 + fvals[1:-1] / (2.0 * dh)
    # boundaries: theta'' = 0, one-sided theta'
    diag[0] = -fvals[0] / dh
    upper[0] = fvals[0] / dh
    diag[-1] = fvals[-1] / dh
    lower[-1] = -fvals[-1] / dh
    return lower, diag, upper, fvals, dh


def solve_terminal_pde(spec: CtModelSpec, gamma: float, h_min: float,
                       h_max: float, n_h: int, horizon: float,
                       n_t: int) -> ThetaSolution:
    """Crank-Nicolson solve, backward from theta(T, .) = 1, of

        source(h)*theta + dtheta/dt + f(h) dtheta/dh + sigma^2/2 d2theta/dh2 = 0

    with source(h) = (1-gamma)(r - pi_*(h)^2/(2 gamma q)).  gamma = 1 returns
    theta identically 1 without solving.
    """
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    if spec.levy is not None:
        raise ValueError("terminal PDE supports Brownian factor noise only")
    if not (h_min < h_max) or n_h < 5 or n_t < 1:
        raise ValueError("bad grid specification")
    if isinstance(spec.drift, LinearOU) and not (h_min < spec.drift.h_inf < h_max):
        raise ValueError("grid must contain the long-run level in its interior")
    hgrid = np.linspace(h_min, h_max, n_h)
    tgrid = np.linspace(0.0, horizon, n_t + 1)
    if gamma == 1.0:
        return ThetaSolution(kind="terminal_pde", h_grid=hgrid,
                             values=np.ones((n_t + 1, n_h)), gamma=1.0,
                             residual_norm=0.0, t_grid=tgrid)
    dt = tgrid[1] - tgrid[0]
    lower, diag, upper, fvals, dh = _space_operator(spec, hgrid)
    if spec.sigma == 0.0 and np.max(np.abs(fvals)) * dt / dh > 1.0:
        raise GridUnstable("advective step too large for sigma = 0 grid")
    kappas = [np.asarray(_source_bracket(hgrid, spec, gamma, t), dtype=float)
              * np.ones(n_h) for t in tgrid]
    values = np.empty((n_t + 1, n_h))
    values[n_t] = 1.0
    identity = np.ones(n_h)
    for m in range(n_t - 1, -1, -1):
        diag_new = diag + kappas[m]
        diag_old = diag + kappas[m + 1]
        rhs = _tri_mul(0.5 * dt * lower, identity + 0.5 * dt * diag_old,
                       0.5 * dt * upper, values[m + 1])
        values[m] = _thomas(-0.5 * dt * lower, identity - 0.5 * dt * diag_new,
                            -0.5 * dt * upper, rhs)
    if np.min(values) <= 0.0:
        raise NonPositiveTheta("theta lost positivity; refine the time grid")
    resid = 0.0
    for m in range(n_t):
        diag_new = diag + kappas[m]
        diag_old = diag + kappas[m + 1]
        a_new = _tri_mul(lower, diag_new, upper, values[m])
        a_old = _tri_mul(lower, diag_old, upper, values[m + 1])
        local = (values[m + 1] - values[m]) / dt + 0.5 * (a_new + a_old)
        resid = max(resid, float(np.max(np.abs(local[1:-1]))))
    return ThetaSolution(kind="terminal_pde", h_grid=hgrid, values=values,
                         gamma=gamma, residual_norm=resid, t_grid=tgrid)


def solve_consumption_ode(spec: CtModelSpec, gamma: float, discount_rate: float,
                          h_min: float, h_max: float, n_h: int,
                          tol: float = 1e-10, max_iter: int = 100) -> ThetaSolution:
    """Damped-Newton solve of the stationary consumption equation

        0 = -delta*theta + f theta' + sigma^2/2 theta''
            + source(h)*theta + gamma*theta^(1 - 1/gamma)

    from the constant guess solving the equation at the long-run level.
    gamma = 1 returns theta = 1/delta (consumption C = delta * v).
    """
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    if not discount_rate > 0.0:
        raise ValueError("discount_rate must be positive")
    if spec.levy is not None:
        raise ValueError("consumption ODE supports Brownian factor noise only")
    if not (h_min < h_max) or n_h < 5:
        raise ValueError("bad grid specification")
    if isinstance(spec.drift, LinearOU) and not (h_min < spec.drift.h_inf < h_max):
        raise ValueError("grid must contain the long-run level in its interior")
    hgrid = np.linspace(h_min, h_max, n_h)
    if gamma == 1.0:
        return ThetaSolution(kind="consumption_ode", h_grid=hgrid,
                             values=np.full(n_h, 1.0 / discount_rate),
                             gamma=1.0, residual_norm=0.0,
                             discount_rate=discount_rate)
    lower, diag, upper, _fvals, _dh = _space_operator(spec, hgrid)
    source = np.asarray(_source_bracket(hgrid, spec, gamma), dtype=float) \
        * np.ones(n_h)
    diag_full = diag + source - discount_rate
    h_ref = spec.drift.h_inf if isinstance(spec.drift, LinearOU) \
        else 0.5 * (h_min + h_max)
    base = discount_rate - float(_source_bracket(h_ref, spec, gamma))
    if base <= 0.0:
        raise NoConvergence(
            "no positive constant solution at the reference level: "
            "discount_rate must exceed the source bracket there")
    theta = np.full(n_h, (gamma / base) ** gamma)
    expo = 1.0 - 1.0 / gamma

    def residual(th):
        return _tri_mul(lower, diag_full, upper, th) + gamma * th ** expo

    g_old = residual(theta)
    norm_old = float(np.max(np.abs(g_old)))
    for _it in range(max_iter):
        if norm_old < tol:
            break
        jac_diag = diag_full + (gamma - 1.0) * theta ** (-1.0 / gamma)
        step = _thomas(lower, jac_diag, upper, -g_old)
        lam = 1.0
        for _half in range(60):
            cand = theta + lam * step
            if np.min(cand) > 0.0:
                g_new = residual(cand)
                norm_new = float(np.max(np.abs(g_new)))
                if norm_new < norm_old or norm_new < tol:
                    break
            lam *= 0.5
        else:
            raise NoConvergence("damped Newton failed to find a descent step")
        theta, g_old, norm_old = cand, g_new, norm_new
    if norm_old >= tol:
        raise NoConvergence("Newton iteration budget exhausted at residual %g"
                            % norm_old)
    if np.min(theta) <= 0.0:
        raise NonPositiveTheta("theta lost positivity")
    interior = float(np.max(np.abs(g_old[1:-1])))
    return ThetaSolution(kind="consumption_ode", h_grid=hgrid, values=theta,
                         gamma=gamma, residual_norm=interior,
                         discount_rate=discount_rate)


def consumption_rule(solution: ThetaSolution) -> Callable:
    """Feedback consumption C(v, h) = v * theta(h)^(-1/gamma)."""
    if solution.kind != "consumption_ode":
        raise ValueError("consumption rule requires a consumption ODE solution")
    gamma = solution.gamma
    hg = solution.h_grid
    th = solution.values

    def rule(v, h):
        return v * np.interp(h, hg, th) ** (-1.0 / gamma)

    return rule


# ---------------------------------------------------------------------------
# ergodicity diagnostics


def _ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    a = np.sort(a)
    b = np.sort(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.shape[0]
    fb = np.searchsorted(b, grid, side="right") / b.shape[0]
    return float(np.max(np.abs(fa - fb)))


def _batch_terminal(spec: CtModelSpec, h0: float, dt: float, n_steps: int,
                    n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """Terminal factor values for n_paths independent Euler paths."""
    h = np.full(n_paths, float(h0))
    sig = (spec.levy.sigma if spec.levy is not None else spec.sigma) \
        * math.sqrt(dt)
    drift_shift = spec.levy.b * dt if spec.levy is not None else 0.0
    jumps = spec.levy.jumps if spec.levy is not None else []
    fv = spec.drift.value
    for _k in range(n_steps):
        h = h + fv(h) * dt + sig * rng.standard_normal(n_paths) + drift_shift
        for rate, dist in jumps:
            if rate == 0.0:
                continue
            counts = rng.poisson(rate * dt, n_paths)
            top = int(counts.max())
            for j in range(top):
                mask = counts > j
                h[mask] += dist.sample(rng, int(mask.sum()))
    return h


def ergodicity_check_ct(spec: CtModelSpec, h0_a: float, h0_b: float,
                        t_max: float, n_paths: int, seed,
                        dt: float = 0.01) -> dict:
    """Two-start mixing report: terminal-sample KS distance, terminal moments
    per start, the H(t)/t size, and the stationary law when the drift is
    linear.  A noiseless spec is handled analytically as two deterministic
    paths whose gap should shrink exponentially."""
    n = _n_steps(dt, t_max)
    _check_step(spec, dt)
    noiseless = spec.factor_noise_intensity() == 0.0 and (
        spec.levy is None or spec.levy.b == 0.0)
    report = {"t_max": float(t_max), "n_paths": int(n_paths),
              "deterministic": bool(noiseless)}
    stat = spec.stationary_moments()
    report["stationary_mean"] = None if stat is None else stat["mean"]
    report["stationary_var"] = None if stat is None else stat["variance"]
    if noiseless:
        ha, hb = float(h0_a), float(h0_b)
        fv = spec.drift.value
        for _k in range(n):
            ha = ha + fv(ha) * dt
            hb = hb + fv(hb) * dt
        gap = abs(ha - hb)
        report.update({
            "mean_a": ha, "mean_b": hb, "var_a": 0.0, "var_b": 0.0,
            "gap": gap,
            "gap_initial": abs(float(h0_a) - float(h0_b)),
            "ks_distance": 0.0 if gap < 1e-12 else 1.0,
            "mean_abs_h_over_t": max(abs(ha), abs(hb)) / t_max,
            "max_abs_h_over_t": max(abs(ha), abs(hb)) / t_max,
        })
        return report
    children = np.random.SeedSequence(seed).spawn(2)
    term_a = _batch_terminal(spec, h0_a, dt, n, n_paths,
                             np.random.default_rng(children[0]))
    term_b = _batch_terminal(spec, h0_b, dt, n, n_paths,
                             np.random.default_rng(children[1]))
    both = np.concatenate([term_a, term_b])
    report.update({
        "mean_a": float(np.mean(term_a)), "var_a": float(np.var(term_a, ddof=1)),
        "mean_b": float(np.mean(term_b)), "var_b": float(np.var(term_b, ddof=1)),
        "ks_distance": _ks_two_sample(term_a, term_b),
        "mean_abs_h_over_t": float(np.mean(np.abs(both))) / t_max,
        "max_abs_h_over_t": float(np.max(np.abs(both))) / t_max,
    })
    return report


# ---------------------------------------------------------------------------
# export


def path_to_csv(t: np.ndarray, h: np.ndarray, f: np.ndarray, v: np.ndarray,
                pi: np.ndarray) -> str:
    """CSV dump of a simulated path bundle; NaN cells are left empty."""
    arrays = [np.asarray(x, dtype=float) for x in (t, h, f, v, pi)]
    if len({a.shape[0] for a in arrays}) != 1:
        raise LengthMismatch("path columns differ in length")
    lines = ["t,H,F,V,pi"]
    for row in zip(*arrays):
        lines.append(",".join("" if math.isnan(x) else repr(float(x))
                              for x in row))
    return "\n".join(lines) + "\n"


def parse_path_csv(text: str):
    """Round-trip parser for path_to_csv output; returns the five columns."""
    lines = [ln for ln in text.strip().split("\n") if ln != ""]
    if not lines or lines[0] != "t,H,F,V,pi":
        raise ValueError("bad path CSV header")
    cols = [[], [], [], [], []]
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 5:
            raise ValueError("bad path CSV row %r" % ln)
        for c, cell in zip(cols, cells):
            c.append(float("nan") if cell == "" else float(cell))
    return tuple(np.asarray(c) for c in cols)


def parse_theta_csv(text: str):
    """Round-trip parser for ThetaSolution.to_csv output.

    Returns (h, theta) for the stationary kind and (t, h, theta) flat
    columns for the terminal kind.
    """
    lines = [ln for ln in text.strip().split("\n") if ln != ""]
    if not lines:
        raise ValueError("empty theta CSV")
    if lines[0] == "h,theta":
        width = 2
    elif lines[0] == "t,h,theta":
        width = 3
    else:
        raise ValueError("bad theta CSV header")
    cols = [[] for _ in range(width)]
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != width:
            raise ValueError("bad theta CSV row %r" % ln)
        for c, cell in zip(cols, cells):
            c.append(float(cell))
    return tuple(np.asarray(c) for c in cols)
