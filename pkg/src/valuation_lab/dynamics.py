"""Generalized discrete model: AR(1) valuation, implied dividend
yield, wealth with withdrawals, and numerical checks of the limit
theorems.

Model: the valuation state follows B(t) = alpha + beta B(t-1) + eps(t)
with beta in (0, 1). The implied dividend yield is
Delta(t) = B(t) - B(t-1) + c, fundamentals grow by G(t), and the log
total return decomposes as R(t) = Delta(t) + G(t). Wealth compounds
by e^{R(t)} and is reduced by the withdrawal process.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch

# chunk length for the vectorized AR recursion; keeps beta^-k finite
_AR_CHUNK = 512


@dataclass
class DiscreteModelSpec:
    """Parameters of the discrete valuation model.

    noise selects the innovation law: "gaussian" scales standard
    normals by sigma_eps, "empirical" resamples residual_pool with
    replacement. g_source declares how fundamental growth is produced
    ("constant" with rate g, or "historical_blocks" drawing contiguous
    blocks from growth_history).
    """

    alpha: float
    beta: float
    c: float
    sigma_eps: float
    noise: str = "gaussian"
    residual_pool: np.ndarray = None
    g_source: str = "constant"
    g: float = 0.0
    growth_history: np.ndarray = None

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.sigma_eps < 0.0:
            raise ValueError("sigma_eps must be nonnegative")
        if self.noise not in ("gaussian", "empirical"):
            raise ValueError(f"unknown noise kind {self.noise!r}")
        if self.noise == "empirical" and self.residual_pool is None:
            raise ValueError("empirical noise requires residual_pool")
        if self.g_source not in ("constant", "historical_blocks"):
            raise ValueError(f"unknown g_source kind {self.g_source!r}")
        if self.g_source == "historical_blocks" and self.growth_history is None:
            raise ValueError("historical_blocks requires growth_history")

    @property
    def long_run_mean(self):
        return self.alpha / (1.0 - self.beta)

    def to_json(self):
        out = {
            "alpha": self.alpha, "beta": self.beta, "c": self.c,
            "sigma_eps": self.sigma_eps, "noise": self.noise,
        }
        if self.noise == "empirical":
            out["noise"] = {"kind": "empirical",
                            "residuals": [float(v) for v in self.residual_pool]}
        if self.g_source == "constant":
            out["g_source"] = {"kind": "constant", "g": self.g}
        else:
            out["g_source"] = {"kind": "historical_blocks",
                               "series": [float(v) for v in self.growth_history]}
        return out

    @classmethod
    def from_json(cls, obj):
        noise = obj.get("noise", "gaussian")
        pool = None
        if isinstance(noise, dict):
            pool = np.asarray(noise.get("residuals", []), dtype=float)
            noise = noise["kind"]
        gsrc = obj.get("g_source", {"kind": "constant", "g": 0.0})
        if isinstance(gsrc, str):
            gsrc = {"kind": gsrc}
        hist = gsrc.get("series")
        return cls(
            alpha=float(obj["alpha"]), beta=float(obj["beta"]),
            c=float(obj["c"]), sigma_eps=float(obj["sigma_eps"]),
            noise=noise, residual_pool=pool,
            g_source=gsrc["kind"], g=float(gsrc.get("g", 0.0)),
            growth_history=None if hist is None else np.asarray(hist, dtype=float),
        )


@dataclass
class WithdrawalProcess:
    """Withdrawal rule applied to the wealth path.

    kind: "none", "constant_fraction" (rate w of current wealth),
    "constant_real" (amount w per year in units of initial wealth),
    "earnings_linked" (W(t) = 1 - e^{w - G(t)}), or "custom"
    (explicit per-year fractions).
    """

    kind: str = "none"
    rate: float = 0.0
    series: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("none", "constant_fraction", "constant_real",
                             "earnings_linked", "custom"):
            raise ValueError(f"unknown withdrawal kind {self.kind!r}")
        if self.kind == "constant_fraction" and not 0.0 < self.rate < 1.0:
            raise ValueError("constant fraction must lie in (0, 1)")
        if self.kind == "custom" and self.series is None:
            raise ValueError("custom withdrawal requires a series")


@dataclass
class SimulatedPath:
    """One realization of the model, t = 0..T for B and V, 1..T for
    the flow series. out_of_range_withdrawals counts years where the
    withdrawal fraction left (0, 1), which the earnings-linked rule
    permits (money added in bad years)."""

    B: np.ndarray
    Delta: np.ndarray
    G: np.ndarray
    R: np.ndarray
    V: np.ndarray
    ruined_at: int = None
    out_of_range_withdrawals: int = 0


def _draw_noise(spec, t_steps, rng):
    if spec.noise == "gaussian":
        return spec.sigma_eps * rng.standard_normal(t_steps)
    pool = np.asarray(spec.residual_pool, dtype=float)
    return rng.choice(pool, size=t_steps, replace=True)


def _ar1_recursion(b0, alpha, beta, eps):
    # blockwise closed form: within a block,
    # B[i] = beta^{i+1} carry + beta^i * cumsum((alpha + eps) / beta^j)
    t_steps = eps.shape[0]
    out = np.empty(t_steps)
    carry = b0
    drive = alpha + eps
    pos = 0
    while pos < t_steps:
        m = min(_AR_CHUNK, t_steps - pos)
        pows = beta ** np.arange(m)
        acc = np.cumsum(drive[pos:pos + m] / pows)
        out[pos:pos + m] = pows * (beta * carry + acc)
        carry = out[pos + m - 1]
        pos += m
    return out


def simulate_ar1(spec, b0, t_steps, seed):
    """Simulate the valuation AR(1); returns B of length t_steps + 1
    with B[0] = b0. Identical arguments give identical output."""
    if t_steps < 1:
        raise ValueError("need at least one step")
    rng = np.random.default_rng(seed)
    eps = _draw_noise(spec, t_steps, rng)
    b = np.empty(t_steps + 1)
    b[0] = b0
    b[1:] = _ar1_recursion(b0, spec.alpha, spec.beta, eps)
    return b


def path_from_components(b_series, g_series, c, withdrawal=None):
    """Assemble yield, returns and wealth from simulated components.

    b_series has length T+1 (includes the start), g_series length T
    (a leading extra entry is tolerated and dropped). Wealth starts at
    1. For the constant-real rule the amount w is subtracted after
    each year's growth; the first year with V(t) <= 0 sets ruined_at
    and the path stops there (later V entries are NaN).
    """
    b = np.asarray(b_series, dtype=float)
    g = np.asarray(g_series, dtype=float)
    if g.shape[0] == b.shape[0]:
        g = g[1:]
    elif g.shape[0] != b.shape[0] - 1:
        raise LengthMismatch(
            f"growth length {g.shape[0]} does not match {b.shape[0]} states")
    if withdrawal is None:
        withdrawal = WithdrawalProcess()
    t_steps = g.shape[0]
    delta = np.diff(b) + c
    r = delta + g
    v = np.empty(t_steps + 1)
    v[0] = 1.0
    ruined_at = None
    out_of_range = 0

    kind = withdrawal.kind
    if kind == "none":
        v[1:] = np.exp(np.cumsum(r))
    elif kind == "constant_fraction":
        v[1:] = np.exp(np.cumsum(r + np.log1p(-withdrawal.rate)))
    elif kind == "earnings_linked":
        # 1 - W(t) = e^{w - G(t)}, so the growth terms cancel and
        # ln V telescopes through Delta + w
        frac = 1.0 - np.exp(withdrawal.rate - g)
        out_of_range = int(np.sum((frac <= 0.0) | (frac >= 1.0)))
        v[1:] = np.exp(np.cumsum(delta + withdrawal.rate))
    elif kind == "constant_real":
        # ruin at V <= 0: an exhausted account cannot fund any future
        # positive withdrawal
        w = withdrawal.rate
        growth = np.exp(r)
        cur = 1.0
        for t in range(1, t_steps + 1):
            cur = cur * growth[t - 1] - w
            v[t] = cur
            if cur <= 0.0:
                ruined_at = t
                v[t + 1:] = np.nan
                break
    else:
        frac = np.asarray(withdrawal.series, dtype=float)
        if frac.shape[0] != t_steps:
            raise LengthMismatch("custom withdrawal series length mismatch")
        out_of_range = int(np.sum((frac <= 0.0) | (frac >= 1.0)))
        growth = np.exp(r)
        cur = 1.0
        for t in range(1, t_steps + 1):
            cur = cur * growth[t - 1] * (1.0 - frac[t - 1])
            v[t] = cur
            if cur <= 0.0:
                ruined_at = t
                v[t + 1:] = np.nan
                break

    return SimulatedPath(B=b, Delta=delta, G=g, R=r, V=v,
                         ruined_at=ruined_at,
                         out_of_range_withdrawals=out_of_range)


def check_lln(spec, b0, t_steps, g, tol, seed=0):
    """Empirical check of the long-horizon averages.

    Simulates one path with constant growth g and compares the sample
    means of Delta, B and R against their limits c, h = alpha/(1-beta)
    and c + g.
    """
    b = simulate_ar1(spec, b0, t_steps, seed)
    delta = np.diff(b) + spec.c
    r = delta + g
    h = spec.long_run_mean
    report = {
        "delta_avg": float(delta.mean()),
        "b_avg": float(b[1:].mean()),
        "r_avg": float(r.mean()),
        "delta_limit": spec.c,
        "b_limit": h,
        "r_limit": spec.c + g,
        "tol": tol,
    }
    report["delta_pass"] = abs(report["delta_avg"] - spec.c) < tol
    report["b_pass"] = abs(report["b_avg"] - h) < tol
    report["r_pass"] = abs(report["r_avg"] - (spec.c + g)) < tol
    return report


def stationary_moments(spec):
    """Mean and variance of the stationary AR(1) law."""
    return {
        "mean": spec.long_run_mean,
        "variance": spec.sigma_eps ** 2 / (1.0 - spec.beta ** 2),
    }


def geometric_ergodicity_estimate(spec, b0_a, b0_b, t_max, n_paths, seed):
    """Total-variation distance between state laws from two starts.

    Simulates n_paths from each start with independent streams and
    histograms both samples on a fixed grid at every step. For a
    noiseless model the laws are point masses, so the distance is
    exactly 1 until the atoms merge.
    """
    ss = np.random.SeedSequence(seed)
    child_a, child_b = ss.spawn(2)
    rng_a = np.random.default_rng(child_a)
    rng_b = np.random.default_rng(child_b)

    if spec.sigma_eps == 0.0:
        # deterministic decay: atoms at beta^t (b0 - h) + h
        out = np.empty(t_max + 1)
        xa, xb = b0_a, b0_b
        out[0] = 0.0 if xa == xb else 1.0
        for t in range(1, t_max + 1):
            xa = spec.alpha + spec.beta * xa
            xb = spec.alpha + spec.beta * xb
            out[t] = 0.0 if xa == xb else 1.0
        return out

    h = spec.long_run_mean
    sd = np.sqrt(stationary_moments(spec)["variance"])
    lo = min(b0_a, b0_b, h - 6.0 * sd)
    hi = max(b0_a, b0_b, h + 6.0 * sd)
    edges = np.linspace(lo - 1e-9, hi + 1e-9, 101)

    def tv(xa, xb):
        ha, _ = np.histogram(np.clip(xa, edges[0], edges[-1]), bins=edges)
        hb, _ = np.histogram(np.clip(xb, edges[0], edges[-1]), bins=edges)
        return 0.5 * np.abs(ha - hb).sum() / n_paths

    xa = np.full(n_paths, float(b0_a))
    xb = np.full(n_paths, float(b0_b))
    out = np.empty(t_max + 1)
    out[0] = tv(xa, xb)
    for t in range(1, t_max + 1):
        xa = spec.alpha + spec.beta * xa + spec.sigma_eps * rng_a.standard_normal(n_paths)
        xb = spec.alpha + spec.beta * xb + spec.sigma_eps * rng_b.standard_normal(n_paths)
        out[t] = tv(xa, xb)
    return out


def sustainability_bounds(c, g):
    """The two sustainability thresholds for constant withdrawals:
    rates below 1 - e^{-c-g} keep wealth growing, asymptotic rates
    above c + g ruin it. The gap between them is an open question."""
    return {
        "safe_rate": -np.expm1(-(c + g)),
        "unsafe_rate": c + g,
    }


def earnings_linked_stats(w, g_hist):
    """Withdrawal series and mean rate for the growth-linked rule.

    W(t) = 1 - e^{w - G(t)} makes wealth independent of growth; its
    mean is M(w) = 1 - e^w E[e^{-G}], estimated from the supplied
    history.
    """
    g_hist = np.asarray(g_hist, dtype=float)
    w_series = 1.0 - np.exp(w - g_hist)
    mean_discount = float(np.mean(np.exp(-g_hist)))
    return {
        "W": w_series,
        "mean_withdrawal": 1.0 - np.exp(w) * mean_discount,
        "mean_discount_factor": mean_discount,
    }


def path_to_csv(path):
    """Serialize a SimulatedPath to CSV with header t,B,Delta,G,R,V."""
    lines = ["t,B,Delta,G,R,V"]
    t_steps = path.Delta.shape[0]
    for t in range(t_steps + 1):
        if t == 0:
            cells = ["0", repr(float(path.B[0])), "", "", "",
                     repr(float(path.V[0]))]
        else:
            vcell = "" if np.isnan(path.V[t]) else repr(float(path.V[t]))
            cells = [str(t), repr(float(path.B[t])),
                     repr(float(path.Delta[t - 1])),
                     repr(float(path.G[t - 1])),
                     repr(float(path.R[t - 1])), vcell]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
