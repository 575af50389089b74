"""Command-line frontend tying the modules into reproducible runs.

Eight commands cover the full pipeline: ingest (derived series CSV),
fit (model JSONs), diagnose (all test reports), predict (forward
return correlations), ruin and portfolio (withdrawal survival
surfaces), ctsim (continuous-time paths and value-function grids),
and report (golden comparison JSON).

All randomness flows from --seed, so a fixed command line writes
byte-identical files on every run. Output filenames describe their
content and never vary. Exit codes: 0 success, 2 bad input, 3
numeric failure; failures print a one-line JSON object on stderr.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import ctmodels as ct
from .dynamics import DiscreteModelSpec
from .errors import (DegenerateSeries, GapInYears, GridUnstable,
                     LengthMismatch, MalformedRow, NoConvergence, NonPositive,
                     NonPositiveTheta, NonPositiveWealth, RankDeficient,
                     SampleSizeOutOfRange, StepTooLarge, TooFewObservations,
                     TooFewRows, WindowTooLarge)
from .goldens import compare
from .market_data import (build_derived, derived_to_csv, load_bundled_csv,
                          parse_market_csv)
from .ruin import PortfolioRuleConfig, RuinConfig, portfolio_ruin, ruin_surface
from .valuation import fit_bubble, fit_tr_cape, fit_to_json

COMMANDS = ("ingest", "fit", "diagnose", "predict", "ruin", "portfolio",
            "ctsim", "report")

PREDICT_HEADER = "measure,horizon,correlation"
PORTFOLIO_HEADER = "gamma,horizon,ruin_prob,n_sims"

_BAD_INPUT_ERRORS = (MalformedRow, GapInYears, NonPositive, TooFewRows,
                     WindowTooLarge, TooFewObservations, LengthMismatch,
                     SampleSizeOutOfRange, StepTooLarge, ValueError, KeyError,
                     OSError)
_NUMERIC_ERRORS = (RankDeficient, DegenerateSeries, NoConvergence,
                   GridUnstable, NonPositiveTheta, NonPositiveWealth,
                   FloatingPointError)


@dataclass
class RunConfig:
    """One resolved invocation: command, data source, output directory,
    parameter overrides, and the master seed feeding all randomness."""

    command: str
    input_path: str = None
    out_dir: str = "."
    overrides: dict = field(default_factory=dict)
    master_seed: int = 0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not isinstance(self.overrides, dict):
            raise ValueError("overrides must be a JSON object")


def _load_raw(config):
    if config.input_path is None:
        return parse_market_csv(load_bundled_csv())
    with open(config.input_path, "r") as fh:
        return parse_market_csv(fh.read())


class _Pipeline:
    """Derived series plus both fitted models, computed once per run."""

    def __init__(self, raw, window=10):
        self.raw = raw
        self.der = build_derived(raw, window)
        k = self.der.base_index
        self.ln_g = np.log(self.der.tr_cape[k:])
        self.ln_f = np.log(self.der.cape[k:])
        self.ln_h = np.log(self.der.modified_ratio[k:])
        ebar10 = self.der.Ebar10[k:]
        self.g_tr = np.log(ebar10[1:] / ebar10[:-1])
        e10 = self.der.E10[k:]
        self.g_e10 = np.log(e10[1:] / e10[:-1])
        self.fit = fit_tr_cape(self.ln_g, growth=self.g_tr)
        self.bub = fit_bubble(self.ln_h)


def _write_text(out_dir, name, text):
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return name


def _write_json(out_dir, name, obj):
    return _write_text(out_dir, name,
                       json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _cmd_ingest(config):
    raw = _load_raw(config)
    der = build_derived(raw, int(config.overrides.get("window", 10)))
    files = [_write_text(config.out_dir, "derived_series.csv",
                         derived_to_csv(der, raw.years))]
    summary = {
        "rows": int(raw.years.shape[0]),
        "first_year": int(raw.years[0]),
        "last_year": int(raw.years[-1]),
        "window": der.window,
        "base_index": der.base_index,
    }
    files.append(_write_json(config.out_dir, "ingest_summary.json", summary))
    return files


def _cmd_fit(config):
    pipe = _Pipeline(_load_raw(config))
    return [
        _write_json(config.out_dir, "fit_tr_cape.json", fit_to_json(pipe.fit)),
        _write_json(config.out_dir, "fit_bubble.json", fit_to_json(pipe.bub)),
    ]


def _cmd_diagnose(config):
    pipe = _Pipeline(_load_raw(config))
    payload = {
        "tr_cape": [d.to_dict() for d in pipe.fit.diagnostics],
        "bubble": [d.to_dict() for d in pipe.bub.diagnostics],
    }
    return [_write_json(config.out_dir, "diagnostics.json", payload)]


def _cmd_predict(config):
    from .valuation import predictive_correlation

    pipe = _Pipeline(_load_raw(config))
    n = pipe.raw.years.shape[0]
    k = pipe.der.base_index

    def padded(series):
        full = np.full(n, np.nan)
        full[k:] = series
        return full

    measures = (("ln_tr_cape", pipe.ln_g), ("ln_cape", pipe.ln_f),
                ("bubble_b", pipe.bub.b_series))
    lines = [PREDICT_HEADER]
    for name, series in measures:
        for horizon in (1, 10):
            corr = predictive_correlation(padded(series), pipe.der.R, horizon)
            lines.append(f"{name},{horizon},{repr(float(corr))}")
    return [_write_text(config.out_dir, "predictive_correlations.csv",
                        "\n".join(lines) + "\n")]


def parse_predict_csv(content):
    """Round-trip parser for the predict command's CSV."""
    lines = [ln for ln in content.strip().split("\n") if ln != ""]
    if not lines or lines[0] != PREDICT_HEADER:
        raise ValueError("bad predictive correlation CSV header")
    out = {}
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 3:
            raise ValueError(f"bad predictive correlation row {ln!r}")
        out[(cells[0], int(cells[1]))] = float(cells[2])
    return out


def _b0_scenarios(pipe):
    return (("h", pipe.bub.long_run_mean),
            ("b_final", float(pipe.bub.b_series[-1])))


def _cmd_ruin(config):
    pipe = _Pipeline(_load_raw(config))
    ov = config.overrides
    model = DiscreteModelSpec(alpha=pipe.bub.alpha_h, beta=pipe.bub.beta_h,
                              c=pipe.bub.c, sigma_eps=pipe.bub.sigma_eps)
    files = []
    for label, b0 in _b0_scenarios(pipe):
        surface = ruin_surface(RuinConfig(
            model=model,
            b0=b0,
            horizons=list(ov.get("horizons", [10, 30, 50])),
            withdrawal_grid=list(ov.get("withdrawal_grid",
                                        [0.03, 0.04, 0.05, 0.06])),
            n_sims=int(ov.get("n_sims", 10000)),
            master_seed=config.master_seed,
            growth_history=pipe.g_e10,
        ))
        files.append(_write_text(config.out_dir, f"ruin_surface_b0={label}.csv",
                                 surface.to_csv()))
    return files


def _cmd_portfolio(config):
    pipe = _Pipeline(_load_raw(config))
    ov = config.overrides
    model = DiscreteModelSpec(alpha=pipe.bub.alpha_h, beta=pipe.bub.beta_h,
                              c=pipe.bub.c, sigma_eps=pipe.bub.sigma_eps)
    gamma_grid = list(ov.get("gamma_grid", [2.0, 3.0, 4.0, 5.0, 6.0]))
    horizons = list(ov.get("horizons", [30, 50]))
    n_sims = int(ov.get("n_sims", 10000))
    files = []
    for label, b0 in _b0_scenarios(pipe):
        lines = [PORTFOLIO_HEADER]
        for horizon in horizons:
            probs = portfolio_ruin(PortfolioRuleConfig(
                model=model,
                b0=b0,
                horizon=int(horizon),
                withdrawal=float(ov.get("withdrawal", 0.05)),
                gamma_grid=gamma_grid,
                riskfree_series=float(ov.get("riskfree", 0.01)),
                growth_history=pipe.g_e10,
                n_sims=n_sims,
                master_seed=config.master_seed,
                pi_mode=str(ov.get("pi_mode", "drift_consistent")),
            ))
            for gamma in gamma_grid:
                lines.append(f"{repr(float(gamma))},{int(horizon)},"
                             f"{repr(float(probs[float(gamma)]))},{n_sims}")
        files.append(_write_text(config.out_dir,
                                 f"portfolio_ruin_b0={label}.csv",
                                 "\n".join(lines) + "\n"))
    return files


def parse_portfolio_csv(content):
    """Round-trip parser for the portfolio command's CSV."""
    lines = [ln for ln in content.strip().split("\n") if ln != ""]
    if not lines or lines[0] != PORTFOLIO_HEADER:
        raise ValueError("bad portfolio ruin CSV header")
    out = {}
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 4:
            raise ValueError(f"bad portfolio ruin row {ln!r}")
        out[(float(cells[0]), int(cells[1]))] = float(cells[2])
    return out


def _cmd_ctsim(config):
    pipe = _Pipeline(_load_raw(config))
    ov = config.overrides
    bub = pipe.bub
    spec = ct.CtModelSpec(
        drift=ct.LinearOU(beta_rev=1.0 - bub.beta_h, h_inf=bub.long_run_mean),
        sigma=bub.sigma_eps,
        g=float(pipe.g_e10.mean()),
        rho=float(pipe.g_e10.std(ddof=1)),
        c=bub.c,
        r=float(ov.get("riskfree", 0.01)),
    )
    dt = float(ov.get("dt", 0.01))
    horizon = float(ov.get("horizon", 30.0))
    h0 = float(ov.get("h0", bub.b_series[-1]))
    gamma_path = float(ov.get("gamma", 1.0))

    factor_seed, fundamental_seed = np.random.SeedSequence(
        config.master_seed).spawn(2)
    h = ct.simulate_factor(spec, h0, dt, horizon, factor_seed)
    f = ct.simulate_fundamental(spec, dt, horizon, fundamental_seed)
    v = ct.wealth_from_factor(h, f, spec.c, dt)
    pi = ct.optimal_pi(h, spec, gamma_path)
    t = np.arange(h.shape[0]) * dt
    files = [_write_text(config.out_dir, "ct_path.csv",
                         ct.path_to_csv(t, h, f, v, pi))]

    h_inf = bub.long_run_mean
    half = float(ov.get("h_half_width", 1.0))
    pde_gamma = float(ov.get("pde_gamma", 1.0))
    pde = ct.solve_terminal_pde(
        spec, pde_gamma, h_inf - half, h_inf + half,
        int(ov.get("n_h", 101)), float(ov.get("pde_horizon", 10.0)),
        int(ov.get("n_t", 200)))
    files.append(_write_text(config.out_dir,
                             "theta_pde_gamma=%g.csv" % pde_gamma,
                             pde.to_csv()))

    ode_gamma = float(ov.get("ode_gamma", 0.5))
    ode = ct.solve_consumption_ode(
        spec, ode_gamma, float(ov.get("discount_rate", 0.05)),
        h_inf - 1.4, h_inf + 1.4, int(ov.get("ode_n_h", 401)))
    files.append(_write_text(config.out_dir,
                             "theta_ode_gamma=%g.csv" % ode_gamma,
                             ode.to_csv()))

    settings = {
        "spec": ct.ct_spec_to_json(spec),
        "dt": dt,
        "horizon": horizon,
        "h0": h0,
        "gamma": gamma_path,
        "pde_gamma": pde_gamma,
        "ode_gamma": ode_gamma,
        "master_seed": config.master_seed,
    }
    files.append(_write_json(config.out_dir, "ct_settings.json", settings))
    return files


def _cmd_report(config):
    raw = _load_raw(config)
    result = compare(raw, n_sims=int(config.overrides.get("n_sims", 4000)),
                     master_seed=config.master_seed)
    return [_write_json(config.out_dir, "golden_report.json", result)]


_DISPATCH = {
    "ingest": _cmd_ingest,
    "fit": _cmd_fit,
    "diagnose": _cmd_diagnose,
    "predict": _cmd_predict,
    "ruin": _cmd_ruin,
    "portfolio": _cmd_portfolio,
    "ctsim": _cmd_ctsim,
    "report": _cmd_report,
}


def run(config):
    """Execute one command; returns {"command", "out_dir", "files"}."""
    os.makedirs(config.out_dir, exist_ok=True)
    files = _DISPATCH[config.command](config)
    return {"command": config.command, "out_dir": config.out_dir,
            "files": files}


def _parse_overrides(text):
    if text is None:
        return {}
    if text.lstrip().startswith(("{", "[")):
        loaded = json.loads(text)
    else:
        with open(text, "r") as fh:
            loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise ValueError("config JSON must be an object")
    return loaded


def build_parser():
    parser = argparse.ArgumentParser(
        prog="valuation-lab",
        description="Valuation-ratio analyses of an annual market CSV "
                    "(year,price,dividend,earnings,cpi).",
        epilog="The environment variable VALUATION_LAB_THREADS caps "
               "simulation parallelism.")
    parser.add_argument("command", nargs="?", choices=COMMANDS,
                        help="what to run (alternative to --command)")
    parser.add_argument("--command", dest="command_flag", choices=COMMANDS,
                        help="what to run")
    parser.add_argument("--input", default=None,
                        help="raw CSV path (default: bundled 1871-2020 file)")
    parser.add_argument("--out", default=".",
                        help="output directory (default: current)")
    parser.add_argument("--seed", type=int, default=0,
                        help="master seed for all randomness (default 0)")
    parser.add_argument("--config", default=None,
                        help="parameter overrides: inline JSON object or a "
                             "path to a JSON file")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = args.command or args.command_flag
    try:
        if command is None:
            raise ValueError("no command given")
        if args.command and args.command_flag and \
                args.command != args.command_flag:
            raise ValueError("positional command and --command disagree")
        config = RunConfig(command=command, input_path=args.input,
                           out_dir=args.out,
                           overrides=_parse_overrides(args.config),
                           master_seed=args.seed)
        result = run(config)
    except _NUMERIC_ERRORS as exc:
        _emit_error(command, exc)
        return 3
    except _BAD_INPUT_ERRORS as exc:
        _emit_error(command, exc)
        return 2
    print(json.dumps(result, sort_keys=True))
    return 0


def _emit_error(command, exc):
    payload = {"error": type(exc).__name__, "message": str(exc),
               "command": command}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
