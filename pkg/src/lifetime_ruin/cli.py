"""Command-line front end.

Subcommands::

    lifetime-ruin solve    --config cfg.json [--regime R] [--output out.json]
    lifetime-ruin figure   --config cfg.json --figure {1,2,3,4} [--output out.csv]
    lifetime-ruin simulate --config cfg.json [--seed S] [--output out.json]
    lifetime-ruin sweep    --config cfg.json --parameter b --values 0.04,0.055 [--output out.csv]

Exit codes: 0 success, 1 configuration or parameter error, 2 solver failure.
Environment variables are never consulted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .assembler import limit_sweep, solve
from .closedform import solve_proportional
from .errors import ConfigError, ParameterError, RuinError
from .model import (
    ConstantConsumption,
    Consumption,
    MarketParams,
    ProportionalConsumption,
    Regime,
    validate,
)
from .riccati import aux_line, solve_riccati
from .simulator import TABLE_POINTS, SimConfig, StrategyTable, analytic_ruin, simulate

__all__ = ["main", "load_config", "RunConfig", "FigureTable", "build_figure"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2
FIGURE4_B = (0.04, 0.055, 0.059)
SWEEP_PARAMETERS = ("b", "lambda", "mu", "sigma", "c", "p")
DEFAULT_PROBES = (5.0, 10.0, 20.0)


@dataclass(frozen=True)
class RunConfig:
    params: MarketParams
    consumption: Consumption
    regime: Regime
    simulation: Optional[dict]
    probes: tuple
    source: Path


def _number(data: dict, key: str, required: bool = True, default=None):
    if key not in data:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    value = data[key]
    if value is None and not required:
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key {key!r} must be a number, got {value!r}")
    return float(value)


def load_config(path: "str | Path") -> RunConfig:
    """Read and structurally check a JSON configuration file.

    Model inequalities are checked later, per regime, by :func:`validate`.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")

    params = MarketParams(
        r=_number(data, "r"),
        mu=_number(data, "mu"),
        sigma=_number(data, "sigma"),
        lam=_number(data, "lambda"),
        b=_number(data, "b", required=False),
    )
    cons = data.get("consumption", {"type": "constant", "c": 1.0})
    if not isinstance(cons, dict):
        raise ConfigError("'consumption' must be an object")
    kind = cons.get("type", "constant")
    if kind == "constant":
        consumption: Consumption = ConstantConsumption(_number(cons, "c"))
    elif kind == "proportional":
        consumption = ProportionalConsumption(_number(cons, "p"), _number(cons, "w0"))
    else:
        raise ConfigError(f"consumption type must be 'constant' or 'proportional', got {kind!r}")

    try:
        regime = Regime.parse(data.get("regime", "unconstrained"))
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    sim = data.get("simulation")
    if sim is not None and not isinstance(sim, dict):
        raise ConfigError("'simulation' must be an object")
    probes = data.get("probes", DEFAULT_PROBES)
    if not isinstance(probes, list | tuple) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in probes
    ):
        raise ConfigError("'probes' must be a list of numbers")
    return RunConfig(params, consumption, regime, sim, tuple(float(v) for v in probes), path)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return "nan"
    return "%.12g" % value


def _param_echo(params: MarketParams, consumption: Consumption) -> dict:
    out = {"r": params.r, "b": params.b, "mu": params.mu, "sigma": params.sigma, "lambda": params.lam}
    if isinstance(consumption, ConstantConsumption):
        out["consumption"] = {"type": "constant", "c": consumption.c}
    else:
        out["consumption"] = {"type": "proportional", "p": consumption.p, "w0": consumption.w0}
    return out


@dataclass(frozen=True)
class FigureTable:
    """Named columns of equal length.

    When ``grid_key`` names a column (the wealth grid by default) it must be
    strictly increasing.
    """

    columns: dict
    metadata: dict
    grid_key: Optional[str] = "w"

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) != 1:
            raise ValueError("all columns must share the wealth grid")
        if self.grid_key is not None and np.any(np.diff(np.asarray(self.columns[self.grid_key])) <= 0):
            raise ValueError("wealth grid must be strictly increasing")

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.columns))
        for row in zip(*self.columns.values()):
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _require_constant(cfg: RunConfig) -> float:
    if not isinstance(cfg.consumption, ConstantConsumption):
        raise ConfigError("figures and the piecewise solver need constant consumption")
    return cfg.consumption.c


def _require_b(params: MarketParams) -> None:
    if params.b is None:
        raise ConfigError("this output needs a borrowing rate 'b' in the config")


def _boundary_meta(sol_0, sol_b=None) -> dict:
    meta = {"w_l": _fmt(sol_0.w_l), "safe_level": _fmt(sol_0.safe_level)}
    if sol_0.w_mu is not None:
        meta["w_mu"] = _fmt(sol_0.w_mu)
    if sol_b is not None:
        meta["w_b"] = _fmt(sol_b.w_b)
    return meta


def build_figure(cfg: RunConfig, figure: int, grid_points: int = 512) -> FigureTable:
    """Tabulate one of the four reference figures for the configured model."""
    c = _require_constant(cfg)
    params = cfg.params
    if figure not in (1, 2, 3, 4):
        raise ConfigError("figure must be 1, 2, 3 or 4")
    if grid_points < 2:
        raise ConfigError("grid-points must be at least 2")
    _require_b(params)
    for regime in (Regime.UNCONSTRAINED, Regime.NO_BORROW, Regime.BORROW):
        validate(params, cfg.consumption, regime)

    riccati = solve_riccati(params, c)
    meta = {"figure": figure, "parameters": json.dumps(_param_echo(params, cfg.consumption), sort_keys=True)}
    sol_0 = solve(params, c, Regime.NO_BORROW, riccati)
    sol_b = solve(params, c, Regime.BORROW, riccati)
    meta.update(_boundary_meta(sol_0, sol_b))

    if figure == 1:
        w = np.linspace(0.0, sol_0.w_l, grid_points)
        meta["curves"] = "y = h/h' (risky-only region); z lending line; z_b borrowing line"
        cols = {
            "w": w,
            "y": riccati.y(w),
            "z": aux_line("z", params, c)(w),
            "z_b": aux_line("z_b", params, c)(w),
        }
        return FigureTable(cols, meta)

    w = np.linspace(0.0, sol_0.safe_level, grid_points)
    if figure == 2:
        sol = solve(params, c, Regime.UNCONSTRAINED)
        meta["curves"] = "psi unconstrained; psi_0 no borrowing; psi_b borrowing at b"
        return FigureTable({"w": w, "psi": sol.psi(w), "psi_0": sol_0.psi(w), "psi_b": sol_b.psi(w)}, meta)
    if figure == 3:
        sol = solve(params, c, Regime.UNCONSTRAINED)
        meta["curves"] = "riskless position zeta = w - pi*; negative means borrowing"
        return FigureTable(
            {"w": w, "zeta": sol.evaluate(w)[2], "zeta_0": sol_0.evaluate(w)[2], "zeta_b": sol_b.evaluate(w)[2]},
            meta,
        )
    meta["curves"] = "zeta_b for b in " + ", ".join(_fmt(b) for b in FIGURE4_B)
    meta["note"] = "the last rate is 0.059, just below mu; 0.59 would violate b < mu"
    cols = {"w": w}
    for b in FIGURE4_B:
        sol = solve(params.replace(b=b), c, Regime.BORROW, riccati)
        cols[f"zeta_b_{_fmt(b)}"] = sol.evaluate(w)[2]
        meta[f"w_b[b={_fmt(b)}]"] = _fmt(sol.w_b)
    return FigureTable(cols, meta)


def solve_report(cfg: RunConfig, regime: Regime, grid_points: int = 512) -> dict:
    """JSON-ready summary: boundaries, multipliers and sampled psi / pi*."""
    report = {
        "version": __version__,
        "regime": regime.value,
        "parameters": _param_echo(cfg.params, cfg.consumption),
    }
    if isinstance(cfg.consumption, ProportionalConsumption):
        p, w0 = cfg.consumption.p, cfg.consumption.w0
        sol = solve_proportional(cfg.params, p, w0, regime)
        w = np.linspace(w0, 10.0 * w0, grid_points)
        report.update(
            case=sol.case,
            exponent=sol.exponent,
            investment_fraction=sol.investment_fraction,
            grid={"w": w.tolist(), "psi": np.atleast_1d(sol.psi(w)).tolist(), "pistar": np.atleast_1d(sol.pistar(w)).tolist()},
        )
        return report

    c = cfg.consumption.c
    sol = solve(cfg.params, c, regime)
    w = np.linspace(0.0, sol.safe_level, grid_points)
    psi, pi, zeta = sol.evaluate(w)
    report.update(
        boundaries=sol.boundaries(),
        beta=sol.beta,
        d=sol.d,
        grid={"w": w.tolist(), "psi": psi.tolist(), "pistar": pi.tolist(), "riskless": zeta.tolist()},
        strategy_table=StrategyTable.from_callable(sol.pistar, sol.safe_level, TABLE_POINTS, 0.0).to_dict(),
    )
    return report


def _sim_config(cfg: RunConfig, seed: Optional[int]) -> SimConfig:
    if cfg.simulation is None:
        raise ConfigError("config has no 'simulation' block")
    sim = dict(cfg.simulation)
    strategy = None
    if "strategy_file" in sim:
        spath = Path(sim.pop("strategy_file"))
        if not spath.is_absolute():
            spath = cfg.source.parent / spath
        try:
            blob = json.loads(spath.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read strategy file {spath}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {spath} at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        strategy = StrategyTable.from_dict(blob.get("strategy_table", blob))
    known = {"n_paths", "dt", "seed", "w_start", "max_horizon", "bridge", "lanes", "workers"}
    unknown = set(sim) - known
    if unknown:
        raise ConfigError(f"unknown simulation keys: {sorted(unknown)}")
    for key in ("n_paths", "dt", "w_start"):
        if key not in sim:
            raise ConfigError(f"simulation block needs {key!r}")
    if seed is not None:
        sim["seed"] = seed
    sim.setdefault("seed", 0)
    try:
        return SimConfig(strategy=strategy, **sim)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def simulate_report(cfg: RunConfig, regime: Regime, seed: Optional[int] = None) -> dict:
    sim_cfg = _sim_config(cfg, seed)
    result = simulate(cfg.params, cfg.consumption, regime, sim_cfg)
    exact = float(analytic_ruin(cfg.params, cfg.consumption, regime, sim_cfg.w_start))
    diff = result.ruin_probability - exact
    out = result.to_dict()
    out.update(
        regime=regime.value,
        analytic_ruin_probability=exact,
        z_score=diff / result.std_error if result.std_error > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff)),
    )
    return out


def _with_value(cfg: RunConfig, parameter: str, value: float):
    params, cons = cfg.params, cfg.consumption
    if parameter == "lambda":
        return params.replace(lam=value), cons
    if parameter in ("b", "mu", "sigma"):
        return params.replace(**{parameter: value}), cons
    if parameter == "c":
        if not isinstance(cons, ConstantConsumption):
            raise ConfigError("parameter 'c' needs constant consumption")
        return params, ConstantConsumption(value)
    if not isinstance(cons, ProportionalConsumption):
        raise ConfigError("parameter 'p' needs proportional consumption")
    return params, ProportionalConsumption(value, cons.w0)


def sweep_table(cfg: RunConfig, parameter: str, values: Sequence[float], regime: Regime) -> FigureTable:
    """One row of diagnostics per value; failing values carry an error marker."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"parameter must be one of {', '.join(SWEEP_PARAMETERS)}")
    if not values:
        raise ConfigError("no sweep values given")
    probes = cfg.probes
    names = ["value", "w_b", "w_l", "beta_b", "leverage_at_zero", "exponent"]
    names += [f"psi_at_{_fmt(w)}" for w in probes] + ["status"]
    rows = []
    shared = None
    if parameter == "b" and isinstance(cfg.consumption, ConstantConsumption) and regime is Regime.BORROW:
        shared = {row.b: row for row in limit_sweep(cfg.params, cfg.consumption.c, values, probes)}
    for value in values:
        row = {n: math.nan for n in names}
        row["value"] = value
        try:
            if shared is not None:
                s = shared[float(value)]
                if s.error is not None:
                    raise ParameterError(s.error)
                row.update(w_b=s.w_b, w_l=s.w_l, beta_b=s.beta_b, leverage_at_zero=s.leverage_at_zero)
                for w, v in zip(probes, s.psi_probes):
                    row[f"psi_at_{_fmt(w)}"] = v
            else:
                params, cons = _with_value(cfg, parameter, float(value))
                if isinstance(cons, ConstantConsumption):
                    sol = solve(params, cons.c, regime)
                    psi, pi, _ = sol.evaluate(np.asarray(probes, dtype=float))
                    row.update(w_l=sol.w_l, beta_b=sol.beta, leverage_at_zero=float(sol.pistar(0.0)))
                    if sol.w_b is not None:
                        row["w_b"] = sol.w_b
                else:
                    sol = solve_proportional(params, cons.p, cons.w0, regime)
                    psi = np.atleast_1d(sol.psi(np.asarray(probes, dtype=float)))
                    row.update(exponent=sol.exponent, leverage_at_zero=0.0)
                for w, v in zip(probes, np.atleast_1d(psi)):
                    row[f"psi_at_{_fmt(w)}"] = v
            row["status"] = "ok"
        except ConfigError:
            raise
        except (RuinError, ValueError) as exc:
            msg = str(exc) if ":" in str(exc) else f"{type(exc).__name__}: {exc}"
            row["status"] = f"error: {msg}"
        rows.append(row)
    meta = {
        "sweep": parameter,
        "regime": regime.value,
        "parameters": json.dumps(_param_echo(cfg.params, cfg.consumption), sort_keys=True),
    }
    cols = {n: [r[n] for r in rows] for n in names}
    return FigureTable(cols, meta, grid_key=None)


def _emit(text: str, output: Optional[str]) -> None:
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values must be comma-separated numbers: {exc}") from exc


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lifetime-ruin", description="Minimum probability of lifetime ruin.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--output", help="output file (default: standard output)")

    p = sub.add_parser("solve", help="solve one regime and write a JSON report")
    common(p)
    p.add_argument("--regime", choices=[r.value for r in Regime])
    p.add_argument("--grid-points", type=int, default=512)

    p = sub.add_parser("figure", help="write figure data as CSV")
    common(p)
    p.add_argument("--figure", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--grid-points", type=int, default=512)

    p = sub.add_parser("simulate", help="Monte Carlo estimate against the analytic value")
    common(p)
    p.add_argument("--regime", choices=[r.value for r in Regime])
    p.add_argument("--seed", type=_u64)

    p = sub.add_parser("sweep", help="diagnostics across values of one parameter")
    common(p)
    p.add_argument("--parameter", required=True, choices=SWEEP_PARAMETERS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--regime", choices=[r.value for r in Regime])
    return parser


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    regime = Regime.parse(args.regime) if getattr(args, "regime", None) else cfg.regime
    if args.command == "solve":
        if args.grid_points < 2:
            raise ConfigError("grid-points must be at least 2")
        validate(cfg.params, cfg.consumption, regime)
        _emit(json.dumps(solve_report(cfg, regime, args.grid_points), indent=2) + "\n", args.output)
    elif args.command == "figure":
        _emit(build_figure(cfg, args.figure, args.grid_points).to_csv(), args.output)
    elif args.command == "simulate":
        validate(cfg.params, cfg.consumption, regime)
        _emit(json.dumps(simulate_report(cfg, regime, args.seed), indent=2) + "\n", args.output)
    else:
        _emit(sweep_table(cfg, args.parameter, _parse_values(args.values), regime).to_csv(), args.output)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ConfigError, ParameterError) as exc:
        print(f"lifetime-ruin: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuinError as exc:
        print(f"lifetime-ruin: solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
