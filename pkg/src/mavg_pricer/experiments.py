"""Experiment definitions: presets, sweep points and CSV rows."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ConfigError, ExperimentConfig, check_order, check_point
from .laguerre import LaguerreBasis
from .lsmc import Method, PricingResult, price, seed_list_hash
from .market import TimeGrid, exact_moving_average, simulate_paths
from .markovize import assemble_approx_ma, propagate_states
from .weighting import WeightingScheme, optimal_projection, optimize_scale, project

logger = logging.getLogger(__name__)

PRICE_COLUMNS = [
    "experiment", "method", "n", "T", "N", "N_delta", "N_lag", "M", "bS", "bX",
    "price", "price_display", "mc_std_error", "rel_std", "p_opt", "seed_list_hash",
]


def fmt(value) -> str:
    """CSV cell: floats at 17 significant digits, None as empty."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, columns: list[str], rows: list[dict], header: list[str], footer: list[str] = ()) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    for line in footer:
        buf.write(line + "\n")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def read_csv(path: Path) -> list[dict]:
    """Data rows of an emitted CSV (comment lines skipped), values as strings."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


@dataclass
class PricePoint:
    method: Method
    grid: TimeGrid
    n: int | None
    M: int


@dataclass
class Experiment:
    name: str
    preset: Callable[[str], dict]
    run: Callable[[ExperimentConfig], "Output"]
    description: str
    pricing: bool = True


@dataclass
class Output:
    columns: list[str]
    rows: list[dict]
    footer: list[str]
    summaries: list[str]
    extra_files: dict


def _bx_text(b_x) -> str:
    return ";".join(map(str, b_x)) if isinstance(b_x, (list, tuple)) else str(b_x)


def _summary(name: str, row: dict) -> str:
    n = "-" if row["n"] is None else row["n"]
    return (
        f"{name} {row['method']:8s} N_delta={row['N_delta']:<3d} N_lag={row['N_lag']:<3d} n={n:<3} "
        f"price={row['price_display']} se={row['mc_std_error']:.2g} rel_std={100 * row['rel_std']:.3f}%"
    )


def price_points(name: str, cfg: ExperimentConfig, points: list[PricePoint]) -> Output:
    """Validate every point first, then price them in order with the config's seeds."""
    for pt in points:
        check_point(replace(cfg, M=pt.M), pt.method, pt.grid, pt.n)
    rows, summaries, footer = [], [], []
    for idx, pt in enumerate(points):
        spec = cfg.regression_spec(pt.method, pt.grid, pt.n)
        res: PricingResult = price(
            pt.method, cfg.model, pt.grid, cfg.payoff, pt.M, spec, cfg.seeds, n=pt.n,
        )
        row = {
            "experiment": name,
            "method": pt.method.value,
            "n": pt.n if pt.method.uses_laguerre else None,
            "T": pt.grid.T,
            "N": pt.grid.N,
            "N_delta": pt.grid.N_delta,
            "N_lag": pt.grid.N_lag,
            "M": pt.M,
            "bS": cfg.b_s,
            "bX": _bx_text(cfg.b_x),
            "price": res.price,
            "price_display": f"{res.price:.3f}",
            "mc_std_error": res.mc_std_error,
            "rel_std": res.rel_std,
            "p_opt": res.p,
            "seed_list_hash": seed_list_hash(cfg.seeds),
        }
        rows.append(row)
        summaries.append(_summary(name, row))
        print(summaries[-1], flush=True)
        footer.append(f"# runtime_s row={idx} {res.runtime_seconds:.3f}")
    return Output(PRICE_COLUMNS, rows, footer, summaries, {})


def _scaled(scale: str, desk: dict, paper: dict) -> dict:
    return paper if scale == "paper" else desk


def _ints(values) -> list[int]:
    out = []
    for v in values:
        if float(v) != int(v):
            raise ConfigError(f"sweep value {v} must be an integer")
        out.append(int(v))
    return out


# ---------------------------------------------------------------- table1
def _table1(cfg: ExperimentConfig) -> Output:
    ns = _ints(cfg.sweep or range(1, 11))
    scheme = WeightingScheme.uniform(1.0)
    rows, summaries = [], []
    for n in ns:
        p = optimize_scale(scheme, n)
        proj = project(scheme, LaguerreBasis(p, n))
        rows.append({"n": n, "p_opt": p, "p_opt_display": f"{p:.3f}", "l2_error": proj.l2_error,
                     "rel_error": proj.relative_error})
        summaries.append(f"table1 n={n:<3d} p_opt={p:.3f} l2_error={proj.l2_error:.5f}")
        print(summaries[-1], flush=True)
    return Output(["n", "p_opt", "p_opt_display", "l2_error", "rel_error"], rows, [], summaries, {})


# ---------------------------------------------------------- approx-error
def power_fit(ns, errors) -> float:
    """Exponent of a least-squares power-law fit ``err ~ C n^b``."""
    return float(np.polyfit(np.log(ns), np.log(errors), 1)[0])


def _approx_error(cfg: ExperimentConfig) -> Output:
    ns = _ints(cfg.sweep or range(1, 11))
    schemes = {"uniform": (1.0, 0.0), "delayed": (1.0, 0.5)}
    rows, summaries, footer = [], [], []
    for label, (window, lag) in schemes.items():
        scheme = WeightingScheme.delayed(window, lag)
        errs = []
        for n in ns:
            proj = optimal_projection(scheme, n)
            errs.append(proj.l2_error)
            rows.append({"scheme": label, "delta": window, "lag": lag, "n": n, "p_opt": proj.basis.p,
                         "l2_error": proj.l2_error, "h_norm": proj.h_norm, "rel_error": proj.relative_error})
            summaries.append(f"approx-error {label:8s} n={n:<3d} p_opt={proj.basis.p:.3f} "
                             f"l2_error={proj.l2_error:.5f} rel_error={100 * proj.relative_error:.2f}%")
            print(summaries[-1], flush=True)
        if len(ns) > 1:
            footer.append(f"# power_fit {label} exponent={power_fit(ns, errs):.4f}")
            print(footer[-1][2:])
    cols = ["scheme", "delta", "lag", "n", "p_opt", "l2_error", "h_norm", "rel_error"]
    return Output(cols, rows, footer, summaries, {})


# ------------------------------------------------------------ trajectory
def _trajectory(cfg: ExperimentConfig) -> Output:
    ns = _ints(cfg.sweep or [1, 3, 7])
    grid = cfg.grid
    for n in ns:
        check_order(n, grid)
    paths = simulate_paths(cfg.model, grid, cfg.M, cfg.seeds[0])
    exact = exact_moving_average(paths, grid)
    scheme = WeightingScheme.delayed(grid.delta, grid.lag)
    nmax = max(ns)
    cols = ["path_id", "step", "t", "n", "price", "exact_ma", "approx_ma"] + [f"state_{k}" for k in range(nmax)]
    rows, summaries = [], []
    for n in ns:
        proj = optimal_projection(scheme, n)
        states = propagate_states(paths, proj, grid)
        approx = assemble_approx_ma(states, paths, proj)
        sup_err = np.abs(approx - exact).max(axis=1).mean()
        summaries.append(f"trajectory n={n:<3d} p_opt={proj.basis.p:.3f} mean sup|approx-exact|={sup_err:.5f}")
        print(summaries[-1], flush=True)
        for m in range(paths.M):
            for i in range(grid.N + 1):
                row = {"path_id": m, "step": i, "t": i * grid.dt, "n": n, "price": paths.prices[m, i],
                       "exact_ma": exact[m, i], "approx_ma": approx[m, i]}
                row.update({f"state_{k}": states[m, i, k] for k in range(n)})
                rows.append(row)
    path_rows = [{"path_id": m, "step": i, "price": paths.prices[m, i]}
                 for m in range(paths.M) for i in range(grid.N + 1)]
    return Output(cols, rows, [], summaries, {"paths": (["path_id", "step", "price"], path_rows)})


# ------------------------------------------------------------ pricing tables
def _table2(cfg: ExperimentConfig) -> Output:
    points = []
    for nd in _ints(cfg.sweep or range(2, 11)):
        grid = replace(cfg.grid, N_delta=nd)
        points.append(PricePoint(Method.NM_LS, grid, None, cfg.M))
        if nd <= 8:
            points.append(PricePoint(Method.M_LS, grid, None, cfg.M))
    return price_points("table2", cfg, points)


def _table3(cfg: ExperimentConfig) -> Output:
    points = []
    for n in _ints(cfg.sweep or range(1, 8)):
        # full scale uses 5e6 paths for n <= 3 and 1e7 beyond
        M = cfg.M if cfg.scale == "desk" or n >= 4 else cfg.M // 2
        points.append(PricePoint(Method.LAG_LS_STAR, cfg.grid, n, M))
        points.append(PricePoint(Method.LAG_LS, cfg.grid, n, M))
    points.append(PricePoint(Method.NM_LS, cfg.grid, None, cfg.M))
    return price_points("table3", cfg, points)


def _lag_order(cfg: ExperimentConfig, grid: TimeGrid, default: int) -> int:
    """Order at one sweep point: the configured ``n``, capped by the point's bound."""
    return min(cfg.n or default, grid.first_exercise - 1)


def _delta_sweep(cfg: ExperimentConfig) -> Output:
    points = []
    for nd in _ints(cfg.sweep or [1, 2, 3, 5, 8, 10, 15, 20, 25, 30, 40, 50]):
        grid = replace(cfg.grid, N_delta=nd, N_lag=0)
        if nd >= 2:
            points.append(PricePoint(Method.LAG_LS_STAR, grid, _lag_order(cfg, grid, 7), cfg.M))
        points.append(PricePoint(Method.NM_LS, grid, None, cfg.M))
    return price_points("delta-sweep", cfg, points)


def _lag_sweep(cfg: ExperimentConfig) -> Output:
    points = []
    for nl in _ints(cfg.sweep or range(0, 46, 5)):
        grid = replace(cfg.grid, N_lag=nl)
        if grid.first_exercise >= 2:
            points.append(PricePoint(Method.LAG_LS_STAR, grid, _lag_order(cfg, grid, 10), cfg.M))
        points.append(PricePoint(Method.NM_LS, grid, None, cfg.M))
    return price_points("lag-sweep", cfg, points)


def _lag_window_sweep(cfg: ExperimentConfig) -> Output:
    points = []
    for nd in _ints(cfg.sweep or [1, 2, 5, 10, 15, 20, 25, 30]):
        grid = replace(cfg.grid, N_delta=nd)
        points.append(PricePoint(Method.LAG_LS_STAR, grid, _lag_order(cfg, grid, 10), cfg.M))
        points.append(PricePoint(Method.NM_LS, grid, None, cfg.M))
    return price_points("lag-window-sweep", cfg, points)


def _bermudan_convergence(cfg: ExperimentConfig) -> Output:
    dims = _ints(cfg.sweep or range(2, 9))
    T, window = cfg.grid.T, 0.1
    finest = max(dims)
    lag_grid = TimeGrid(T=T, N=round(finest * T / window), N_delta=finest, N_lag=0)
    points = [PricePoint(Method.LAG_LS_STAR, lag_grid, d - 1, cfg.M) for d in dims]
    for d in dims:
        points.append(PricePoint(Method.M_LS, TimeGrid(T=T, N=round(d * T / window), N_delta=d, N_lag=0), None, cfg.M))
    return price_points("bermudan-convergence", cfg, points)


EXPERIMENTS: dict[str, Experiment] = {
    "table1": Experiment("table1", lambda s: {}, _table1, "optimal scale p_opt(1, n), n = 1..10", pricing=False),
    "approx-error": Experiment("approx-error", lambda s: {}, _approx_error,
                               "L2 projection error vs n, uniform and delayed windows", pricing=False),
    "trajectory": Experiment(
        "trajectory",
        lambda s: {"grid": {"N_delta": 10}, "M": 1, "seeds": [1]},
        _trajectory,
        "one simulated path with exact and Laguerre-approximated moving averages",
        pricing=False,
    ),
    "table2": Experiment(
        "table2",
        lambda s: _scaled(s, {"M": 500_000, "seeds": [1, 2, 3]}, {"M": 10_000_000, "seeds": [1, 2, 3, 4, 5]})
        | {"regression": {"b_s": 2, "b_x": 2}},
        _table2,
        "nm-ls vs m-ls for N_delta = 2..10",
    ),
    "table3": Experiment(
        "table3",
        lambda s: _scaled(s, {"M": 1_000_000, "seeds": [1, 2, 3]}, {"M": 10_000_000, "seeds": [1, 2, 3, 4, 5]})
        | {"grid": {"N_delta": 10}, "regression": {"b_s": 4, "b_x": 1}},
        _table3,
        "lag-ls* and lag-ls for n = 1..7 at N_delta = 10",
    ),
    "delta-sweep": Experiment(
        "delta-sweep",
        lambda s: _scaled(s, {"M": 500_000, "seeds": [1, 2, 3]}, {"M": 10_000_000, "seeds": [1, 2, 3, 4, 5]})
        | {"n": 7, "grid": {"N_delta": 10}, "regression": {"b_s": 4, "b_x": 1}},
        _delta_sweep,
        "lag-ls* vs nm-ls as the window grows to the maturity",
    ),
    "lag-sweep": Experiment(
        "lag-sweep",
        lambda s: _scaled(s, {"M": 500_000, "seeds": [1, 2, 3]}, {"M": 10_000_000, "seeds": [1, 2, 3, 4, 5]})
        | {"n": 10, "grid": {"N_delta": 5, "N_lag": 25}, "regression": {"b_s": 4, "b_x": 1}},
        _lag_sweep,
        "delayed window (N_delta = 5): lag-ls* vs nm-ls as the lag grows",
    ),
    "lag-window-sweep": Experiment(
        "lag-window-sweep",
        lambda s: _scaled(s, {"M": 500_000, "seeds": [1, 2, 3]}, {"M": 10_000_000, "seeds": [1, 2, 3, 4, 5]})
        | {"n": 10, "grid": {"N_delta": 5, "N_lag": 20}, "regression": {"b_s": 4, "b_x": 1}},
        _lag_window_sweep,
        "fixed lag N_lag = 20: lag-ls* vs nm-ls as the window grows",
    ),
    "bermudan-convergence": Experiment(
        "bermudan-convergence",
        lambda s: _scaled(s, {"M": 500_000, "seeds": [1, 2, 3]}, {"M": 20_000_000, "seeds": [1, 2, 3, 4, 5]})
        | {"grid": {"T": 0.5, "N": 40, "N_delta": 8}, "regression": {"b_s": 2, "b_x": 1}},
        _bermudan_convergence,
        "lag-ls* (n = 1..7, dt = 1/80) vs m-ls (N_delta = 2..8) at T = 0.5, window 0.1",
    ),
}
