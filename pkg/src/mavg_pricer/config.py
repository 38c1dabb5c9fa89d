"""Experiment configuration: defaults, presets, JSON files and ``--key=value`` flags."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .lsmc import MLS_MAX_DIM, Method, Payoff
from .market import GBMModel, TimeGrid
from .regression import RegressionSpec

SCHEMA_VERSION = 1

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "model": {"s0": 100.0, "r": 0.05, "sigma": 0.3},
    "grid": {"T": 0.2, "N": 50, "N_delta": 5, "N_lag": 0},
    "payoff": {"kind": "ma-call", "strike": 100.0},
    "method": "nm-ls",
    "n": None,
    "regression": {"b_s": 2, "b_x": 2},
    "M": 500_000,
    "seeds": [1, 2, 3],
    "sweep": None,
    "scale": "desk",
    "out": "results",
}

ALIASES = {"bS": "b_s", "bX": "b_x", "Ndelta": "N_delta", "Nlag": "N_lag", "N_l": "N_lag"}
LIST_KEYS = {"seeds", "sweep", "b_x"}


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    """Resolved configuration of one experiment run."""

    model: GBMModel
    grid: TimeGrid
    payoff: Payoff
    method: Method
    n: int | None
    b_s: int
    b_x: int | list[int]
    M: int
    seeds: list[int]
    sweep: list | None
    scale: str
    out: Path
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def delta(self) -> float:
        return self.grid.delta

    @property
    def lag(self) -> float:
        return self.grid.lag

    def regression_spec(self, method: Method | None = None, grid: TimeGrid | None = None, n: int | None = None) -> RegressionSpec:
        method = method or self.method
        grid = grid or self.grid
        n = self.n if n is None else n
        return RegressionSpec.for_state(state_dim(method, grid, n), self.b_s, self.b_x)

    def header_lines(self) -> list[str]:
        """Resolved config as comment lines for CSV provenance."""
        return ["# config: " + json.dumps(self.raw, sort_keys=True)]


def state_dim(method: Method, grid: TimeGrid, n: int | None) -> int:
    if method.uses_laguerre:
        return (n or 0) + 1
    if method is Method.NM_LS:
        return 2
    return grid.N_delta + grid.N_lag


def load_schema() -> dict:
    text = resources.files("mavg_pricer").joinpath("schemas/experiment-config.v1.json").read_text()
    return json.loads(text)


def _deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(key: str, text: str):
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        if "," in text or key in LIST_KEYS:
            return [_parse_value("", part) for part in text.split(",") if part]
        return text
    if key in LIST_KEYS and not isinstance(value, list) and key != "b_x":
        return [value]
    return value


def _resolve_path(key: str) -> list[str]:
    parts = [ALIASES.get(p, p) for p in key.split(".")]
    if len(parts) > 1:
        return parts
    leaf = parts[0]
    if leaf in DEFAULTS:
        return [leaf]
    owners = [sect for sect, val in DEFAULTS.items() if isinstance(val, dict) and leaf in val]
    if len(owners) == 1:
        return [owners[0], leaf]
    raise ConfigError(f"unknown config key {key!r}")


def flags_to_overrides(flags: list[str]) -> dict:
    """Turn ``["--grid.N_delta=5", "--seeds=1,2"]`` into a nested override dict."""
    out: dict = {}
    for flag in flags:
        body = flag[2:] if flag.startswith("--") else flag
        if "=" not in body:
            raise ConfigError(f"expected --key=value, got {flag!r}")
        key, text = body.split("=", 1)
        path = _resolve_path(key)
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = _parse_value(path[-1], text)
    return out


def merge_config(preset: dict | None = None, file: str | Path | None = None, flags: list[str] | None = None) -> dict:
    """Merge defaults <- preset <- file <- flags into a raw dict (not yet validated)."""
    raw = _deep_merge(DEFAULTS, preset or {})
    if file is not None:
        path = Path(file)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            raw = _deep_merge(raw, json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if flags:
        raw = _deep_merge(raw, flags_to_overrides(flags))
    return raw


def build_config(raw: dict, pricing: bool = True) -> ExperimentConfig:
    """Validate a merged raw dict and build typed objects.

    ``pricing=False`` skips the pricing preconditions (order and path count).
    """
    if isinstance(raw.get("method"), str):
        try:
            raw = {**raw, "method": Method.parse(raw["method"]).value}
        except ValueError:
            pass  # left for the schema to report
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    try:
        model = GBMModel(**raw["model"])
        grid = TimeGrid(**raw["grid"])
        payoff = Payoff(**raw["payoff"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig(
        model=model,
        grid=grid,
        payoff=payoff,
        method=Method.parse(raw["method"]),
        n=raw["n"],
        b_s=raw["regression"]["b_s"],
        b_x=raw["regression"]["b_x"],
        M=raw["M"],
        seeds=list(raw["seeds"]),
        sweep=raw["sweep"],
        scale=raw["scale"],
        out=Path(raw["out"]),
        raw=raw,
    )
    if cfg.n is not None:
        check_order(cfg.n, cfg.grid)
    if pricing:
        check_point(cfg, cfg.method, cfg.grid, cfg.n)
    return cfg


def check_order(n: int, grid: TimeGrid) -> None:
    """Laguerre order bound: the first regression needs ``n <= N_delta + N_lag - 1``."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if n > grid.first_exercise - 1:
        raise ConfigError(
            f"n = {n} violates n <= N_delta + N_lag - 1 = {grid.first_exercise - 1} "
            f"(N_delta = {grid.N_delta}, N_lag = {grid.N_lag})"
        )


def check_point(cfg: ExperimentConfig, method: Method, grid: TimeGrid, n: int | None) -> None:
    """Preconditions of one pricing run; raises :class:`ConfigError`."""
    if method.uses_laguerre:
        if n is None:
            raise ConfigError(f"method {method.value} needs an order n")
        check_order(n, grid)
    if method is Method.M_LS and grid.N_delta + grid.N_lag > MLS_MAX_DIM:
        raise ConfigError(f"m-ls needs N_delta + N_lag <= {MLS_MAX_DIM}, got {grid.N_delta + grid.N_lag}")
    try:
        spec = cfg.regression_spec(method, grid, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.M < spec.min_paths:
        raise ConfigError(f"M = {cfg.M} is below {spec.min_paths} paths needed for {spec.n_cells} regression cells")


def parse_config(preset: dict | None = None, file=None, flags=None, pricing: bool = True) -> ExperimentConfig:
    return build_config(merge_config(preset, file, flags), pricing=pricing)
