"""Least-squares Monte Carlo for Bermudan options on moving averages.

Four ways of choosing the regression state and the exercise payoff:

``lag-ls``
    State ``(S, X^0..X^{n-1})`` (Laguerre states), payoff on the Laguerre
    approximation of the moving average.
``lag-ls*``
    Same state, payoff on the exact discrete moving average.
``nm-ls``
    State ``(S, X)``: price and exact moving average only.
``m-ls``
    State ``(S_i, S_{i-1}, ...)``: the full window of past prices, exact but
    limited to a handful of dimensions.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .laguerre import LaguerreBasis
from .market import GBMModel, PathSet, TimeGrid, moving_average_at, simulate_paths
from .markovize import StateTransition
from .regression import RegressionSpec, fit_local_basis
from .weighting import LaguerreProjection, WeightingScheme, optimal_projection

logger = logging.getLogger(__name__)

MLS_MAX_DIM = 8


class Method(str, enum.Enum):
    LAG_LS = "lag-ls"
    LAG_LS_STAR = "lag-ls*"
    NM_LS = "nm-ls"
    M_LS = "m-ls"

    @property
    def uses_laguerre(self) -> bool:
        return self in (Method.LAG_LS, Method.LAG_LS_STAR)

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"lagls": "lag-ls", "lagls*": "lag-ls*", "laglsstar": "lag-ls*", "lag-ls-star": "lag-ls*",
                   "lag-lsstar": "lag-ls*", "nmls": "nm-ls", "mls": "m-ls"}
        return cls(aliases.get(key, key))


class CapacityError(ValueError):
    """The requested configuration exceeds what the method supports."""


@dataclass(frozen=True)
class Payoff:
    """Exercise payoff ``phi(s, x)`` of the price ``s`` and moving average ``x``.

    ``kind`` is ``"ma-call"`` for ``(s - x)^+`` or ``"fixed-call"`` for
    ``(s - strike)^+``.
    """

    kind: str = "ma-call"
    strike: float = 100.0

    def __post_init__(self):
        if self.kind not in ("ma-call", "fixed-call"):
            raise ValueError(f"unknown payoff {self.kind!r}")

    def __call__(self, s: np.ndarray, x: np.ndarray | None) -> np.ndarray:
        if self.kind == "ma-call":
            return np.maximum(s - x, 0.0)
        return np.maximum(s - self.strike, 0.0)


@dataclass
class PricingResult:
    """Aggregate of one or more independent valuations."""

    method: str
    price: float
    mc_std_error: float
    n_valuations: int
    per_valuation_prices: list[float]
    per_valuation_std_errors: list[float]
    mean_exercise_step: float
    runtime_seconds: float
    fingerprint: str
    seeds: list[int]
    n: int | None = None
    p: float | None = None
    degenerate_cells: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def rel_std(self) -> float:
        """Sample standard deviation of the valuations over their mean (0 for one valuation)."""
        if self.n_valuations < 2 or self.price == 0:
            return 0.0
        return float(np.std(self.per_valuation_prices, ddof=1) / abs(self.price))


def seed_list_hash(seeds: Sequence[int]) -> str:
    return hashlib.sha256(",".join(str(int(s)) for s in seeds).encode()).hexdigest()[:12]


def _fingerprint(**parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _reverse_dates(first: int, last: int) -> range:
    return range(last, first - 1, -1)


def reverse_states(prices: np.ndarray, trans: StateTransition, first: int, last: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(i, states_i)`` for ``i = last .. first`` in decreasing order.

    Keeps checkpoints every ``B ~ sqrt(last - first)`` dates and recomputes the
    states of one block at a time, so memory stays at ``O(M n sqrt(N))``.
    """
    M = prices.shape[0]
    span = last - first + 1
    block = max(1, math.isqrt(span))
    states = trans.initial(prices[:, 0], M)
    for i in range(1, first + 1):
        states = trans.step(states, prices[:, i])
    checkpoints = {first: states}
    for i in range(first + 1, last + 1):
        states = trans.step(states, prices[:, i])
        if (i - first) % block == 0:
            checkpoints[i] = states
    starts = sorted(checkpoints, reverse=True)
    end = last
    for start in starts:
        seg = [checkpoints[start]]
        for i in range(start + 1, end + 1):
            seg.append(trans.step(seg[-1], prices[:, i]))
        for offset in range(len(seg) - 1, -1, -1):
            yield start + offset, seg[offset]
        end = start - 1
        del seg


@dataclass(frozen=True)
class _Valuation:
    price: float
    std_error: float
    mean_exercise_step: float
    degenerate_cells: int


def _check(method: Method, grid: TimeGrid, n: int | None, spec: RegressionSpec, M: int) -> None:
    if method.uses_laguerre:
        if n is None or n < 1:
            raise ValueError("Laguerre methods need an order n >= 1")
        limit = grid.first_exercise - 1
        if n > limit:
            raise CapacityError(
                f"n = {n} violates n <= N_delta + N_lag - 1 = {limit}: the first regression would be degenerate"
            )
        expected = n + 1
    elif method is Method.NM_LS:
        expected = 2
    else:
        expected = grid.N_delta + grid.N_lag
        if expected > MLS_MAX_DIM:
            raise CapacityError(f"m-ls state dimension {expected} exceeds the supported maximum {MLS_MAX_DIM}")
    if spec.dim != expected:
        raise ValueError(f"{method.value} regresses on {expected} coordinates, spec has {spec.dim}")
    if M < spec.min_paths:
        raise ValueError(f"M = {M} paths is below the {spec.min_paths} needed for {spec.n_cells} cells")


def run_valuation(
    method: Method,
    paths: PathSet,
    payoff: Payoff,
    spec: RegressionSpec,
    projection: LaguerreProjection | None = None,
) -> _Valuation:
    """Backward induction on one simulated path set."""
    grid, model = paths.grid, paths.model
    prices = paths.prices
    M = prices.shape[0]
    first, last = grid.first_exercise, grid.N
    disc = math.exp(-model.r * grid.dt)

    if method.uses_laguerre:
        trans = StateTransition.build(projection.basis, grid.dt)
        state_iter = reverse_states(prices, trans, first, last)
    else:
        state_iter = ((i, None) for i in _reverse_dates(first, last))

    def date_inputs(i: int, lag_states) -> tuple[np.ndarray, np.ndarray]:
        """Exercise value and regression coordinates at date ``i``."""
        s = prices[:, i]
        exact = None if method is Method.LAG_LS else moving_average_at(prices, i, grid.N_delta, grid.N_lag)
        if method is Method.LAG_LS:
            now = payoff(s, projection.correction * s + lag_states @ projection.a)
        else:
            now = payoff(s, exact)
        if method.uses_laguerre:
            coords = np.column_stack([s, lag_states])
        elif method is Method.NM_LS:
            coords = np.column_stack([s, exact])
        else:
            width = grid.N_delta + grid.N_lag
            coords = prices[:, i - width + 1 : i + 1][:, ::-1]
        return now, coords

    i, st = next(state_iter)
    value, _ = date_inputs(i, st)
    stop = np.full(M, last, dtype=np.int64)
    degenerate = 0
    for i, st in state_iter:
        value *= disc
        now, coords = date_inputs(i, st)
        reg = fit_local_basis(coords, value, spec)
        degenerate += reg.degenerate_cells
        ex = now >= reg.fitted
        value[ex] = now[ex]
        stop[ex] = i
    pv = value * math.exp(-model.r * first * grid.dt)
    se = float(np.std(pv, ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    return _Valuation(float(pv.mean()), se, float(stop.mean()), degenerate)


def price(
    method,
    model: GBMModel,
    grid: TimeGrid,
    payoff: Payoff,
    M: int,
    spec: RegressionSpec,
    seeds: Sequence[int],
    *,
    n: int | None = None,
    scheme: WeightingScheme | None = None,
    projection: LaguerreProjection | None = None,
    increments: Callable | None = None,
) -> PricingResult:
    """Price a Bermudan moving-average option, one valuation per seed.

    For the Laguerre methods the scale is optimized for ``scheme`` (by default
    the grid's window and lag) unless an explicit ``projection`` is given.
    """
    method = Method.parse(method)
    if not seeds:
        raise ValueError("need at least one seed")
    if projection is not None:
        n = projection.basis.n
    _check(method, grid, n, spec, M)
    if method.uses_laguerre and projection is None:
        scheme = scheme or WeightingScheme.delayed(grid.delta, grid.lag)
        projection = optimal_projection(scheme, n)

    t0 = time.perf_counter()
    vals = []
    for seed in seeds:
        paths = simulate_paths(model, grid, M, int(seed), increments=increments)
        vals.append(run_valuation(method, paths, payoff, spec, projection))
        logger.info("%s seed=%s price=%.6f se=%.2g", method.value, seed, vals[-1].price, vals[-1].std_error)
        del paths
    runtime = time.perf_counter() - t0

    prices = [v.price for v in vals]
    ses = np.array([v.std_error for v in vals])
    k = len(vals)
    fingerprint = _fingerprint(
        method=method.value, model=asdict(model), grid=asdict(grid), payoff=asdict(payoff), M=M,
        cells=spec.cells_per_dim, seeds=list(map(int, seeds)), n=n,
        p=None if projection is None else projection.basis.p,
    )
    return PricingResult(
        method=method.value,
        price=float(np.mean(prices)),
        # path-level standard error of the pooled estimate
        mc_std_error=float(math.sqrt(np.sum(ses**2)) / k),
        n_valuations=k,
        per_valuation_prices=prices,
        per_valuation_std_errors=ses.tolist(),
        mean_exercise_step=float(np.mean([v.mean_exercise_step for v in vals])),
        runtime_seconds=runtime,
        fingerprint=fingerprint,
        seeds=[int(s) for s in seeds],
        n=n if method.uses_laguerre else None,
        p=None if projection is None else projection.basis.p,
        degenerate_cells=sum(v.degenerate_cells for v in vals),
    )


def convergence_sweep(method, points: Sequence[dict], shared: dict) -> list[PricingResult]:
    """Price ``method`` at every sweep point, all with the same seed list.

    Each point is a dict of overrides of ``shared`` (the keyword arguments of
    :func:`price`), e.g. ``{"n": 3}`` or ``{"grid": TimeGrid(...)}``.
    """
    results = []
    for point in points:
        kwargs = {**shared, **point}
        results.append(price(method, **kwargs))
    return results
