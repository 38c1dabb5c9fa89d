"""Black-Scholes path simulation on the exercise grid and exact moving averages."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

# Paths are drawn in fixed-size blocks, each with its own Philox stream keyed
# by (seed, block index); the output never depends on the worker count.
PATH_BLOCK = 1 << 14


@dataclass(frozen=True)
class GBMModel:
    """Risk-neutral geometric Brownian motion ``dS = S (r dt + sigma dW)``."""

    s0: float = 100.0
    r: float = 0.05
    sigma: float = 0.3

    def __post_init__(self):
        for name in ("s0", "r", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.s0 <= 0:
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant grid ``t_i = i T / N`` with averaging window and lag in steps."""

    T: float = 0.2
    N: int = 50
    N_delta: int = 5
    N_lag: int = 0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"maturity T must be positive, got {self.T}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.N_delta < 1:
            raise ValueError(f"N_delta must be >= 1 (window must contain at least one step), got {self.N_delta}")
        if self.N_lag < 0:
            raise ValueError(f"N_lag must be >= 0, got {self.N_lag}")
        if self.N_delta + self.N_lag > self.N:
            raise ValueError(
                f"N_delta + N_lag = {self.N_delta + self.N_lag} exceeds N = {self.N}: no exercise date left"
            )

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def delta(self) -> float:
        return self.N_delta * self.dt

    @property
    def lag(self) -> float:
        return self.N_lag * self.dt

    @property
    def first_exercise(self) -> int:
        return self.N_delta + self.N_lag

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt


@dataclass(frozen=True)
class PathSet:
    """Simulated prices, shape ``(M, N + 1)`` with column 0 equal to ``s0``."""

    prices: np.ndarray
    seed: int
    model: GBMModel
    grid: TimeGrid

    @property
    def M(self) -> int:
        return self.prices.shape[0]


def max_workers() -> int:
    env = os.environ.get("MAVG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def block_normals(seed: int, block: int, rows: int, steps: int) -> np.ndarray:
    """Standard normals for one path block; a pure function of its arguments."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, block])
    rng = np.random.Generator(np.random.Philox(ss))
    return rng.standard_normal((rows, steps))


def simulate_paths(model: GBMModel, grid: TimeGrid, M: int, seed: int, *, increments=None) -> PathSet:
    """Simulate ``M`` paths by exact log-normal stepping.

    ``increments(seed, block, rows, steps)`` can replace the normal draws
    (used by tests with two-point increments).
    """
    if M < 1:
        raise ValueError(f"path count M must be >= 1, got {M}")
    draw = increments or block_normals
    N, dt = grid.N, grid.dt
    drift = (model.r - 0.5 * model.sigma**2) * dt
    vol = model.sigma * math.sqrt(dt)
    # column-major: the pricer reads one date (column) at a time
    prices = np.empty((M, N + 1), order="F")
    prices[:, 0] = model.s0

    def fill(block: int) -> None:
        lo = block * PATH_BLOCK
        hi = min(lo + PATH_BLOCK, M)
        z = draw(seed, block, hi - lo, N)
        np.cumsum(drift + vol * z, axis=1, out=prices[lo:hi, 1:])
        np.exp(prices[lo:hi, 1:], out=prices[lo:hi, 1:])
        prices[lo:hi, 1:] *= model.s0

    blocks = range((M + PATH_BLOCK - 1) // PATH_BLOCK)
    workers = min(max_workers(), len(blocks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for b in blocks:
            fill(b)
    return PathSet(prices=prices, seed=seed, model=model, grid=grid)


def moving_average_at(prices: np.ndarray, i: int, N_delta: int, N_lag: int = 0) -> np.ndarray:
    """Exact discrete (delayed) moving average at date index ``i``.

    Averages ``S_j`` for ``j = i - N_lag - N_delta + 1 .. i - N_lag``;
    indices below zero contribute ``S_0``.
    """
    hi = i - N_lag
    lo = hi - N_delta + 1
    total = prices[:, max(lo, 0) : max(hi, -1) + 1].sum(axis=1)
    missing = min(hi, -1) - lo + 1 if lo < 0 else 0
    if missing > 0:
        total = total + missing * prices[:, 0]
    return total / N_delta


def exact_moving_average(paths: PathSet | np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Matrix ``(M, N + 1)`` of exact discrete moving averages at every date."""
    prices = paths.prices if isinstance(paths, PathSet) else np.asarray(paths, dtype=float)
    if prices.shape[1] != grid.N + 1:
        raise ValueError(f"paths have {prices.shape[1]} dates, grid expects {grid.N + 1}")
    out = np.empty_like(prices)
    for i in range(grid.N + 1):
        out[:, i] = moving_average_at(prices, i, grid.N_delta, grid.N_lag)
    return out
