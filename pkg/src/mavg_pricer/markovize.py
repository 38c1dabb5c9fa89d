"""Laguerre state processes along simulated paths.

With the price held at ``S_{i+1}`` on ``(t_i, t_{i+1}]`` the Laguerre states
obey the linear ODE ``dX/dt = -A_p X + sqrt(2p) 1 S`` where ``A_p`` has ``p``
on the diagonal and ``2p`` below it. One grid step is therefore exactly
``X_{i+1} = E X_i + w S_{i+1}`` with ``E = exp(-A_p dt)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .laguerre import LaguerreBasis, laguerre_definite_integrals, laguerre_poly_all
from .market import PathSet, TimeGrid
from .weighting import LaguerreProjection


def generator_matrix(basis: LaguerreBasis) -> np.ndarray:
    """``A_p``: ``p`` on the diagonal, ``2p`` strictly below."""
    n, p = basis.n, basis.p
    return p * np.eye(n) + 2 * p * np.tril(np.ones((n, n)), -1)


def transition_matrix(basis: LaguerreBasis, dt: float) -> np.ndarray:
    """``exp(-A_p dt)`` in closed form.

    ``A_p = p I + 2p L`` with ``L`` nilpotent, so the exponential is the finite
    sum ``e^{-p dt} sum_m (-2p dt L)^m / m!``. Its ``d``-th subdiagonal equals
    ``e^{-p dt} (P_d(x) - P_{d-1}(x))`` at ``x = 2 p dt`` (generalized Laguerre
    polynomial of parameter -1), which is evaluated by the stable recurrence.
    """
    n, p = basis.n, basis.p
    x = 2 * p * dt
    polys = laguerre_poly_all(n, x)
    E = np.zeros((n, n))
    diag = math.exp(-p * dt)
    for d in range(n):
        coef = 1.0 if d == 0 else polys[d] - polys[d - 1]
        idx = np.arange(d, n)
        E[idx, idx - d] = diag * coef
    return E


def transition_matrix_series(basis: LaguerreBasis, dt: float) -> np.ndarray:
    """Same as :func:`transition_matrix` by summing the nilpotent power series."""
    n, p = basis.n, basis.p
    L = np.tril(np.ones((n, n)), -1)
    term = np.eye(n)
    total = np.eye(n)
    for m in range(1, n):
        term = term @ (-2 * p * dt * L) / m
        total = total + term
    return math.exp(-p * dt) * total


@dataclass(frozen=True)
class StateTransition:
    """One-step propagator ``X -> E X + w S`` of the Laguerre states."""

    basis: LaguerreBasis
    dt: float
    E: np.ndarray
    w: np.ndarray

    @classmethod
    def build(cls, basis: LaguerreBasis, dt: float) -> "StateTransition":
        E = transition_matrix(basis, dt)
        v = basis.initial_state
        return cls(basis=basis, dt=dt, E=E, w=v - E @ v)

    @property
    def fixed_point(self) -> np.ndarray:
        """States of a constant unit price."""
        return self.basis.initial_state

    def initial(self, s0: np.ndarray | float, M: int | None = None) -> np.ndarray:
        s0 = np.broadcast_to(np.asarray(s0, dtype=float), (M,) if M is not None else np.shape(s0))
        return s0[:, None] * self.basis.initial_state[None, :]

    def step(self, states: np.ndarray, price_next: np.ndarray) -> np.ndarray:
        """Advance states of shape ``(M, n)`` by one grid step."""
        return states @ self.E.T + price_next[:, None] * self.w[None, :]


@dataclass(frozen=True)
class StateTensor:
    """Laguerre states ``(M, N + 1, n)`` and the approximate moving average ``(M, N + 1)``."""

    states: np.ndarray
    approx_ma: np.ndarray
    projection: LaguerreProjection


def propagate_states(paths: PathSet | np.ndarray, projection: LaguerreProjection | LaguerreBasis, grid: TimeGrid) -> np.ndarray:
    """Laguerre states at every grid date, shape ``(M, N + 1, n)``."""
    prices = paths.prices if isinstance(paths, PathSet) else np.asarray(paths, dtype=float)
    basis = projection.basis if isinstance(projection, LaguerreProjection) else projection
    if prices.ndim != 2 or prices.shape[1] != grid.N + 1:
        raise ValueError(f"expected paths with {grid.N + 1} dates, got shape {prices.shape}")
    trans = StateTransition.build(basis, grid.dt)
    M = prices.shape[0]
    out = np.empty((M, grid.N + 1, basis.n))
    out[:, 0] = trans.initial(prices[:, 0], M)
    for i in range(grid.N):
        out[:, i + 1] = trans.step(out[:, i], prices[:, i + 1])
    return out


def assemble_approx_ma(states: np.ndarray, paths: PathSet | np.ndarray, projection: LaguerreProjection) -> np.ndarray:
    """``correction * S_{t_i} + sum_k a_k X^k_{t_i}`` at every date."""
    prices = paths.prices if isinstance(paths, PathSet) else np.asarray(paths, dtype=float)
    return projection.correction * prices + states @ projection.a


def markovize(paths: PathSet, projection: LaguerreProjection) -> StateTensor:
    """Convenience wrapper: states plus approximate moving average."""
    states = propagate_states(paths, projection, paths.grid)
    return StateTensor(states=states, approx_ma=assemble_approx_ma(states, paths, projection), projection=projection)


def states_by_summation(prices: np.ndarray, basis: LaguerreBasis, dt: float) -> np.ndarray:
    """Direct summation of price increments against integrated Laguerre functions.

    ``X^k_{t_i} = sum_{j=1..i} (S_j - S_{j-1}) int_0^{(i-j+1) dt} L^p_k + S_0 (-1)^k sqrt(2p)/p``.
    Quadratic in the number of steps; used to cross-check the recursion.
    """
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    M, N1 = prices.shape
    n = basis.n
    # kernel[m] = int_0^{m dt} L^p_k, m = 1..N
    lengths = dt * np.arange(1, N1)
    kernel = laguerre_definite_integrals(basis.p, n - 1, np.zeros_like(lengths), lengths).T
    incr = np.diff(prices, axis=1)
    out = np.empty((M, N1, n))
    out[:, 0] = prices[:, :1] * basis.initial_state[None, :]
    for i in range(1, N1):
        # increment j (1-based) gets kernel index i - j + 1 -> kernel row i - j
        weights = kernel[i - np.arange(1, i + 1)]
        out[:, i] = incr[:, :i] @ weights + prices[:, :1] * basis.initial_state[None, :]
    return out
