"""Adaptive local-basis regression.

The sample is partitioned by recursive empirical-quantile splits, first along
coordinate 0, then within each group along coordinate 1, and so on. Every
terminal cell holds roughly the same number of points and carries its own
affine least-squares fit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

# relative pivot size below which a (scaled, centred) coordinate is dropped
RANK_TOL = 1e-10


class InsufficientPaths(ValueError):
    """Too few sample points for the requested number of cells."""


class DegenerateCell(UserWarning):
    """A cell's design matrix was rank-deficient; some slopes were dropped."""


@dataclass(frozen=True)
class RegressionSpec:
    """Cells per coordinate and the minimum population of a cell."""

    cells_per_dim: tuple[int, ...]
    min_points_per_cell: int | None = None

    def __post_init__(self):
        cells = tuple(int(b) for b in self.cells_per_dim)
        if not cells or any(b < 1 for b in cells):
            raise ValueError(f"cells_per_dim entries must be >= 1, got {self.cells_per_dim}")
        object.__setattr__(self, "cells_per_dim", cells)
        if self.min_points_per_cell is None:
            object.__setattr__(self, "min_points_per_cell", 2 * (len(cells) + 1))
        elif self.min_points_per_cell < 1:
            raise ValueError("min_points_per_cell must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.cells_per_dim)

    @property
    def n_cells(self) -> int:
        return math.prod(self.cells_per_dim)

    @property
    def min_paths(self) -> int:
        return self.min_points_per_cell * self.n_cells

    @classmethod
    def for_state(cls, dim: int, b_s: int, b_x) -> "RegressionSpec":
        """``b_s`` cells along the price, ``b_x`` (scalar or sequence) along the rest."""
        rest = dim - 1
        if np.ndim(b_x) == 0:
            bx = [int(b_x)] * rest
        else:
            bx = [int(b) for b in b_x]
            if len(bx) != rest:
                raise ValueError(f"need {rest} cell counts for the non-price coordinates, got {len(bx)}")
        return cls((int(b_s), *bx))


@dataclass
class LocalBasisRegressor:
    """Fitted piecewise-affine regressor.

    Attributes
    ----------
    cells_per_dim : tuple of int
    thresholds : list
        Per coordinate, ``None`` (no split) or an array ``(parent_cells, b - 1)``
        of lower bounds of groups ``1..b-1``.
    intercepts, slopes : ndarray
        Affine fit per cell, ``(n_cells,)`` and ``(n_cells, d)``.
    labels : ndarray
        Cell of each training point.
    fitted : ndarray
        In-sample predictions.
    """

    cells_per_dim: tuple[int, ...]
    thresholds: list
    intercepts: np.ndarray
    slopes: np.ndarray
    labels: np.ndarray
    fitted: np.ndarray
    degenerate_cells: int = 0
    cell_counts: np.ndarray = field(default=None)

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Cell index of arbitrary points (edges extend to infinity)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        labels = np.zeros(points.shape[0], dtype=np.int64)
        for dim, (b, thr) in enumerate(zip(self.cells_per_dim, self.thresholds)):
            if thr is None:
                labels = labels * b
                continue
            sub = (points[:, dim, None] >= thr[labels]).sum(axis=1)
            labels = labels * b + sub
        return labels

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        cells = self.cell_of(points)
        return self.intercepts[cells] + np.einsum("ij,ij->i", points, self.slopes[cells])


def _split_segment(x: np.ndarray, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Group index (0..b-1) of each value by empirical quantiles, plus group lower bounds.

    Group ``g`` starts at rank ``ceil(g * count / b)``. Ties are broken by
    position in ``x``.
    """
    count = x.shape[0]
    if count == 0:
        return np.zeros(0, dtype=np.int64), np.full(b - 1, np.inf)
    g = np.arange(1, b)
    kth = np.minimum(-((-g * count) // b), count - 1)
    thr = np.partition(x, kth)[kth]
    if np.all(np.count_nonzero(x[:, None] == thr[None, :], axis=0) <= 1):
        return np.searchsorted(thr, x, side="right"), thr
    # ties at a boundary: rank explicitly with a stable sort
    order = np.argsort(x, kind="stable")
    sub = np.empty(count, dtype=np.int64)
    sub[order] = (np.arange(count) * b) // count
    return sub, x[order][kth]


def _split(points: np.ndarray, cells_per_dim) -> tuple[np.ndarray, list, np.ndarray]:
    """Assign cells; also return a permutation grouping the points by cell.

    Within a cell the permutation keeps increasing path index.
    """
    M = points.shape[0]
    labels = np.zeros(M, dtype=np.int64)
    order = np.arange(M)
    bounds = np.array([0, M])
    thresholds = []
    for dim, b in enumerate(cells_per_dim):
        parents = len(bounds) - 1
        if b == 1:
            thresholds.append(None)
            continue
        thr = np.empty((parents, b - 1))
        new_bounds = np.empty(parents * b + 1, dtype=np.int64)
        new_bounds[0] = 0
        for c in range(parents):
            lo, hi = bounds[c], bounds[c + 1]
            seg = order[lo:hi]
            sub, thr[c] = _split_segment(points[seg, dim], b)
            labels[seg] = c * b + sub
            order[lo:hi] = seg[np.argsort(sub, kind="stable")]
            new_bounds[c * b + 1 : c * b + b + 1] = lo + np.cumsum(np.bincount(sub, minlength=b))
        thresholds.append(thr)
        bounds = new_bounds
    return labels, thresholds, order


def _cell_fit(X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, bool]:
    """Affine OLS on one cell with rank-revealing QR; returns (intercept, slopes, degenerate)."""
    d = X.shape[1]
    xm = X.mean(axis=0)
    ym = y.mean()
    slopes = np.zeros(d)
    if X.shape[0] < 2 or d == 0:
        return ym, slopes, d > 0
    Xc = X - xm
    scale = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    live = scale > RANK_TOL * np.maximum(np.abs(xm), 1.0) * math.sqrt(X.shape[0])
    degenerate = not np.all(live)
    if np.any(live):
        Z = Xc[:, live] / scale[live]
        Q, R, piv = scipy.linalg.qr(Z, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > RANK_TOL * diag[0]))
        if rank < Z.shape[1]:
            degenerate = True
        coef = np.zeros(Z.shape[1])
        if rank:
            rhs = Q[:, :rank].T @ (y - ym)
            coef[piv[:rank]] = scipy.linalg.solve_triangular(R[:rank, :rank], rhs)
        slopes[live] = coef / scale[live]
    return ym - xm @ slopes, slopes, degenerate


def fit_local_basis(points, responses, spec: RegressionSpec | tuple) -> LocalBasisRegressor:
    """Fit the adaptive local-basis regression of ``responses`` on ``points``.

    Raises
    ------
    InsufficientPaths
        If ``M < min_points_per_cell * prod(cells_per_dim)``.
    """
    if not isinstance(spec, RegressionSpec):
        spec = RegressionSpec(tuple(spec))
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    y = np.asarray(responses, dtype=float)
    M, d = points.shape
    if d != spec.dim:
        raise ValueError(f"points have {d} coordinates, spec has {spec.dim}")
    if y.shape != (M,):
        raise ValueError("responses must be one value per point")
    if M < spec.min_paths:
        raise InsufficientPaths(
            f"{M} points < {spec.min_points_per_cell} per cell x {spec.n_cells} cells"
        )

    labels, thresholds, order = _split(points, spec.cells_per_dim)
    n_cells = spec.n_cells
    counts = np.bincount(labels, minlength=n_cells)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    intercepts = np.zeros(n_cells)
    slopes = np.zeros((n_cells, d))
    degenerate = 0
    for c in range(n_cells):
        if counts[c] == 0:
            continue
        idx = order[bounds[c] : bounds[c + 1]]
        intercepts[c], slopes[c], bad = _cell_fit(points[idx], y[idx])
        degenerate += bad
    if degenerate:
        logger.debug("%d of %d cells were rank-deficient", degenerate, n_cells)
    fitted = intercepts[labels] + np.einsum("ij,ij->i", points, slopes[labels])
    return LocalBasisRegressor(
        cells_per_dim=spec.cells_per_dim,
        thresholds=thresholds,
        intercepts=intercepts,
        slopes=slopes,
        labels=labels,
        fitted=fitted,
        degenerate_cells=degenerate,
        cell_counts=counts,
    )
