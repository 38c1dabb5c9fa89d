"""Weighting measures of moving averages and their Laguerre projections."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .laguerre import LaguerreBasis, laguerre_definite_integrals, laguerre_integral_to_infinity

logger = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class WeightingScheme:
    """Point mass at lag 0 plus a piecewise-constant density.

    The moving average is ``M_t = K_0 S_t + int_0^inf h(u) S_{t-u} du`` with
    ``K_0 = point_mass_at_zero`` and ``h`` equal to ``height`` on each
    ``[start, end)`` of ``density_pieces``.
    """

    point_mass_at_zero: float = 0.0
    density_pieces: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        pieces = tuple(sorted((float(u), float(v), float(h)) for u, v, h in self.density_pieces))
        for u, v, h in pieces:
            if not (0 <= u < v and math.isfinite(v) and math.isfinite(h)):
                raise ValueError(f"invalid density piece [{u}, {v}) with height {h}")
        for (_, v0, _), (u1, _, _) in zip(pieces, pieces[1:]):
            if u1 < v0:
                raise ValueError("density pieces overlap")
        object.__setattr__(self, "density_pieces", pieces)

    @classmethod
    def uniform(cls, window: float) -> "WeightingScheme":
        """Equal weights ``1/window`` on ``[0, window)``."""
        return cls.delayed(window, 0.0)

    @classmethod
    def delayed(cls, window: float, lag: float) -> "WeightingScheme":
        """Equal weights ``1/window`` on ``[lag, lag + window)``."""
        if not window > 0:
            raise ValueError(f"window must be positive, got {window}")
        if lag < 0:
            raise ValueError(f"lag must be non-negative, got {lag}")
        return cls(0.0, ((lag, lag + window, 1.0 / window),))

    @property
    def density_mass(self) -> float:
        return sum(h * (v - u) for u, v, h in self.density_pieces)

    @property
    def total_mass(self) -> float:
        return self.point_mass_at_zero + self.density_mass

    @property
    def support_end(self) -> float:
        return max((v for _, v, _ in self.density_pieces), default=0.0)

    @property
    def shortest_piece(self) -> float:
        return min((v - u for u, v, _ in self.density_pieces), default=self.support_end)

    def breakpoints(self) -> np.ndarray:
        pts = {0.0}
        for u, v, _ in self.density_pieces:
            pts.update((u, v))
        return np.array(sorted(pts))

    def survival(self, x):
        """Survival function ``H(x) = mu([x, inf))``; see :func:`survival_function`."""
        return survival_function(self, x)

    def survival_l2_norm_sq(self) -> float:
        """Exact ``int_0^inf H(x)^2 dx`` (the point mass does not contribute)."""
        pts = self.breakpoints()
        if len(pts) < 2:
            return 0.0
        a, b = pts[:-1], pts[1:]
        # H is linear on each segment, so Simpson's rule is exact for H^2
        ha = _density_tail(self, a)
        hb = _density_tail(self, b)
        hm = _density_tail(self, (a + b) / 2)
        return float(np.sum((b - a) / 6 * (ha**2 + 4 * hm**2 + hb**2)))


def _density_tail(scheme: WeightingScheme, x) -> np.ndarray:
    """``int_x^inf h(u) du`` (continuous in x, excludes the point mass)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for u, v, h in scheme.density_pieces:
        out += h * np.clip(v - np.maximum(x, u), 0.0, None)
    return out


def survival_function(scheme: WeightingScheme, x):
    """``H(x) = mu([x, inf))``.

    Piecewise linear in ``x``; the point mass at zero only counts at ``x = 0``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("survival function is defined for x >= 0")
    out = _density_tail(scheme, x) + np.where(x == 0, scheme.point_mass_at_zero, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LaguerreProjection:
    """Truncated Laguerre expansion of a weighting scheme.

    Attributes
    ----------
    basis : LaguerreBasis
    A : ndarray
        Coefficients of the survival function H.
    c : ndarray
        Coefficients of the density h.
    a : ndarray
        Coefficients of the approximating density ``h_n = -d/dt H_n``.
    correction : float
        Weight on the current price, ``H(0) - H_n(0)``; restores total mass.
    l2_error : float
        ``||H - H_n||_2``.
    h_norm : float
        ``||H||_2``.
    """

    basis: LaguerreBasis
    A: np.ndarray
    c: np.ndarray
    a: np.ndarray
    correction: float
    l2_error: float
    h_norm: float
    scheme: WeightingScheme

    @property
    def relative_error(self) -> float:
        """``||H - H_n||_2 / ||H||_2``."""
        return self.l2_error / self.h_norm

    @property
    def mass_relative_error(self) -> float:
        """``||H - H_n||_2 / H(0)``: the error in units of the total weight."""
        return self.l2_error / self.scheme.total_mass

    @property
    def approx_mass(self) -> float:
        """Total mass of ``correction * delta_0 + h_n(t) dt``."""
        ints = laguerre_integral_to_infinity(self.basis.p, self.basis.n)
        return self.correction + float(np.dot(self.a, ints))

    def survival_approx(self, x) -> np.ndarray:
        """Evaluate ``H_n(x) = sum_k A_k L^p_k(x)``."""
        from .laguerre import scaled_laguerre_all

        vals = scaled_laguerre_all(self.basis.p, self.basis.n - 1, x)
        return np.tensordot(self.A, vals, axes=1)


def density_coeffs(scheme: WeightingScheme, basis: LaguerreBasis) -> np.ndarray:
    """Exact ``<h, L^p_k>`` for the piecewise-constant density, k < n."""
    c = np.zeros(basis.n)
    for u, v, h in scheme.density_pieces:
        c += h * laguerre_definite_integrals(basis.p, basis.n - 1, u, v)
    return c


def project(scheme: WeightingScheme, basis: LaguerreBasis) -> LaguerreProjection:
    """Project the survival function of ``scheme`` on the first ``n`` Laguerre functions."""
    p, n = basis.p, basis.n
    root = math.sqrt(2 * p)
    c = density_coeffs(scheme, basis)
    h0 = scheme.density_mass  # H(0+), boundary term of the integration by parts
    # c_k = sqrt(2p) H(0+) - 2p sum_{i<k} A_i - p A_k
    A = np.empty(n)
    partial = 0.0
    for k in range(n):
        A[k] = (root * h0 - c[k]) / p - 2 * partial
        partial += A[k]
    # a_k = p A_k + 2p sum_{i>k} A_i
    tail = np.concatenate([np.cumsum(A[::-1])[::-1][1:], [0.0]])
    a = p * A + 2 * p * tail
    correction = scheme.total_mass - root * float(np.sum(A))
    norm_sq = scheme.survival_l2_norm_sq()
    err_sq = norm_sq - float(np.dot(A, A))
    # roundoff can push the exact-fit case slightly negative
    l2_error = math.sqrt(max(err_sq, 0.0))
    return LaguerreProjection(
        basis=basis,
        A=A,
        c=c,
        a=a,
        correction=correction,
        l2_error=l2_error,
        h_norm=math.sqrt(norm_sq),
        scheme=scheme,
    )


def projection_error(scheme: WeightingScheme, p: float, n: int) -> float:
    """Squared L2 error ``||H||^2 - sum_k A_k^2`` at scale ``p``."""
    proj = project(scheme, LaguerreBasis(p, n))
    return proj.h_norm**2 - float(np.dot(proj.A, proj.A))


def _golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Minimize ``f`` on ``[lo, hi]`` by golden-section search."""
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    x = (lo + hi) / 2
    return x, f(x)


def optimize_scale(
    scheme: WeightingScheme,
    n: int,
    *,
    grid_points: int = 400,
    starts: int = 16,
    tol: float = 1e-4,
) -> float:
    """Scale ``p`` minimizing ``||H - H_n||_2``.

    The objective is multimodal in ``p`` (the optimum is not monotone in
    ``n``), so a log-spaced scan over ``(0.01/L, 40/w]`` locates candidate
    basins, with ``L`` the end of the support and ``w`` the shortest density
    piece. The ``starts`` best local minima of the scan are then refined by
    golden-section search. Ties within 1e-12 go to the smaller ``p``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not scheme.density_pieces:
        raise ValueError("scheme has no density to approximate")
    lo = 0.01 / scheme.support_end
    hi = 40.0 / scheme.shortest_piece
    grid = np.geomspace(lo, hi, grid_points)

    def objective(p):
        return projection_error(scheme, p, n)

    values = np.array([objective(p) for p in grid])
    if not np.all(np.isfinite(values)):
        bad = grid[~np.isfinite(values)]
        raise FloatingPointError(f"non-finite projection error at p={bad[0]:.6g} (n={n})")

    interior = [i for i in range(1, grid_points - 1) if values[i] <= values[i - 1] and values[i] <= values[i + 1]]
    if values[-1] < values[-2]:
        interior.append(grid_points - 1)
    if values[0] < values[1]:
        interior.append(0)
    interior.sort(key=lambda i: values[i])

    best_p, best_f = None, math.inf
    for i in interior[:starts]:
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, grid_points - 1)]
        p, fp = _golden_section(objective, a, b, tol)
        if fp < best_f - 1e-12 or (abs(fp - best_f) <= 1e-12 and p < best_p):
            best_p, best_f = p, fp
    logger.debug("optimize_scale n=%d -> p=%.6g err^2=%.6g", n, best_p, best_f)
    return float(best_p)


def optimal_projection(scheme: WeightingScheme, n: int) -> LaguerreProjection:
    """Projection at the optimal scale for order ``n``."""
    return project(scheme, LaguerreBasis(optimize_scale(scheme, n), n))
