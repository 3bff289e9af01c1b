"""Closed-form and quadrature reference values used to validate estimators.

Everything here is computed without touching the simulation machinery: finite
chains by exact matrix powers, Gaussian kernels by their known moments,
overlaps by quadrature of pointwise minima, harmonic measure of a disk by the
Poisson kernel.  Estimator tests compare against these routes, never against
the estimators themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .errors import InvalidKernel

__all__ = [
    "FiniteChain",
    "chain_marginal",
    "gaussian_overlap",
    "gaussian_tv",
    "gaussian_bin_masses",
    "ou_moments",
    "ou_stationary_std",
    "bm_pair_meeting_probability",
    "disk_mean_exit_time",
    "poisson_kernel_disk",
    "poisson_cell_masses",
    "GaussianKernel",
    "bm_kernel",
    "ou_kernel",
    "EnvelopeVerdict",
    "gaussian_envelope_check",
]


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """Row-stochastic transition matrix with exact marginal evolution."""

    matrix: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", P)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidKernel("matrix must be square")
        if not np.isfinite(P).all() or (P < -1e-15).any():
            raise InvalidKernel("matrix entries must be finite and nonnegative")
        if np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
            raise InvalidKernel("rows must sum to 1 within 1e-12")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def marginal(self, initial, t: int) -> np.ndarray:
        mu = np.asarray(initial, dtype=float)
        if t < 0:
            raise ValueError("t must be a nonnegative integer")
        return mu @ np.linalg.matrix_power(self.matrix, t)

    def stationary(self) -> np.ndarray:
        """Solve pi P = pi, sum(pi) = 1 by least squares (unique for ergodic chains)."""
        n = self.size
        A = np.vstack([self.matrix.T - np.eye(n), np.ones((1, n))])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
        return pi


def chain_marginal(chain: FiniteChain, initial, t: int) -> np.ndarray:
    return chain.marginal(initial, t)


def gaussian_overlap(m1: float, m2: float, sigma: float, interval=None, tol: float = 1e-10) -> float:
    """integral of min of two equal-variance normal densities, optionally over an interval."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if interval is None:
        return 2.0 * stats.norm.cdf(-abs(m1 - m2) / (2.0 * sigma))
    a, b = interval
    f = lambda y: min(stats.norm.pdf(y, m1, sigma), stats.norm.pdf(y, m2, sigma))
    val, _ = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=200)
    return float(val)


def gaussian_tv(m1: float, m2: float, sigma: float) -> float:
    return 1.0 - gaussian_overlap(m1, m2, sigma)


def gaussian_bin_masses(mean: float, sigma: float, edges: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact bin masses of N(mean, sigma^2) on 1-d edges, plus the outside mass."""
    cdf = stats.norm.cdf(np.asarray(edges, dtype=float), mean, sigma)
    masses = np.diff(cdf)
    return masses, float(1.0 - (cdf[-1] - cdf[0]))


def ou_moments(x0: float, t: float, theta: float) -> tuple[float, float]:
    """Mean and variance of the OU transition law (unit noise), theta=0 -> Brownian."""
    if theta == 0.0:
        return float(x0), float(t)
    decay = math.exp(-theta * t)
    return float(x0) * decay, (1.0 - decay**2) / (2.0 * theta)


def ou_stationary_std(theta: float) -> float:
    return math.sqrt(1.0 / (2.0 * theta))


def bm_pair_meeting_probability(distance: float, horizon: float, sigma: float = 1.0) -> float:
    """P(two independent Brownian motions at |x1-x2| = distance meet by the horizon).

    The difference is a Brownian motion with volatility sigma*sqrt(2); the
    reflection principle gives 2 Phi(-distance / (sigma sqrt(2 horizon))).
    """
    return 2.0 * stats.norm.cdf(-abs(distance) / (sigma * math.sqrt(2.0 * horizon)))


def disk_mean_exit_time(x, radius: float, dim: int) -> float:
    """E[exit time] of standard Brownian motion from the centered ball."""
    r2 = float(np.dot(np.atleast_1d(x), np.atleast_1d(x)))
    return (radius**2 - r2) / dim


def poisson_kernel_disk(x, theta, radius: float = 1.0) -> np.ndarray:
    """Harmonic-measure density (w.r.t. arclength) of Brownian motion from x.

    For y = radius*(cos theta, sin theta): (R^2 - |x|^2) / (2 pi R |x - y|^2).
    """
    x = np.asarray(x, dtype=float).reshape(2)
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    y = radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
    dist2 = ((y - x) ** 2).sum(axis=-1)
    out = (radius**2 - (x**2).sum()) / (2.0 * math.pi * radius * dist2)
    return out if out.size > 1 else float(out[0])


def poisson_cell_masses(x, radius: float, n_cells: int, tol: float = 1e-10) -> np.ndarray:
    """Exact harmonic-measure masses of equal-angle arcs [-pi, pi) of the circle."""
    edges = np.linspace(-math.pi, math.pi, n_cells + 1)
    masses = np.empty(n_cells)
    for i in range(n_cells):
        f = lambda t: poisson_kernel_disk(x, t, radius) * radius
        masses[i], _ = integrate.quad(f, edges[i], edges[i + 1], epsabs=tol, epsrel=tol)
    return masses


@dataclass(frozen=True)
class GaussianKernel:
    """Transition density f_t(x, y) = N(y; mean_fn(x, t), var_fn(t) * I)."""

    mean_fn: Callable[[np.ndarray, float], np.ndarray]
    var_fn: Callable[[float], float]
    dim: int = 1

    def density(self, x, y, t: float) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        m = np.atleast_1d(np.asarray(self.mean_fn(x, t), dtype=float))
        s2 = float(self.var_fn(t))
        norm = (2.0 * math.pi * s2) ** (-self.dim / 2.0)
        return float(norm * math.exp(-((y - m) ** 2).sum() / (2.0 * s2)))


def bm_kernel(dim: int = 1, sigma: float = 1.0) -> GaussianKernel:
    return GaussianKernel(lambda x, t: x, lambda t: sigma**2 * t, dim)


def ou_kernel(theta: float, dim: int = 1) -> GaussianKernel:
    return GaussianKernel(
        lambda x, t: x * math.exp(-theta * t),
        lambda t: (1.0 - math.exp(-2.0 * theta * t)) / (2.0 * theta),
        dim,
    )


@dataclass(frozen=True)
class EnvelopeVerdict:
    ok: bool
    upper_ok: bool
    lower_ok: bool
    worst_upper: float           # max of f/upper - 1 (positive = violation)
    worst_lower: float           # max of lower/f - 1 (positive = violation)


def gaussian_envelope_check(
    kernel: GaussianKernel,
    t: float,
    upper_prefactor: float,
    upper_scale: float,
    lower_prefactor: float,
    lower_scale: float,
    points,
) -> EnvelopeVerdict:
    """Check C' t^{-d/2} e^{-|x-y|^2/(c' t)} <= f_t(x,y) <= C t^{-d/2} e^{-|x-y|^2/(c t)}.

    Prefactors scale like t^{-d/2} and exponent denominators like t, so one
    constant set can be checked across a ladder of times.  Evaluated on all
    ordered pairs of the supplied points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != kernel.dim:
        pts = pts.reshape(-1, kernel.dim)
    d = kernel.dim
    worst_upper = -math.inf
    worst_lower = -math.inf
    pref = t ** (-d / 2.0)
    for x in pts:
        for y in pts:
            delta2 = float(((x - y) ** 2).sum())
            f = kernel.density(x, y, t)
            upper = upper_prefactor * pref * math.exp(-delta2 / (upper_scale * t))
            lower = lower_prefactor * pref * math.exp(-delta2 / (lower_scale * t))
            if upper > 0:
                worst_upper = max(worst_upper, f / upper - 1.0)
            if f > 0:
                worst_lower = max(worst_lower, lower / f - 1.0)
    upper_ok = worst_upper <= 1e-12
    lower_ok = worst_lower <= 1e-12
    return EnvelopeVerdict(upper_ok and lower_ok, upper_ok, lower_ok, worst_upper, worst_lower)
