"""Markov-Dobrushin coefficient estimation for transition kernels.

The local coefficient kappa(D, D'; T) is the infimum over start pairs in D of
the overlap integral of the two time-T transition laws restricted to D'.  It
is estimated by binning Monte Carlo transition samples on a shared grid over
D' (reference measure: Lebesgue restricted to the bin cover) and summing
per-bin minima; mass outside the cover is tracked and contributes zero.
Conventions: overlap and TV live in [0,1]; per-pair standard errors are the
sum over bins of the smaller binomial cell error (a conservative upper-bound
proxy, not a CLT width).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coupling import DiscreteDistribution
from .errors import InvalidKernel, UndersampledWarning
from .sde import EmpiricalMeasure, IntegratorConfig, SdeModel, sample_transition

__all__ = [
    "BinGrid",
    "MdQuery",
    "MdReport",
    "MinorizationReport",
    "estimate_kernel_histogram",
    "estimate_md",
    "check_minorization",
    "exact_md_finite_chain",
    "overlap_matrix",
]

CONVENTION = (
    "tv_unit_interval; kappa = sum over bins of min cell masses; "
    "per-pair se = sum over bins of min cell standard errors (upper-bound proxy)"
)


@dataclass(frozen=True, eq=False)
class BinGrid:
    """Product grid of half-open bins (last bin right-closed), one edge array per axis."""

    edges: tuple[np.ndarray, ...]

    def __post_init__(self):
        edges = tuple(np.asarray(e, dtype=float) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        for e in edges:
            if e.ndim != 1 or e.size < 2 or not np.all(np.diff(e) > 0):
                raise ValueError("each edge array must be strictly increasing with >= 2 entries")

    @classmethod
    def regular(cls, low, high, count) -> "BinGrid":
        low = np.atleast_1d(np.asarray(low, dtype=float))
        high = np.atleast_1d(np.asarray(high, dtype=float))
        count = np.atleast_1d(np.asarray(count, dtype=int))
        if not (low.shape == high.shape == count.shape):
            raise ValueError("low, high, count must have matching shapes")
        return cls(tuple(np.linspace(l, h, c + 1) for l, h, c in zip(low, high, count)))

    @property
    def dim(self) -> int:
        return len(self.edges)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(e.size - 1 for e in self.edges)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volumes(self) -> np.ndarray:
        """Flat (n_cells,) Lebesgue masses in C order."""
        widths = [np.diff(e) for e in self.edges]
        vol = widths[0]
        for w in widths[1:]:
            vol = np.multiply.outer(vol, w)
        return vol.reshape(-1)

    def assign(self, points: np.ndarray) -> np.ndarray:
        """Flat cell index per point, -1 for points outside the cover."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[1] != self.dim:
            raise ValueError(f"points have dimension {pts.shape[1]}, grid has {self.dim}")
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        valid = np.ones(pts.shape[0], dtype=bool)
        for axis, e in enumerate(self.edges):
            k = np.searchsorted(e, pts[:, axis], side="right") - 1
            k[pts[:, axis] == e[-1]] = e.size - 2
            valid &= (k >= 0) & (k <= e.size - 2)
            idx = idx * (e.size - 1) + np.clip(k, 0, e.size - 2)
        idx[~valid] = -1
        return idx


def histogram_masses(points: np.ndarray, bins: BinGrid, weights: np.ndarray | None = None):
    """(cell masses, outside mass, cell standard errors) of a weighted sample.

    Masses are plain averages (1/n) sum w_i 1{cell}; the cell standard error is
    the standard error of that average, which reduces to the binomial
    sqrt(p(1-p)/n) for unit weights.
    """
    idx = bins.assign(points)
    n = idx.shape[0]
    inside = idx >= 0
    if weights is None:
        counts = np.bincount(idx[inside], minlength=bins.n_cells).astype(float)
        masses = counts / n
        outside = 1.0 - counts.sum() / n
        se = np.sqrt(np.clip(masses * (1.0 - masses), 0.0, None) / n)
    else:
        w = np.asarray(weights, dtype=float)
        masses = np.bincount(idx[inside], weights=w[inside], minlength=bins.n_cells) / n
        sq = np.bincount(idx[inside], weights=w[inside] ** 2, minlength=bins.n_cells) / n
        outside = float(w[~inside].sum()) / n
        se = np.sqrt(np.clip(sq - masses**2, 0.0, None) / n)
    return masses, float(outside), se


def estimate_kernel_histogram(
    model: SdeModel, x0, horizon: float, n: int, bins: BinGrid, cfg: IntegratorConfig
) -> DiscreteDistribution:
    """Histogram estimate of the time-`horizon` transition law at x0 on `bins`."""
    if n < 10 * bins.n_cells:
        warnings.warn(
            f"n={n} below 10x cell count {bins.n_cells}; cells are noise-dominated",
            UndersampledWarning,
            stacklevel=2,
        )
    em = sample_transition(model, x0, horizon, n, cfg)
    masses, outside, _ = histogram_masses(em.points, bins)
    vol = bins.volumes
    return DiscreteDistribution(
        np.arange(bins.n_cells), vol, masses / vol, outside_mass=outside
    )


@dataclass(frozen=True, eq=False)
class MdQuery:
    """Start grid over D, bin cover of D', and the horizon of the kernel."""

    start_points: np.ndarray
    bins: BinGrid
    horizon: float
    d_label: str = ""
    dprime_label: str = ""

    def __post_init__(self):
        pts = np.asarray(self.start_points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        object.__setattr__(self, "start_points", pts)
        if pts.shape[0] < 1:
            raise ValueError("start grid must be nonempty")
        if pts.shape[1] != self.bins.dim:
            raise ValueError("start points and bins disagree on dimension")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True, eq=False)
class MdReport:
    kappa: float
    pair_overlap: np.ndarray    # (K, K) overlap matrix over the start grid
    pair_stderr: np.ndarray     # (K, K) conservative error proxies
    argmin: tuple[int, int]
    start_points: np.ndarray
    n: int
    n_bins: int
    horizon: float
    convention: str = CONVENTION
    diagnostics: dict = field(default_factory=dict)

    @property
    def argmin_points(self) -> tuple[np.ndarray, np.ndarray]:
        i, j = self.argmin
        return self.start_points[i], self.start_points[j]

    @property
    def kappa_stderr(self) -> float:
        return float(self.pair_stderr[self.argmin])


def overlap_matrix(mass_rows: np.ndarray, se_rows: np.ndarray | None = None):
    """Pairwise sums of per-cell minima (and matching error proxies) of mass rows."""
    rows = np.asarray(mass_rows, dtype=float)
    K = rows.shape[0]
    ov = np.empty((K, K))
    se = np.zeros((K, K)) if se_rows is not None else None
    for i in range(K):
        for j in range(i, K):
            ov[i, j] = ov[j, i] = np.minimum(rows[i], rows[j]).sum()
            if se is not None:
                se[i, j] = se[j, i] = np.minimum(se_rows[i], se_rows[j]).sum()
    return (ov, se) if se_rows is not None else ov


def estimate_md(model: SdeModel, query: MdQuery, n: int, cfg: IntegratorConfig) -> MdReport:
    """Monte Carlo estimate of kappa(D, D'; T) over the query's start grid.

    Start point k runs on substream cfg.substream + k so the per-start
    ensembles are independent and individually reproducible.
    """
    if model.sup_inverse_diffusion is None:
        raise ValueError("estimate_md requires a non-degenerate model (declared sup_inverse_diffusion)")
    K = query.start_points.shape[0]
    masses = np.empty((K, query.bins.n_cells))
    ses = np.empty_like(masses)
    outside = np.empty(K)
    for k in range(K):
        em = sample_transition(model, query.start_points[k], query.horizon, n, cfg.shifted(k))
        masses[k], outside[k], ses[k] = histogram_masses(em.points, query.bins)
    ov, se = overlap_matrix(masses, ses)
    kappa = float(ov.min())
    arg = np.unravel_index(int(ov.argmin()), ov.shape)
    diagnostics = {"outside_mass": outside.tolist()}
    if masses.sum() == 0.0:
        diagnostics["empty_target"] = True
    return MdReport(
        kappa,
        ov,
        se,
        (int(arg[0]), int(arg[1])),
        query.start_points,
        n,
        query.bins.n_cells,
        query.horizon,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True, eq=False)
class MinorizationReport:
    """Petite-set style lower bound: mu^x(bin) >= c * nu(bin) on the cover."""

    c: float
    nu: DiscreteDistribution
    horizon: float
    per_start_c: np.ndarray
    zero_cells: int
    implied_kappa: float

    @property
    def holds(self) -> bool:
        return self.c > 0.0


def check_minorization(
    model: SdeModel,
    start_points,
    horizon: float,
    n: int,
    bins: BinGrid,
    cfg: IntegratorConfig,
    nu: DiscreteDistribution | None = None,
) -> MinorizationReport:
    """Estimate the largest c with mu^x >= c*nu cellwise over the start grid.

    nu defaults to normalized Lebesgue on the bin cover.  c > 0 certifies the
    minorization (petite-set) condition at this resolution, and implies
    kappa >= c * nu(cover) for the same D'.
    """
    if nu is None:
        vol = bins.volumes
        nu = DiscreteDistribution(np.arange(bins.n_cells), vol, np.full(bins.n_cells, 1.0 / vol.sum()))
    pts = np.asarray(start_points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    nu_p = nu.probabilities
    pos = nu_p > 0
    per_start = np.empty(pts.shape[0])
    zero_cells = 0
    for k in range(pts.shape[0]):
        em = sample_transition(model, pts[k], horizon, n, cfg.shifted(k))
        masses, _, _ = histogram_masses(em.points, bins)
        ratios = masses[pos] / nu_p[pos]
        zero_cells += int((masses[pos] == 0.0).sum())
        per_start[k] = ratios.min()
    c = float(per_start.min())
    return MinorizationReport(
        c, nu, float(horizon), per_start, zero_cells, implied_kappa=c * float(nu_p.sum())
    )


def exact_md_finite_chain(kernel: np.ndarray, d_states, dprime_states) -> float:
    """Brute-force kappa(D, D'; 1) for a finite row-stochastic kernel."""
    P = np.asarray(kernel, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidKernel("kernel must be a square matrix")
    if (P < -1e-15).any() or not np.isfinite(P).all():
        raise InvalidKernel("kernel entries must be finite and nonnegative")
    if np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
        raise InvalidKernel("kernel rows must sum to 1 within 1e-12")
    D = np.asarray(d_states, dtype=int)
    Dp = np.asarray(dprime_states, dtype=int)
    if D.size == 0 or Dp.size == 0:
        raise ValueError("D and D' must be nonempty")
    rows = P[np.ix_(D, Dp)]
    best = np.inf
    for i in range(rows.shape[0]):
        for j in range(rows.shape[0]):
            best = min(best, float(np.minimum(rows[i], rows[j]).sum()))
    return best
