"""Empirical Harnack-type ratio bounds on exit distributions.

Parabolic side: paths started inside the unit cylinder {|x| <= 1, t in [0,1]}
are stopped at the first grid time |X| >= 1 (else at t = 1, the inf-of-empty
convention), and the hit distribution is recorded on cells of the partial
boundary Gamma_eps (lateral shell for t in [eps, 1] plus the top lid).  The
sup of per-cell mass ratios between start-at-0 and start-at-eps measures gives
an empirical constant N_hat, which lower-bounds overlap integrals by q/N.

Elliptic side: exit-place distributions on angular cells of a centered sphere,
compared across starts near the center, with the time-capped ladder
nu_{R,T} -> nu_R used as an exhaustion diagnostic.

Cells below the noise floor 5/n are excluded from ratio suprema and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mixing import BinGrid, MdReport, histogram_masses, overlap_matrix, CONVENTION
from .sde import IntegratorConfig, SdeModel, sample_exit_ensemble, sample_transition

__all__ = [
    "CylinderCells",
    "SphereCells",
    "BoundaryMeasure",
    "ParabolicHarnackReport",
    "CorollaryReport",
    "EllipticHarnackReport",
    "EllipticMdReport",
    "sample_parabolic_boundary",
    "parabolic_harnack_check",
    "md_via_parabolic_corollary",
    "elliptic_harnack_check",
    "md_via_elliptic",
]

NOISE_FLOOR_COUNT = 5.0


def _angles(states: np.ndarray) -> np.ndarray:
    return np.arctan2(states[:, 1], states[:, 0])


def _angle_bins(states: np.ndarray, n_angle: int, dim: int) -> np.ndarray:
    """Sector index of each state; d=1 uses the two half-lines as 'sectors'."""
    if dim == 1:
        return (states[:, 0] >= 0).astype(np.int64)
    theta = _angles(states)
    k = np.floor((theta + np.pi) / (2 * np.pi) * n_angle).astype(np.int64)
    return np.clip(k, 0, n_angle - 1)


@dataclass(frozen=True)
class CylinderCells:
    """Partition of Gamma_eps: (time x sector) lateral cells, (ring x sector) top cells.

    In one dimension the 'sectors' are the two boundary points and the top lid
    is split into n_radius intervals of [-1, 1].
    """

    eps: float
    n_time: int = 5
    n_angle: int = 8
    n_radius: int = 3

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if min(self.n_time, self.n_angle, self.n_radius) < 1:
            raise ValueError("cell counts must be positive")

    def lateral_sectors(self, dim: int) -> int:
        return 2 if dim == 1 else self.n_angle

    def top_cells(self, dim: int) -> int:
        return self.n_radius if dim == 1 else self.n_radius * self.n_angle

    def n_cells(self, dim: int) -> int:
        return self.n_time * self.lateral_sectors(dim) + self.top_cells(dim)

    def labels(self, dim: int) -> list[tuple]:
        out = [("lateral", it, ia) for it in range(self.n_time) for ia in range(self.lateral_sectors(dim))]
        if dim == 1:
            out += [("top", ir, 0) for ir in range(self.n_radius)]
        else:
            out += [("top", ir, ia) for ir in range(self.n_radius) for ia in range(self.n_angle)]
        return out

    def classify(self, tau_abs: np.ndarray, states: np.ndarray, exited: np.ndarray) -> np.ndarray:
        """Flat cell index per path; -1 for exits before eps (not on Gamma_eps)."""
        dim = states.shape[1]
        n_lat_sec = self.lateral_sectors(dim)
        idx = np.empty(tau_abs.shape[0], dtype=np.int64)

        early = exited & (tau_abs < self.eps - 1e-12)
        lateral = exited & ~early
        top = ~exited

        t_edges = np.linspace(self.eps, 1.0, self.n_time + 1)
        tb = np.clip(np.searchsorted(t_edges, tau_abs[lateral], side="right") - 1, 0, self.n_time - 1)
        ab = _angle_bins(states[lateral], self.n_angle, dim)
        idx[lateral] = tb * n_lat_sec + ab

        offset = self.n_time * n_lat_sec
        if dim == 1:
            x_edges = np.linspace(-1.0, 1.0, self.n_radius + 1)
            xb = np.clip(np.searchsorted(x_edges, states[top, 0], side="right") - 1, 0, self.n_radius - 1)
            idx[top] = offset + xb
        else:
            r_edges = np.sqrt(np.arange(self.n_radius + 1) / self.n_radius)  # equal-area rings
            r = np.linalg.norm(states[top], axis=1)
            rb = np.clip(np.searchsorted(r_edges, r, side="right") - 1, 0, self.n_radius - 1)
            ab = _angle_bins(states[top], self.n_angle, dim)
            idx[top] = offset + rb * self.n_angle + ab

        idx[early] = -1
        return idx


@dataclass(frozen=True)
class SphereCells:
    """Equal-angle cells of a centered sphere; two endpoint cells in 1-d."""

    n_angle: int = 36

    def n_cells(self, dim: int) -> int:
        return 2 if dim == 1 else self.n_angle

    def labels(self, dim: int) -> list[tuple]:
        if dim == 1:
            return [("endpoint", 0), ("endpoint", 1)]
        return [("sector", ia) for ia in range(self.n_angle)]

    def classify(self, states: np.ndarray) -> np.ndarray:
        return _angle_bins(states, self.n_angle, states.shape[1])


@dataclass(frozen=True, eq=False)
class BoundaryMeasure:
    """Empirical hit distribution on boundary cells, with uncaptured early mass."""

    cells: object
    masses: np.ndarray
    captured: float
    early_mass: float
    n: int
    start_point: np.ndarray
    start_time: float
    eps: float

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(self.masses * (1.0 - self.masses), 0.0, None) / self.n)


def _check_dim(model: SdeModel) -> None:
    if model.dim not in (1, 2):
        raise NotImplementedError("boundary cell partitions are implemented for d in {1, 2}")


def sample_parabolic_boundary(
    model: SdeModel,
    x0,
    start_time: float,
    eps: float,
    n: int,
    cells: CylinderCells,
    cfg: IntegratorConfig,
) -> BoundaryMeasure:
    """Hit distribution on Gamma_eps for paths from (start_time, x0).

    Paths started at time eps run for duration 1 - eps; with start_time 0 the
    mass exiting before eps misses Gamma_eps and is reported separately.
    """
    _check_dim(model)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if np.linalg.norm(x0) > 0.25 + 1e-12:
        raise ValueError("start point must lie in the ball of radius 1/4")
    if not 0.0 <= start_time < 1.0:
        raise ValueError("start_time must lie in [0, 1)")
    if abs(cells.eps - eps) > 1e-12:
        raise ValueError("cells were built for a different eps")
    duration = 1.0 - start_time
    ens = sample_exit_ensemble(model, x0, 1.0, duration, n, cfg)
    tau_abs = start_time + ens.tau
    idx = cells.classify(tau_abs, ens.states, ens.exited)
    valid = idx >= 0
    masses = np.bincount(idx[valid], minlength=cells.n_cells(model.dim)).astype(float) / n
    early = float((~valid).sum()) / n
    return BoundaryMeasure(cells, masses, 1.0 - early, early, n, x0, float(start_time), float(eps))


@dataclass(frozen=True, eq=False)
class ParabolicHarnackReport:
    n_hat: float
    md_min: float
    md_argmin: tuple[int, int]
    md_matrix: np.ndarray            # (K1, K2) overlap integrals
    md_se_matrix: np.ndarray
    q_hat: float                     # min over start-0 points of Gamma_eps mass
    q_pass: np.ndarray               # (K1, K2) start-0 mass on noise-floor-passing cells
    bound_holds: bool                # md >= q_pass / n_hat on the same data, all pairs
    violations: list
    captured_start0: np.ndarray
    captured_start_eps: np.ndarray
    early_mass: np.ndarray
    excluded_cells: np.ndarray       # (K1, K2) counts of cells under the noise floor
    cell_ratio_sup: np.ndarray       # per-cell sup of passing ratios (nan if never passing)
    eps: float
    n: int
    cells: CylinderCells

    @property
    def md_min_stderr(self) -> float:
        return float(self.md_se_matrix[self.md_argmin])


def parabolic_harnack_check(
    model: SdeModel,
    x1_grid,
    x2_grid,
    eps: float,
    n: int,
    cells: CylinderCells,
    cfg: IntegratorConfig,
) -> ParabolicHarnackReport:
    """Compare start-at-0 and start-at-eps boundary measures on Gamma_eps.

    N_hat is the sup over start pairs and adequately sampled cells (both
    masses >= 5/n) of mu^{x1}(cell) / mu^{eps,x2}(cell); the report checks the
    implied overlap bound md >= (passing start-0 mass) / N_hat on the same
    cells, which can only fail through resolution loss.
    """
    _check_dim(model)
    x1_grid = np.atleast_2d(np.asarray(x1_grid, dtype=float))
    x2_grid = np.atleast_2d(np.asarray(x2_grid, dtype=float))
    K1, K2 = x1_grid.shape[0], x2_grid.shape[0]
    m1 = [
        sample_parabolic_boundary(model, x1_grid[i], 0.0, eps, n, cells, cfg.shifted(i))
        for i in range(K1)
    ]
    m2 = [
        sample_parabolic_boundary(model, x2_grid[j], eps, eps, n, cells, cfg.shifted(K1 + j))
        for j in range(K2)
    ]
    M1 = np.stack([b.masses for b in m1])
    M2 = np.stack([b.masses for b in m2])
    S1 = np.stack([b.stderr for b in m1])
    S2 = np.stack([b.stderr for b in m2])
    floor = NOISE_FLOOR_COUNT / n
    C = M1.shape[1]

    n_hat = 0.0
    md = np.empty((K1, K2))
    md_se = np.empty((K1, K2))
    q_pass = np.zeros((K1, K2))
    excluded = np.zeros((K1, K2), dtype=int)
    cell_sup = np.full(C, np.nan)
    for i in range(K1):
        for j in range(K2):
            passing = (M1[i] >= floor) & (M2[j] >= floor)
            ratios = M1[i][passing] / M2[j][passing]
            if ratios.size:
                n_hat = max(n_hat, float(ratios.max()))
                take = np.where(passing)[0]
                cur = cell_sup[take]
                cell_sup[take] = np.where(np.isnan(cur), ratios, np.maximum(cur, ratios))
            md[i, j] = np.minimum(M1[i], M2[j]).sum()
            md_se[i, j] = np.minimum(S1[i], S2[j]).sum()
            q_pass[i, j] = M1[i][passing].sum()
            excluded[i, j] = int(C - passing.sum())

    violations = []
    if n_hat > 0.0:
        for i in range(K1):
            for j in range(K2):
                if md[i, j] + 1e-12 < q_pass[i, j] / n_hat:
                    violations.append((i, j, float(md[i, j]), float(q_pass[i, j] / n_hat)))
    arg = np.unravel_index(int(md.argmin()), md.shape)
    return ParabolicHarnackReport(
        n_hat=n_hat,
        md_min=float(md.min()),
        md_argmin=(int(arg[0]), int(arg[1])),
        md_matrix=md,
        md_se_matrix=md_se,
        q_hat=float(min(b.captured for b in m1)),
        q_pass=q_pass,
        bound_holds=not violations,
        violations=violations,
        captured_start0=np.array([b.captured for b in m1]),
        captured_start_eps=np.array([b.captured for b in m2]),
        early_mass=np.array([b.early_mass for b in m1]),
        excluded_cells=excluded,
        cell_ratio_sup=cell_sup,
        eps=float(eps),
        n=n,
        cells=cells,
    )


@dataclass(frozen=True, eq=False)
class CorollaryReport:
    """Time-1 kernel overlap near the cylinder axis with the q' bookkeeping."""

    kappa_report: MdReport
    p_eps: np.ndarray            # per start: P(|X_eps| <= 1/4)
    p_eps_se: np.ndarray
    q_hat: float
    q_hat_se: float
    q_prime: float
    q_prime_se: float
    eps: float

    @property
    def kappa(self) -> float:
        return self.kappa_report.kappa


def md_via_parabolic_corollary(
    model: SdeModel,
    x_grid,
    eps: float,
    n: int,
    bins: BinGrid,
    cfg: IntegratorConfig,
    cells: CylinderCells | None = None,
    q_hat: float | None = None,
) -> CorollaryReport:
    """Overlap of time-1 kernels for starts in B_{1/8}, plus q' = q * min P(|X_eps| <= 1/4).

    q is the minimal Gamma_eps capture over the same grid (estimated here
    unless supplied).  The overlap is binned on the given covering box; mass
    escaping the box counts zero.
    """
    _check_dim(model)
    pts = np.atleast_2d(np.asarray(x_grid, dtype=float))
    if (np.linalg.norm(pts, axis=1) > 0.125 + 1e-12).any():
        raise ValueError("start grid must lie in the ball of radius 1/8")
    K = pts.shape[0]
    masses = np.empty((K, bins.n_cells))
    ses = np.empty_like(masses)
    outside = np.empty(K)
    for k in range(K):
        em = sample_transition(model, pts[k], 1.0, n, cfg.shifted(k))
        masses[k], outside[k], ses[k] = histogram_masses(em.points, bins)
    ov, se = overlap_matrix(masses, ses)
    arg = np.unravel_index(int(ov.argmin()), ov.shape)
    kappa_report = MdReport(
        float(ov.min()),
        ov,
        se,
        (int(arg[0]), int(arg[1])),
        pts,
        n,
        bins.n_cells,
        1.0,
        diagnostics={"outside_mass": outside.tolist()},
    )

    p_eps = np.empty(K)
    for k in range(K):
        em = sample_transition(model, pts[k], eps, n, cfg.shifted(K + k))
        p_eps[k] = float((np.linalg.norm(em.points, axis=1) <= 0.25).mean())
    p_eps_se = np.sqrt(np.clip(p_eps * (1.0 - p_eps), 0.0, None) / n)

    q_hat_se = 0.0
    if q_hat is None:
        if cells is None:
            cells = CylinderCells(eps)
        captured = np.empty(K)
        for k in range(K):
            bm = sample_parabolic_boundary(model, pts[k], 0.0, eps, n, cells, cfg.shifted(2 * K + k))
            captured[k] = bm.captured
        kmin = int(np.argmin(captured))
        q_hat = float(captured[kmin])
        q_hat_se = math.sqrt(max(q_hat * (1.0 - q_hat), 0.0) / n)

    jmin = int(np.argmin(p_eps))
    q_prime = q_hat * float(p_eps[jmin])
    q_prime_se = math.sqrt(
        (q_hat_se * p_eps[jmin]) ** 2 + (q_hat * p_eps_se[jmin]) ** 2
    )
    return CorollaryReport(
        kappa_report, p_eps, p_eps_se, float(q_hat), float(q_hat_se), q_prime, q_prime_se, float(eps)
    )


@dataclass(frozen=True, eq=False)
class EllipticHarnackReport:
    n_hat: float
    cell_masses: np.ndarray      # (K, C)
    cell_sup: np.ndarray
    cell_inf: np.ndarray
    cell_ratio: np.ndarray       # sup/inf per passing cell, nan otherwise
    passing: np.ndarray          # (C,) bool
    excluded: int
    radius: float
    n: int
    grid: np.ndarray
    cells: SphereCells


def elliptic_harnack_check(
    model: SdeModel,
    radius: float,
    x_grid,
    n: int,
    cells: SphereCells,
    cfg: IntegratorConfig,
    max_steps: int = 1_000_000,
) -> EllipticHarnackReport:
    """Exit-place ratio constant over starts in B_{R/8} on sphere cells.

    Uncapped exits; N_hat = max over cells (passing the 5/n floor for every
    start) of the ratio of the largest to smallest cell mass across the grid.
    """
    _check_dim(model)
    if not 0 < radius:
        raise ValueError("radius must be positive")
    pts = np.atleast_2d(np.asarray(x_grid, dtype=float))
    if (np.linalg.norm(pts, axis=1) > radius / 8 + 1e-12).any():
        raise ValueError("start grid must lie in the ball of radius R/8")
    K = pts.shape[0]
    C = cells.n_cells(model.dim)
    M = np.empty((K, C))
    for k in range(K):
        ens = sample_exit_ensemble(model, pts[k], radius, None, n, cfg.shifted(k), max_steps)
        idx = cells.classify(ens.states)
        M[k] = np.bincount(idx, minlength=C).astype(float) / n
    floor = NOISE_FLOOR_COUNT / n
    sup = M.max(axis=0)
    inf = M.min(axis=0)
    passing = inf >= floor
    ratio = np.full(C, np.nan)
    ratio[passing] = sup[passing] / inf[passing]
    n_hat = float(np.nanmax(ratio)) if passing.any() else math.inf
    return EllipticHarnackReport(
        n_hat, M, sup, inf, ratio, passing, int((~passing).sum()), float(radius), n, pts, cells
    )


@dataclass(frozen=True, eq=False)
class EllipticMdReport:
    """Overlap of capped exit-place laws along a horizon ladder on shared paths."""

    horizons: np.ndarray
    kappa: np.ndarray            # per horizon
    kappa_se: np.ndarray
    survival_sup: np.ndarray     # per horizon: sup over starts of P(tau_R >= T)
    per_start_survival: np.ndarray   # (K, nT)
    kappa_monotone: bool
    survival_monotone: bool
    pair_overlap_final: np.ndarray   # (K, K) at the largest horizon
    argmin_final: tuple[int, int]
    radius: float
    n: int
    grid: np.ndarray
    cells: SphereCells
    convention: str = CONVENTION


def md_via_elliptic(
    model: SdeModel,
    radius: float,
    horizons: Sequence[float],
    x_grid,
    n: int,
    cells: SphereCells,
    cfg: IntegratorConfig,
) -> EllipticMdReport:
    """kappa over start pairs in B_R from capped exit places, on a shared-path ladder.

    One uncapped-at-T_max ensemble per start serves every horizon in the
    ladder (exits later than T drop out), so the overlap is nondecreasing in T
    by construction and the survival diagnostics share all randomness.
    """
    _check_dim(model)
    Ts = np.sort(np.asarray(list(horizons), dtype=float))
    if Ts.size == 0 or Ts[0] <= 0:
        raise ValueError("horizons must be positive")
    pts = np.atleast_2d(np.asarray(x_grid, dtype=float))
    if (np.linalg.norm(pts, axis=1) >= radius).any():
        raise ValueError("start grid must lie strictly inside B_R")
    K = pts.shape[0]
    C = cells.n_cells(model.dim)
    T_max = float(Ts[-1])
    cell_idx = []
    taus = []
    exited = []
    for k in range(K):
        ens = sample_exit_ensemble(model, pts[k], radius, T_max, n, cfg.shifted(k))
        cell_idx.append(cells.classify(ens.states))
        taus.append(ens.tau)
        exited.append(ens.exited)
    kappa = np.empty(Ts.size)
    kappa_se = np.empty(Ts.size)
    survival = np.empty((K, Ts.size))
    final_ov = None
    final_arg = (0, 0)
    for t_i, T in enumerate(Ts):
        M = np.zeros((K, C))
        S = np.zeros((K, C))
        for k in range(K):
            on = exited[k] & (taus[k] <= T + 1e-12)
            M[k] = np.bincount(cell_idx[k][on], minlength=C).astype(float) / n
            S[k] = np.sqrt(np.clip(M[k] * (1.0 - M[k]), 0.0, None) / n)
            survival[k, t_i] = 1.0 - float(on.mean())
        ov, se = overlap_matrix(M, S)
        kappa[t_i] = ov.min()
        kappa_se[t_i] = se[np.unravel_index(int(ov.argmin()), ov.shape)]
        if t_i == Ts.size - 1:
            final_ov = ov
            a = np.unravel_index(int(ov.argmin()), ov.shape)
            final_arg = (int(a[0]), int(a[1]))
    return EllipticMdReport(
        horizons=Ts,
        kappa=kappa,
        kappa_se=kappa_se,
        survival_sup=survival.max(axis=0),
        per_start_survival=survival,
        kappa_monotone=bool(np.all(np.diff(kappa) >= -1e-15)),
        survival_monotone=bool(np.all(np.diff(survival.max(axis=0)) <= 1e-15)),
        pair_overlap_final=final_ov,
        argmin_final=final_arg,
        radius=float(radius),
        n=n,
        grid=pts,
        cells=cells,
    )
