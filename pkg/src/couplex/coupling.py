"""Couplings of probability distributions and of 1-d diffusion paths.

The discrete side builds the maximal coupling of two densities on a shared
finite cell set: with overlap q = sum of pointwise minima, a Bernoulli(q) flag
picks either the normalized overlap density (both coordinates equal) or the
two normalized residual densities drawn independently.  The mismatch
probability is then exactly the total variation distance (in [0,1] units).

The path side couples two solutions of the same 1-d SDE by running them
independently until the first grid time where their difference changes sign or
vanishes, and letting them move together afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IncompatibleSupport
from .rng import path_generator
from .sde import IntegratorConfig, Path, SdeModel, _step

__all__ = [
    "DiscreteDistribution",
    "MaximalCouplingSampler",
    "CouplingResult",
    "CouplingEnsemble",
    "build_maximal_coupling",
    "draw_coupled_pair",
    "intersection_couple_1d",
    "estimate_meeting_probability",
    "MeetingProbabilityTable",
    "write_coupling_csv",
]

MEET_TOL = 1e-12          # |X - X'| at or below this counts as touching
_MASS_TOL = 1e-9

# residual construction is skipped when 1 - q is below this; the residual mass
# is then pure cancellation noise and the distributions are treated as equal
_DEGENERATE_RESIDUAL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Density w.r.t. a reference measure on a finite cell set.

    ``lambda_masses`` holds the reference measure of each cell, ``density`` the
    density values, so cell probabilities are density * lambda_masses.  Mass
    that fell outside the cell cover (e.g. outside a histogram box) is tracked
    in ``outside_mass``; in-cell mass plus outside mass must equal one within
    ``mass_tol`` (strict 1e-9 except for raw importance-weighted histograms,
    whose total carries Monte Carlo noise).
    """

    cell_ids: np.ndarray
    lambda_masses: np.ndarray
    density: np.ndarray
    outside_mass: float = 0.0
    mass_tol: float = _MASS_TOL

    def __post_init__(self):
        ids = np.asarray(self.cell_ids)
        lam = np.asarray(self.lambda_masses, dtype=float)
        den = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "cell_ids", ids)
        object.__setattr__(self, "lambda_masses", lam)
        object.__setattr__(self, "density", den)
        if not (ids.shape == lam.shape == den.shape) or ids.ndim != 1 or ids.size == 0:
            raise ValueError("cell_ids, lambda_masses, density must be equal-length 1-d arrays")
        if not np.isfinite(lam).all() or (lam <= 0).any():
            raise ValueError("lambda_masses must be finite and positive")
        if not np.isfinite(den).all() or (den < 0).any():
            raise ValueError("density must be finite and nonnegative")
        if not (math.isfinite(self.outside_mass) and self.outside_mass >= 0):
            raise ValueError("outside_mass must be finite and nonnegative")
        total = float(den @ lam) + self.outside_mass
        if abs(total - 1.0) > self.mass_tol:
            raise ValueError(f"total mass {total!r} deviates from 1 beyond mass_tol={self.mass_tol}")

    @classmethod
    def from_probabilities(
        cls, probabilities, cell_ids=None, lambda_masses=None, outside_mass=0.0, mass_tol=_MASS_TOL
    ) -> "DiscreteDistribution":
        p = np.asarray(probabilities, dtype=float)
        lam = np.ones_like(p) if lambda_masses is None else np.asarray(lambda_masses, dtype=float)
        ids = np.arange(p.size) if cell_ids is None else np.asarray(cell_ids)
        return cls(ids, lam, p / lam, outside_mass=outside_mass, mass_tol=mass_tol)

    @property
    def probabilities(self) -> np.ndarray:
        return self.density * self.lambda_masses

    @property
    def in_cell_mass(self) -> float:
        return float(self.probabilities.sum())

    @property
    def n_cells(self) -> int:
        return self.cell_ids.size

    def shares_support(self, other: "DiscreteDistribution") -> bool:
        return (
            self.cell_ids.shape == other.cell_ids.shape
            and bool(np.array_equal(self.cell_ids, other.cell_ids))
            and bool(np.allclose(self.lambda_masses, other.lambda_masses, rtol=1e-12, atol=1e-15))
        )

    def require_shared_support(self, other: "DiscreteDistribution") -> None:
        if not self.shares_support(other):
            raise IncompatibleSupport("distributions do not share cells and reference masses")


@dataclass(frozen=True)
class CouplingResult:
    """One coupled draw; for path couplings tau is the gluing (meeting) time."""

    first: object
    second: object
    coalesced: bool
    tau: float | None = None


@dataclass(frozen=True, eq=False)
class CouplingEnsemble:
    """Vectorized coupled draws; values are cell ids or terminal states."""

    first: np.ndarray
    second: np.ndarray
    coalesced: np.ndarray
    tau: np.ndarray | None = None

    def __len__(self) -> int:
        return self.coalesced.shape[0]

    @property
    def mismatch_rate(self) -> float:
        return float(1.0 - self.coalesced.mean())


@dataclass(frozen=True, eq=False)
class MaximalCouplingSampler:
    """Overlap/residual decomposition of two shared-support distributions.

    overlap is the coalescence probability q; xi the normalized overlap
    density (None when q == 0); residual_first/residual_second the normalized
    residual densities (None when the distributions coincide, q == 1).
    """

    first: DiscreteDistribution
    second: DiscreteDistribution
    overlap: float
    xi: DiscreteDistribution | None
    residual_first: DiscreteDistribution | None
    residual_second: DiscreteDistribution | None

    @property
    def tv_distance(self) -> float:
        return 1.0 - self.overlap

    def _choice(self, dist: DiscreteDistribution, size: int, rng) -> np.ndarray:
        p = dist.probabilities
        return rng.choice(dist.n_cells, size=size, p=p / p.sum())

    def draw(self, rng: np.random.Generator) -> CouplingResult:
        ens = self.draw_many(1, rng)
        return CouplingResult(ens.first[0], ens.second[0], bool(ens.coalesced[0]))

    def draw_many(self, n: int, rng: np.random.Generator) -> CouplingEnsemble:
        coalesce = rng.random(n) < self.overlap
        k = int(coalesce.sum())
        idx1 = np.empty(n, dtype=np.int64)
        idx2 = np.empty(n, dtype=np.int64)
        if k:
            shared = self._choice(self.xi, k, rng)
            idx1[coalesce] = shared
            idx2[coalesce] = shared
        if k < n:
            idx1[~coalesce] = self._choice(self.residual_first, n - k, rng)
            idx2[~coalesce] = self._choice(self.residual_second, n - k, rng)
        ids = self.first.cell_ids
        return CouplingEnsemble(ids[idx1], ids[idx2], coalesce)


def build_maximal_coupling(
    first: DiscreteDistribution, second: DiscreteDistribution
) -> MaximalCouplingSampler:
    """Overlap q, overlap density and residual densities for two distributions."""
    first.require_shared_support(second)
    if first.outside_mass > _MASS_TOL or second.outside_mass > _MASS_TOL:
        raise ValueError("maximal coupling requires fully captured distributions (outside_mass == 0)")
    p1 = first.probabilities
    p2 = second.probabilities
    pmin = np.minimum(p1, p2)
    overlap = float(pmin.sum())
    ids, lam = first.cell_ids, first.lambda_masses
    xi = (
        DiscreteDistribution.from_probabilities(pmin / overlap, ids, lam)
        if overlap > 0.0
        else None
    )
    if 1.0 - overlap > _DEGENERATE_RESIDUAL:
        res1 = DiscreteDistribution.from_probabilities((p1 - pmin) / (1.0 - overlap), ids, lam)
        res2 = DiscreteDistribution.from_probabilities((p2 - pmin) / (1.0 - overlap), ids, lam)
    else:
        overlap = 1.0
        res1 = res2 = None
    return MaximalCouplingSampler(first, second, overlap, xi, res1, res2)


def draw_coupled_pair(sampler: MaximalCouplingSampler, rng: np.random.Generator) -> CouplingResult:
    return sampler.draw(rng)


def mixture_reconstruction(sampler: MaximalCouplingSampler, which: int = 1) -> np.ndarray:
    """Cell probabilities of (1-q)*residual + q*xi; must reproduce the marginal."""
    q = sampler.overlap
    xi_p = sampler.xi.probabilities if sampler.xi is not None else 0.0
    res = sampler.residual_first if which == 1 else sampler.residual_second
    res_p = res.probabilities if res is not None else 0.0
    return (1.0 - q) * res_p + q * xi_p


# ---------------------------------------------------------------------------
# 1-d intersection coupling


def _require_intersection_model(model: SdeModel) -> None:
    if model.dim != 1:
        raise ValueError("intersection coupling is defined for 1-d models")
    if not model.has_bounded_coefficients:
        raise ValueError(
            "intersection coupling requires declared sup_drift, sup_diffusion "
            "and sup_inverse_diffusion bounds"
        )


def _first_meeting_index(diff: np.ndarray, tol: float = MEET_TOL) -> int:
    """First grid index where the difference touches zero or changes sign; -1 if never."""
    touch = np.abs(diff) <= tol
    sign = np.sign(diff)
    cross = np.zeros_like(touch)
    cross[1:] = sign[1:] * sign[:-1] < 0
    hits = np.flatnonzero(touch | cross)
    return int(hits[0]) if hits.size else -1


def intersection_couple_1d(
    model: SdeModel, x1: float, x2: float, horizon: float, cfg: IntegratorConfig
) -> CouplingResult:
    """Run two independent copies from x1, x2 and glue them where they first meet.

    Both copies are driven by one counter-based stream (path index 0 of the
    configured substream); after the meeting index the second trajectory copies
    the first, which preserves its marginal law by the strong Markov property.
    """
    _require_intersection_model(model)
    steps, dt = cfg.grid(horizon)
    gen = path_generator(cfg.seed, cfg.substream, 0)
    dW = gen.standard_normal((steps, 2)) * math.sqrt(dt)
    states = np.empty((steps + 1, 2))
    states[0] = (x1, x2)
    X = np.array([[float(x1)], [float(x2)]])
    for j in range(steps):
        X = _step(model, X, dW[j].reshape(2, 1), dt)
        states[j + 1] = X[:, 0]
    times = np.arange(steps + 1) * dt
    k = _first_meeting_index(states[:, 0] - states[:, 1])
    first_states = states[:, 0:1].copy()
    second_states = states[:, 1:2].copy()
    inc_first = dW[:, 0:1].copy()
    inc_second = dW[:, 1:2].copy()
    coalesced = k >= 0
    tau = None
    if coalesced:
        second_states[k:] = first_states[k:]
        inc_second[k:] = inc_first[k:]
        tau = float(times[k])
    first = Path(times, first_states, inc_first, cfg.seed, cfg.substream, 0)
    second = Path(times, second_states, inc_second, cfg.seed, cfg.substream, 0)
    return CouplingResult(first, second, coalesced, tau)


@dataclass(frozen=True, eq=False)
class MeetingProbabilityTable:
    """Per-pair meeting probabilities with binomial standard errors."""

    pairs: np.ndarray          # (m, 2) start points
    probability: np.ndarray    # (m,)
    stderr: np.ndarray         # (m,)
    n: int
    horizon: float

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.probability))

    @property
    def minimum(self) -> float:
        return float(self.probability.min())

    def min_minus(self, z: float = 3.0) -> float:
        """Lower confidence edge of the grid minimum."""
        i = self.argmin
        return float(self.probability[i] - z * self.stderr[i])


def _meeting_ensemble(
    model: SdeModel, x1: float, x2: float, steps: int, dt: float, n: int, cfg: IntegratorConfig
) -> CouplingEnsemble:
    """Meeting times and glued terminal values for n coupled pairs."""
    sqrt_dt = math.sqrt(dt)
    tau = np.full(n, np.nan)
    met = np.zeros(n, dtype=bool)
    u_term = np.empty(n)
    v_term = np.empty(n)
    batch = 20_000
    for start in range(0, n, batch):
        stop = min(start + batch, n)
        m = stop - start
        gens = [path_generator(cfg.seed, cfg.substream, i) for i in range(start, stop)]
        U = np.full((m, 1), float(x1))
        V = np.full((m, 1), float(x2))
        met_b = np.abs(U[:, 0] - V[:, 0]) <= MEET_TOL
        tau_b = np.where(met_b, 0.0, np.nan)
        sign_prev = np.sign(U[:, 0] - V[:, 0])
        chunk = max(1, min(steps, int(24 * 2**20 / (m * 16))))
        done = 0
        while done < steps:
            k = min(chunk, steps - done)
            dW = np.empty((m, k, 2))
            for i, g in enumerate(gens):
                dW[i] = g.standard_normal((k, 2))
            dW *= sqrt_dt
            for j in range(k):
                U = _step(model, U, dW[:, j, 0:1], dt)
                V = _step(model, V, dW[:, j, 1:2], dt)
                diff = U[:, 0] - V[:, 0]
                sign = np.sign(diff)
                newly = ~met_b & ((np.abs(diff) <= MEET_TOL) | (sign * sign_prev < 0))
                if newly.any():
                    tau_b[newly] = (done + j + 1) * dt
                    met_b |= newly
                sign_prev = sign
            done += k
        tau[start:stop] = tau_b
        met[start:stop] = met_b
        u_term[start:stop] = U[:, 0]
        v_term[start:stop] = np.where(met_b, U[:, 0], V[:, 0])
    return CouplingEnsemble(u_term, v_term, met, tau)


def estimate_meeting_probability(
    model: SdeModel,
    pairs: Sequence[tuple[float, float]],
    horizon: float,
    n: int,
    cfg: IntegratorConfig,
    collect: bool = False,
):
    """Monte Carlo meeting probabilities for a grid of start pairs.

    Pair j runs on substream cfg.substream + j.  Returns the table, and with
    ``collect=True`` also the per-pair CouplingEnsemble draws.
    """
    _require_intersection_model(model)
    steps, dt = cfg.grid(horizon)
    pair_arr = np.asarray([(float(a), float(b)) for a, b in pairs], dtype=float)
    prob = np.empty(len(pair_arr))
    se = np.empty(len(pair_arr))
    ensembles = []
    for j, (a, b) in enumerate(pair_arr):
        ens = _meeting_ensemble(model, a, b, steps, dt, n, cfg.shifted(j))
        p = 1.0 - ens.mismatch_rate
        prob[j] = p
        se[j] = math.sqrt(max(p * (1.0 - p), 0.0) / n)
        if collect:
            ensembles.append(ens)
    table = MeetingProbabilityTable(pair_arr, prob, se, n, float(horizon))
    return (table, ensembles) if collect else table


def write_coupling_csv(ensembles, fp) -> None:
    """Dump coupled draws as rows pair_id,x1,x2,coalesced,tau.

    ``ensembles`` is a list of CouplingEnsemble (one per pair id); tau is empty
    for draws that never met and for static couplings.
    """
    close = False
    if isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__"):
        fp, close = open(fp, "w"), True
    try:
        fp.write("pair_id,x1,x2,coalesced,tau\n")
        for pair_id, ens in enumerate(ensembles):
            tau = ens.tau
            for i in range(len(ens)):
                t = ""
                if tau is not None and np.isfinite(tau[i]):
                    t = repr(float(tau[i]))
                a, b = ens.first[i], ens.second[i]
                a = a.item() if hasattr(a, "item") else a
                b = b.item() if hasattr(b, "item") else b
                fp.write(f"{pair_id},{a!r},{b!r},{int(ens.coalesced[i])},{t}\n")
    finally:
        if close:
            fp.close()
