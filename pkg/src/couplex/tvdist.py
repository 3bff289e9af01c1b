"""Total-variation distances at fixed resolution and their sanity relations.

All distances are reported in [0, 1] units: tv = (1/2) sum |p - q|, so that
tv = 1 - overlap and tv equals the mismatch probability of the maximal
coupling.  Curves toward a stationary law come in two flavors: exact matrix
powers for finite chains, and binned Monte Carlo marginals for diffusions.
Monotonicity is checked against integer-time baselines, with a 3-sigma noise
band for Monte Carlo curves and a pure floating-point slack for exact ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coupling import CouplingEnsemble, DiscreteDistribution
from .mixing import BinGrid, histogram_masses
from .oracles import FiniteChain
from .sde import IntegratorConfig, SdeModel, sample_transition

__all__ = [
    "TvCurve",
    "MonotonicityVerdict",
    "BoundCheck",
    "tv_exact",
    "overlap_exact",
    "tv_curve_to_stationary",
    "check_tv_monotonicity",
    "coupling_bound_check",
    "fit_exponential",
]

FP_TOL = 1e-12


def tv_exact(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """(1/2) L1 distance over shared cells, outside mass included as a cell."""
    p.require_shared_support(q)
    return 0.5 * (
        float(np.abs(p.probabilities - q.probabilities).sum())
        + abs(p.outside_mass - q.outside_mass)
    )


def overlap_exact(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    p.require_shared_support(q)
    return float(np.minimum(p.probabilities, q.probabilities).sum()) + min(
        p.outside_mass, q.outside_mass
    )


@dataclass(frozen=True, eq=False)
class TvCurve:
    """psi_hat(t) = TV(law at t, stationary law) at a fixed resolution."""

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray           # zeros for exact curves
    kind: str                    # "exact-chain" or "mc-model"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        s = np.asarray(self.stderr, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stderr", s)
        if not (t.shape == v.shape == s.shape) or t.ndim != 1:
            raise ValueError("times, values, stderr must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")

    def write_csv(self, fp) -> None:
        close = False
        if isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__"):
            fp, close = open(fp, "w"), True
        try:
            fp.write("t,tv,stderr\n")
            for t, v, s in zip(self.times, self.values, self.stderr):
                fp.write(f"{float(t)!r},{float(v)!r},{float(s)!r}\n")
        finally:
            if close:
                fp.close()

    def write_gnuplot(self, fp) -> None:
        """Two-column t / tv with a comment header."""
        close = False
        if isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__"):
            fp, close = open(fp, "w"), True
        try:
            fp.write("# t tv\n")
            for t, v in zip(self.times, self.values):
                fp.write(f"{float(t)!r} {float(v)!r}\n")
        finally:
            if close:
                fp.close()


def _chain_tv_curve(chain: FiniteChain, initial, times, stationary=None) -> TvCurve:
    mu0 = np.asarray(initial, dtype=float)
    pi = chain.stationary() if stationary is None else np.asarray(stationary, dtype=float)
    ts = np.asarray(list(times), dtype=float)
    if not np.allclose(ts, np.round(ts)):
        raise ValueError("finite-chain curves are defined at integer times")
    values = np.empty(ts.size)
    for i, t in enumerate(ts):
        mu_t = chain.marginal(mu0, int(round(t)))
        values[i] = 0.5 * float(np.abs(mu_t - pi).sum())
    return TvCurve(ts, values, np.zeros_like(values), "exact-chain", {"states": chain.size})


def _model_tv_curve(
    model: SdeModel,
    x0,
    stationary_masses: np.ndarray,
    stationary_outside: float,
    times,
    n: int,
    bins: BinGrid,
    cfg: IntegratorConfig,
) -> TvCurve:
    ts = np.asarray(sorted(times), dtype=float)
    values = np.empty(ts.size)
    errs = np.empty(ts.size)
    pi = np.asarray(stationary_masses, dtype=float)
    for i, t in enumerate(ts):
        if t == 0.0:
            x = np.asarray(x0, dtype=float).reshape(1, -1)
            masses, outside, se = histogram_masses(np.repeat(x, 1, axis=0), bins)
            # point mass at x0: exact, no sampling
            values[i] = 0.5 * (float(np.abs(masses - pi).sum()) + abs(outside - stationary_outside))
            errs[i] = 0.0
            continue
        em = sample_transition(model, x0, float(t), n, cfg.shifted(i))
        masses, outside, se = histogram_masses(em.points, bins)
        values[i] = 0.5 * (float(np.abs(masses - pi).sum()) + abs(outside - stationary_outside))
        errs[i] = 0.5 * float(se.sum())
    return TvCurve(ts, values, errs, "mc-model", {"n": n, "bins": bins.n_cells})


def tv_curve_to_stationary(source, initial, stationary, times, n=None, bins=None, cfg=None) -> TvCurve:
    """TV-to-stationarity curve.

    Finite chains: ``source`` a FiniteChain, ``initial`` a probability vector,
    ``stationary`` a vector or None (computed), exact at integer times.
    Diffusions: ``source`` an SdeModel, ``initial`` the start point,
    ``stationary`` a pair (cell masses, outside mass) aligned with ``bins``;
    marginals are Monte Carlo histograms of n paths per time point.
    """
    if isinstance(source, FiniteChain):
        return _chain_tv_curve(source, initial, times, stationary)
    if isinstance(source, SdeModel):
        if n is None or bins is None or cfg is None:
            raise ValueError("model curves need n, bins and cfg")
        pi_masses, pi_outside = stationary
        return _model_tv_curve(source, initial, pi_masses, pi_outside, times, n, bins, cfg)
    raise TypeError(f"unsupported source {type(source).__name__}")


@dataclass(frozen=True)
class MonotonicityVerdict:
    ok: bool
    max_excess: float            # most positive violation beyond the allowance
    pairs_checked: int
    violations: tuple

    def __bool__(self) -> bool:
        return self.ok


def check_tv_monotonicity(curve: TvCurve, z: float = 3.0, fp_tol: float = FP_TOL) -> MonotonicityVerdict:
    """Check psi(t) <= psi(s) for every s <= t with s an integer time.

    The allowance per pair is fp_tol plus z times the summed standard errors,
    so exact curves are held to floating-point slack and Monte Carlo curves to
    their noise band.
    """
    t = curve.times
    v = curve.values
    se = curve.stderr
    integer_base = np.isclose(t, np.round(t), atol=1e-9)
    violations = []
    max_excess = -math.inf
    pairs = 0
    for j in range(t.size):
        if not integer_base[j]:
            continue
        for i in range(j + 1, t.size):
            pairs += 1
            allowance = fp_tol + z * (se[i] + se[j])
            excess = v[i] - v[j] - allowance
            max_excess = max(max_excess, excess)
            if excess > 0:
                violations.append((float(t[j]), float(t[i]), float(v[i] - v[j])))
    return MonotonicityVerdict(not violations, max_excess, pairs, tuple(violations))


@dataclass(frozen=True)
class BoundCheck:
    ok: bool
    mismatch_rate: float
    tv: float
    stderr: float
    mode: str                    # "maximal" (equality) or "upper" (tv <= mismatch)


def coupling_bound_check(coupled: CouplingEnsemble, tv: float, maximal: bool) -> BoundCheck:
    """Coupling inequality at 3 sigma: equality for maximal couplings, else tv <= mismatch."""
    n = len(coupled)
    p = coupled.mismatch_rate
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
    if maximal:
        ok = abs(p - tv) <= 3.0 * se + FP_TOL
        mode = "maximal"
    else:
        ok = tv <= p + 3.0 * se + FP_TOL
        mode = "upper"
    return BoundCheck(ok, p, float(tv), se, mode)


def fit_exponential(curve: TvCurve) -> dict:
    """Least-squares exp fit psi ~ A exp(-r t) on positive values; diagnostic only."""
    mask = curve.values > 0
    if mask.sum() < 2:
        return {"rate": math.nan, "amplitude": math.nan, "residual": math.nan}
    t = curve.times[mask]
    logv = np.log(curve.values[mask])
    slope, intercept = np.polyfit(t, logv, 1)
    resid = float(np.sqrt(np.mean((logv - (slope * t + intercept)) ** 2)))
    return {"rate": float(-slope), "amplitude": float(math.exp(intercept)), "residual": resid}
