"""Euler-Maruyama simulation of Ito diffusions dX = b(X)dt + sigma(X)dW.

Coefficient callables are vectorized over a leading batch axis: drift maps
(m, d) -> (m, d) and diffusion maps (m, d) -> (m, d, d).  Every simulated path
owns a counter-based random stream keyed by (seed, substream, path index), so
ensembles are reproducible bit-for-bit and independent of batch size or order.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DeclaredBoundWarning, NumericalBlowup, ExitBudgetExceeded, UnknownModel
from .rng import path_generator

__all__ = [
    "SdeModel",
    "IntegratorConfig",
    "Path",
    "ExitRecord",
    "ExitEnsemble",
    "EmpiricalMeasure",
    "simulate_path",
    "sample_transition",
    "simulate_exit",
    "sample_exit_ensemble",
    "make_model",
    "register_model",
    "write_paths_csv",
]

_BATCH_PATHS = 20_000
_CHUNK_TARGET_BYTES = 48 * 2**20


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class SdeModel:
    """Time-homogeneous diffusion with optionally declared coefficient bounds.

    Bounds are sup-norms over all of R^d (None = unknown/unbounded):
    ``sup_drift`` bounds |b(x)|_2, ``sup_diffusion`` the spectral norm of
    sigma(x), and ``sup_inverse_diffusion`` the spectral norm of sigma(x)^-1.
    Declared bounds are spot-checked on sampled states during simulation and
    violations raise a DeclaredBoundWarning.
    """

    dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    sup_drift: float | None = None
    sup_diffusion: float | None = None
    sup_inverse_diffusion: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for attr in ("sup_drift", "sup_diffusion", "sup_inverse_diffusion"):
            v = getattr(self, attr)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{attr} must be a finite nonnegative float or None")

    @property
    def has_bounded_coefficients(self) -> bool:
        return (
            self.sup_drift is not None
            and self.sup_diffusion is not None
            and self.sup_inverse_diffusion is not None
        )


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, default horizon and the random-stream address of a run."""

    step: float
    horizon: float
    seed: int
    substream: int = 0

    def __post_init__(self):
        if not (0 < self.step <= self.horizon):
            raise ValueError("require 0 < step <= horizon")
        if int(self.seed) < 0 or int(self.substream) < 0:
            raise ValueError("seed and substream must be nonnegative")

    def grid(self, horizon: float | None = None) -> tuple[int, float]:
        """(n_steps, dt) with equal steps dt <= self.step spanning the horizon."""
        T = self.horizon if horizon is None else float(horizon)
        if T <= 0:
            raise ValueError("horizon must be positive")
        n = max(1, math.ceil(T / self.step - 1e-12))
        return n, T / n

    def shifted(self, substream_offset: int) -> "IntegratorConfig":
        return replace(self, substream=self.substream + substream_offset)


@dataclass(frozen=True)
class Path:
    """A single discretized trajectory with its Brownian increments."""

    times: np.ndarray          # (n_steps + 1,)
    states: np.ndarray         # (n_steps + 1, d)
    increments: np.ndarray     # (n_steps, d), the scaled Delta W
    seed: int
    substream: int
    path_index: int = 0

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class ExitRecord:
    tau: float
    state: np.ndarray
    exited: bool               # False means the time cap was hit first
    radius: float
    time_cap: float | None


@dataclass(frozen=True)
class ExitEnsemble:
    tau: np.ndarray            # (n,)
    states: np.ndarray         # (n, d)
    exited: np.ndarray         # (n,) bool
    radius: float
    time_cap: float | None
    seed: int
    substream: int

    def __len__(self) -> int:
        return self.tau.shape[0]


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Sample cloud with provenance; weights default to uniform."""

    points: np.ndarray         # (n, d)
    seed: int
    substream: int
    horizon: float
    weights: np.ndarray | None = None

    def __len__(self) -> int:
        return self.points.shape[0]


# ---------------------------------------------------------------------------
# stepping engine


def _as_batch(x0, d) -> np.ndarray:
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != d:
        raise ValueError(f"x0 has dimension {x.shape[0]}, model has dimension {d}")
    return x


def _step(model: SdeModel, X: np.ndarray, dW: np.ndarray, dt: float) -> np.ndarray:
    b = model.drift(X)
    s = model.diffusion(X)
    Xn = X + b * dt + np.einsum("...ij,...j->...i", s, dW)
    if not np.isfinite(Xn).all():
        bad = ~np.isfinite(Xn).all(axis=-1)
        raise NumericalBlowup(
            "non-finite state during integration", state=np.asarray(X)[bad][:1]
        )
    return Xn


def _spot_check_bounds(model: SdeModel, states: np.ndarray) -> None:
    """Warn if sampled states violate the declared coefficient bounds."""
    sample = states[:: max(1, states.shape[0] // 8)][:8]
    rtol = 1e-8
    if model.sup_drift is not None:
        norms = np.linalg.norm(model.drift(sample), axis=-1)
        if norms.max(initial=0.0) > model.sup_drift * (1 + rtol) + 1e-12:
            warnings.warn(
                f"drift norm {norms.max():.6g} exceeds declared bound {model.sup_drift}",
                DeclaredBoundWarning,
                stacklevel=3,
            )
    if model.sup_diffusion is not None or model.sup_inverse_diffusion is not None:
        sig = model.diffusion(sample)
        sv = np.linalg.svd(sig, compute_uv=False)
        if model.sup_diffusion is not None and sv.max(initial=0.0) > model.sup_diffusion * (1 + rtol) + 1e-12:
            warnings.warn(
                f"diffusion norm {sv.max():.6g} exceeds declared bound {model.sup_diffusion}",
                DeclaredBoundWarning,
                stacklevel=3,
            )
        if model.sup_inverse_diffusion is not None:
            floor = 1.0 / model.sup_inverse_diffusion
            if sv.min(initial=np.inf) < floor * (1 - rtol) - 1e-12:
                warnings.warn(
                    f"smallest singular value {sv.min():.6g} of sigma below declared "
                    f"floor {floor:.6g} (= 1/sup_inverse_diffusion)",
                    DeclaredBoundWarning,
                    stacklevel=3,
                )


def _chunk_steps(n_paths: int, d: int, total_steps: int) -> int:
    per_step_bytes = n_paths * d * 8
    return int(np.clip(_CHUNK_TARGET_BYTES // max(per_step_bytes, 1), 1, total_steps))


def _batch_ranges(n: int, batch: int = _BATCH_PATHS):
    for start in range(0, n, batch):
        yield start, min(start + batch, n)


def _draw_increments(gens, k: int, d: int, sqrt_dt: float) -> np.ndarray:
    out = np.empty((len(gens), k, d))
    for i, g in enumerate(gens):
        out[i] = g.standard_normal((k, d))
    out *= sqrt_dt
    return out


def run_terminal_ensemble(
    model: SdeModel,
    x0,
    n: int,
    steps: int,
    dt: float,
    cfg: IntegratorConfig,
    step_hook: Callable[[int, np.ndarray, np.ndarray, float], None] | None = None,
) -> np.ndarray:
    """Terminal states of n independent paths on a fixed grid.

    ``step_hook(batch_start, X_left, dW, dt)`` is invoked once per step per
    batch with the pre-step states and the scaled increments, in time order.
    """
    x0 = _as_batch(x0, model.dim)
    out = np.empty((n, model.dim))
    sqrt_dt = math.sqrt(dt)
    checked = False
    for start, stop in _batch_ranges(n):
        gens = [path_generator(cfg.seed, cfg.substream, i) for i in range(start, stop)]
        X = np.tile(x0, (stop - start, 1))
        chunk = _chunk_steps(stop - start, model.dim, steps)
        done = 0
        while done < steps:
            k = min(chunk, steps - done)
            dW = _draw_increments(gens, k, model.dim, sqrt_dt)
            for j in range(k):
                if step_hook is not None:
                    step_hook(start, X, dW[:, j, :], dt)
                X = _step(model, X, dW[:, j, :], dt)
            done += k
            if not checked:
                _spot_check_bounds(model, X)
                checked = True
        out[start:stop] = X
    return out


# ---------------------------------------------------------------------------
# public operations


def simulate_path(
    model: SdeModel, x0, cfg: IntegratorConfig, horizon: float | None = None, path_index: int = 0
) -> Path:
    """One trajectory on the equal-step grid, keeping states and increments."""
    x0 = _as_batch(x0, model.dim)
    steps, dt = cfg.grid(horizon)
    gen = path_generator(cfg.seed, cfg.substream, path_index)
    dW = gen.standard_normal((steps, model.dim)) * math.sqrt(dt)
    states = np.empty((steps + 1, model.dim))
    states[0] = x0
    X = x0[None, :]
    for j in range(steps):
        X = _step(model, X, dW[j][None, :], dt)
        states[j + 1] = X[0]
    _spot_check_bounds(model, states)
    times = np.arange(steps + 1) * dt
    return Path(times, states, dW, cfg.seed, cfg.substream, path_index)


def sample_transition(
    model: SdeModel, x0, horizon: float, n: int, cfg: IntegratorConfig
) -> EmpiricalMeasure:
    """n independent draws from the time-`horizon` transition kernel at x0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    steps, dt = cfg.grid(horizon)
    points = run_terminal_ensemble(model, x0, n, steps, dt, cfg)
    return EmpiricalMeasure(points, cfg.seed, cfg.substream, float(horizon))


def sample_exit_ensemble(
    model: SdeModel,
    x0,
    radius: float,
    time_cap: float | None,
    n: int,
    cfg: IntegratorConfig,
    max_steps: int = 1_000_000,
) -> ExitEnsemble:
    """First-exit data from the centered ball of given radius for n paths.

    The exit time is the first grid time with |X| >= radius; the recorded state
    is the (overshooting) grid state.  With a time cap, paths that never exit
    carry tau = time_cap and exited = False.  Without a cap, paths still alive
    after max_steps raise ExitBudgetExceeded.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    x0 = _as_batch(x0, model.dim)
    if np.linalg.norm(x0) >= radius:
        raise ValueError("x0 must lie strictly inside the ball")
    if time_cap is not None:
        steps, dt = cfg.grid(time_cap)
        limit = steps
    else:
        dt = cfg.step
        limit = max_steps
    sqrt_dt = math.sqrt(dt)
    tau = np.full(n, np.nan)
    states = np.empty((n, model.dim))
    exited = np.zeros(n, dtype=bool)
    checked = False
    for start, stop in _batch_ranges(n):
        m = stop - start
        gens = [path_generator(cfg.seed, cfg.substream, i) for i in range(start, stop)]
        X = np.tile(x0, (m, 1))
        alive = np.arange(m)
        chunk = _chunk_steps(m, model.dim, limit)
        done = 0
        while alive.size and done < limit:
            k = min(chunk, limit - done)
            dW = _draw_increments([gens[i] for i in alive], k, model.dim, sqrt_dt)
            Xa = X[alive]
            still = np.ones(alive.size, dtype=bool)
            for j in range(k):
                Xa[still] = _step(model, Xa[still], dW[still, j, :], dt)
                hit = still & (np.linalg.norm(Xa, axis=1) >= radius)
                if hit.any():
                    idx = alive[hit]
                    tau[start + idx] = (done + j + 1) * dt
                    states[start + idx] = Xa[hit]
                    exited[start + idx] = True
                    still &= ~hit
            if not checked:
                _spot_check_bounds(model, Xa)
                checked = True
            X[alive] = Xa
            alive = alive[still]
            done += k
        if alive.size:
            if time_cap is None:
                raise ExitBudgetExceeded(
                    f"{alive.size} paths alive after {limit} steps (dt={dt:.3g})"
                )
            idx = start + alive
            tau[idx] = time_cap
            states[idx] = X[alive]
    return ExitEnsemble(tau, states, exited, float(radius), time_cap, cfg.seed, cfg.substream)


def simulate_exit(
    model: SdeModel,
    x0,
    radius: float,
    time_cap: float | None,
    cfg: IntegratorConfig,
    max_steps: int = 1_000_000,
) -> ExitRecord:
    ens = sample_exit_ensemble(model, x0, radius, time_cap, 1, cfg, max_steps)
    return ExitRecord(
        float(ens.tau[0]), ens.states[0], bool(ens.exited[0]), ens.radius, ens.time_cap
    )


def write_paths_csv(paths: Sequence[Path], fp) -> None:
    """Dump trajectories as rows t,x1,...,xd,path_id."""
    close = False
    if isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__"):
        fp, close = open(fp, "w"), True
    try:
        d = paths[0].dim
        fp.write("t," + ",".join(f"x{i + 1}" for i in range(d)) + ",path_id\n")
        for p in paths:
            for t, x in zip(p.times, p.states):
                fp.write(f"{float(t)!r}," + ",".join(repr(float(v)) for v in x) + f",{p.path_index}\n")
    finally:
        if close:
            fp.close()


# ---------------------------------------------------------------------------
# model registry


_REGISTRY: dict[str, Callable[..., SdeModel]] = {}


def register_model(name: str, factory: Callable[..., SdeModel]) -> None:
    _REGISTRY[name] = factory


_SPEC_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\{(.*)\})?\s*$")


def _parse_value(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


def make_model(spec: str) -> SdeModel:
    """Build a registered model from a spec string like ``"ou{theta=1,d=2}"``."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise UnknownModel(f"cannot parse model spec {spec!r}")
    name, params_text = m.group(1), m.group(2)
    if name not in _REGISTRY:
        raise UnknownModel(f"no model registered under {name!r}; known: {sorted(_REGISTRY)}")
    params = {}
    if params_text:
        for item in params_text.split(","):
            if not item.strip():
                continue
            key, _, value = item.partition("=")
            if not _:
                raise UnknownModel(f"malformed parameter {item!r} in spec {spec!r}")
            try:
                params[key.strip()] = _parse_value(value)
            except ValueError as exc:
                raise UnknownModel(f"malformed parameter value {item!r} in spec {spec!r}") from exc
    try:
        return _REGISTRY[name](**params)
    except TypeError as exc:
        raise UnknownModel(f"bad parameters for model {name!r}: {exc}") from exc


def _identity_diffusion(scale: float, d: int):
    eye = np.eye(d) * scale

    def diffusion(x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(eye, x.shape + (d,))

    return diffusion


def _zero_model(d: int = 1) -> SdeModel:
    def drift(x):
        return np.zeros_like(x)

    return SdeModel(
        d, drift, _identity_diffusion(0.0, d), sup_drift=0.0, sup_diffusion=0.0, name=f"zero{{d={d}}}"
    )


def _bm_model(d: int = 1, sigma: float = 1.0) -> SdeModel:
    def drift(x):
        return np.zeros_like(x)

    return SdeModel(
        d,
        drift,
        _identity_diffusion(sigma, d),
        sup_drift=0.0,
        sup_diffusion=sigma,
        sup_inverse_diffusion=1.0 / sigma,
        name=f"bm{{d={d}}}",
    )


def _ou_model(theta: float = 1.0, d: int = 1) -> SdeModel:
    def drift(x):
        return -theta * x

    return SdeModel(
        d,
        drift,
        _identity_diffusion(1.0, d),
        sup_diffusion=1.0,
        sup_inverse_diffusion=1.0,
        name=f"ou{{theta={theta}}}",
    )


def _sign_drift_model(a: float = 1.0, d: int = 1, sigma: float = 1.0) -> SdeModel:
    """Bounded discontinuous mean-reverting drift -a*sign(x) per coordinate."""

    def drift(x):
        return -a * np.sign(x)

    return SdeModel(
        d,
        drift,
        _identity_diffusion(sigma, d),
        sup_drift=a * math.sqrt(d),
        sup_diffusion=sigma,
        sup_inverse_diffusion=1.0 / sigma,
        name=f"sign_drift{{a={a},d={d}}}",
    )


def _bounded_drift_1d(a: float = 1.0, sigma: float = 1.0) -> SdeModel:
    """Smooth bounded mean-reverting drift -a*tanh(2x) in one dimension."""

    def drift(x):
        return -a * np.tanh(2.0 * x)

    return SdeModel(
        1,
        drift,
        _identity_diffusion(sigma, 1),
        sup_drift=a,
        sup_diffusion=sigma,
        sup_inverse_diffusion=1.0 / sigma,
        name=f"bounded_drift_1d{{a={a}}}",
    )


register_model("zero", _zero_model)
register_model("bm", _bm_model)
register_model("ou", _ou_model)
register_model("sign_drift", _sign_drift_model)
register_model("bounded_drift_1d", _bounded_drift_1d)
