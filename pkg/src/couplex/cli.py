"""Command-line front end: TOML-configured runs writing deterministic reports.

Every run writes ``<name>.json`` (byte-stable for a fixed config and seed:
keys sorted, no timestamps) plus operation-specific CSV artifacts, and a
``<name>.meta.json`` sidecar holding the wall-clock facts that must not leak
into the report.  Exit codes: 0 okay, 2 a configured check failed, 1 bad
config or usage.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path as FsPath

import numpy as np
from scipy import stats as sps

from . import __version__
from .config import Params, load_toml, resolve_seed, resolve_threads, validate_config
from .coupling import (
    DiscreteDistribution,
    build_maximal_coupling,
    estimate_meeting_probability,
    write_coupling_csv,
)
from .errors import ConfigError, CouplexError
from .girsanov import DriftSplitModel, estimate_md_girsanov, make_extra_drift, reweighted_kernel_with_stats
from .harnack import (
    CylinderCells,
    SphereCells,
    elliptic_harnack_check,
    md_via_elliptic,
    md_via_parabolic_corollary,
    parabolic_harnack_check,
)
from .mixing import BinGrid, MdQuery, estimate_md, exact_md_finite_chain, histogram_masses
from .oracles import (
    FiniteChain,
    bm_pair_meeting_probability,
    disk_mean_exit_time,
    gaussian_bin_masses,
    gaussian_overlap,
    gaussian_tv,
    ou_moments,
    poisson_cell_masses,
)
from .rng import path_generator
from .sde import IntegratorConfig, make_model, sample_transition, simulate_path, write_paths_csv
from .tvdist import check_tv_monotonicity, coupling_bound_check, fit_exponential, tv_curve_to_stationary, tv_exact

OPERATIONS = {}


def operation(name):
    def register(fn):
        OPERATIONS[name] = fn
        return fn

    return register


# ---------------------------------------------------------------------------
# serialization


def jsonable(obj):
    """Recursively convert reports (dataclasses, numpy) into JSON-stable types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if obj is None or isinstance(obj, (str, int, float, bool)):
        return obj
    if callable(obj):
        return getattr(obj, "__name__", "<callable>")
    return repr(obj)


def _dump_json(path: FsPath, payload: dict) -> None:
    path.write_text(json.dumps(jsonable(payload), sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# shared parameter parsing


def _integrator(params: Params, seed: int, default_h=0.01, default_t=1.0) -> IntegratorConfig:
    h = params.number("h", default_h)
    horizon = params.number("T", default_t)
    return IntegratorConfig(step=h, horizon=max(horizon, h), seed=seed, substream=params.integer("substream", 0))


def _bin_grid(table, path="<config>") -> BinGrid:
    if not isinstance(table, dict) or not {"low", "high", "count"} <= set(table):
        raise ConfigError(f"{path}: bins must be a table with low, high, count")
    return BinGrid.regular(table["low"], table["high"], table["count"])


def _point_grid(value, dim: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None] if dim == 1 else arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ConfigError(f"point grid has shape {arr.shape}, expected (*, {dim})")
    return arr


def _chisquare_pvalue(counts: np.ndarray, expected: np.ndarray) -> float:
    pos = expected > 0
    if counts[~pos].sum() > 0:
        return 0.0
    return float(sps.chisquare(counts[pos], f_exp=expected[pos] * counts[pos].sum() / expected[pos].sum()).pvalue)


def _md_payload(report) -> dict:
    K = report.start_points.shape[0]
    pairs = [
        {
            "i": i,
            "j": j,
            "x_i": report.start_points[i].tolist(),
            "x_j": report.start_points[j].tolist(),
            "overlap": float(report.pair_overlap[i, j]),
            "stderr": float(report.pair_stderr[i, j]),
        }
        for i in range(K)
        for j in range(i, K)
    ]
    ai, aj = report.argmin
    return {
        "kappa": report.kappa,
        "kappa_stderr": report.kappa_stderr,
        "pairs": pairs,
        "argmin": {
            "i": ai,
            "j": aj,
            "x_i": report.start_points[ai].tolist(),
            "x_j": report.start_points[aj].tolist(),
        },
        "n": report.n,
        "n_bins": report.n_bins,
        "horizon": report.horizon,
        "convention": report.convention,
        "diagnostics": report.diagnostics,
    }


def _write_md_csv(report, path: FsPath) -> None:
    with open(path, "w") as fh:
        fh.write("i,j,x_i,x_j,overlap,stderr\n")
        K = report.start_points.shape[0]
        for i in range(K):
            for j in range(i, K):
                xi = ";".join(repr(float(v)) for v in report.start_points[i])
                xj = ";".join(repr(float(v)) for v in report.start_points[j])
                fh.write(
                    f"{i},{j},{xi},{xj},{float(report.pair_overlap[i, j])!r},"
                    f"{float(report.pair_stderr[i, j])!r}\n"
                )


# ---------------------------------------------------------------------------
# operations: each returns (results payload, ok flag, extra artifact paths)


@operation("simulate")
def _run_simulate(config, params, seed, out_dir, name):
    model = make_model(config["model"])
    cfg = _integrator(params, seed)
    n = params.integer("n", 3)
    x0 = np.atleast_1d(np.asarray(params.get("x0", 0.0), dtype=float))
    paths = [simulate_path(model, x0, cfg, path_index=i) for i in range(n)]
    steps, dt = cfg.grid()
    terminals = np.stack([p.terminal for p in paths])
    csv_path = out_dir / f"{name}.csv"
    write_paths_csv(paths, csv_path)
    results = {
        "model": model.name,
        "n_paths": n,
        "steps": steps,
        "dt": dt,
        "terminal_mean": terminals.mean(axis=0).tolist(),
        "terminal_std": terminals.std(axis=0, ddof=1).tolist() if n > 1 else None,
    }
    return results, True, [csv_path]


@operation("estimate-md")
def _run_estimate_md(config, params, seed, out_dir, name):
    model = make_model(config["model"])
    cfg = _integrator(params, seed)
    bins = _bin_grid(params.require("bins"))
    query = MdQuery(
        start_points=_point_grid(params.require("start_points"), model.dim),
        bins=bins,
        horizon=params.number("T", 1.0),
        d_label=str(params.get("d_label", "")),
        dprime_label=str(params.get("dprime_label", "")),
    )
    report = estimate_md(model, query, n=params.integer("n"), cfg=cfg)
    csv_path = out_dir / f"{name}.csv"
    _write_md_csv(report, csv_path)
    return _md_payload(report), True, [csv_path]


@operation("couple")
def _run_couple(config, params, seed, out_dir, name):
    masses = params.get("masses")
    first = DiscreteDistribution.from_probabilities(params.require("first"), lambda_masses=masses)
    second = DiscreteDistribution.from_probabilities(params.require("second"), lambda_masses=masses)
    sampler = build_maximal_coupling(first, second)
    n = params.integer("n", 100_000)
    ens = sampler.draw_many(n, path_generator(seed, params.integer("substream", 0)))
    bound = coupling_bound_check(ens, sampler.tv_distance, maximal=True)
    pvals = [
        _chisquare_pvalue(
            np.bincount(np.asarray(draws, dtype=np.int64), minlength=dist.n_cells).astype(float),
            dist.probabilities,
        )
        for draws, dist in ((ens.first, first), (ens.second, second))
    ]
    check = bool(params.get("check", True))
    ok = (not check) or (bound.ok and min(pvals) >= 0.01)
    csv_path = out_dir / f"{name}.csv"
    write_coupling_csv([ens], csv_path)
    results = {
        "overlap": sampler.overlap,
        "tv": sampler.tv_distance,
        "mismatch_rate": ens.mismatch_rate,
        "mismatch_stderr": bound.stderr,
        "bound_ok": bound.ok,
        "marginal_chi2_pvalues": pvals,
        "n": n,
    }
    return results, ok, [csv_path]


@operation("meet-1d")
def _run_meet_1d(config, params, seed, out_dir, name):
    model = make_model(config["model"])
    cfg = _integrator(params, seed, default_h=0.001)
    pairs = [(float(a), float(b)) for a, b in params.require("pairs")]
    horizon = params.number("T", 1.0)
    n = params.integer("n", 10_000)
    collect = bool(params.get("csv", False))
    out = estimate_meeting_probability(model, pairs, horizon, n, cfg, collect=collect)
    table, ensembles = out if collect else (out, None)
    extra = []
    if collect:
        csv_path = out_dir / f"{name}.csv"
        write_coupling_csv(ensembles, csv_path)
        extra.append(csv_path)
    results = {
        "pairs": [
            {"x1": float(a), "x2": float(b), "probability": float(p), "stderr": float(s)}
            for (a, b), p, s in zip(table.pairs, table.probability, table.stderr)
        ],
        "minimum": table.minimum,
        "min_minus_3se": table.min_minus(3.0),
        "n": n,
        "horizon": horizon,
    }
    ok = True
    oracle = params.get("oracle")
    if oracle == "bm":
        sigma = params.number("sigma", 1.0)
        tol = params.number("oracle_tol", 0.02)
        expected = [bm_pair_meeting_probability(abs(a - b), horizon, sigma) for a, b in pairs]
        errs = [abs(e - float(p)) for e, p in zip(expected, table.probability)]
        results["oracle"] = {"expected": expected, "abs_err": errs, "tol": tol}
        ok = max(errs) <= tol
    return results, ok, extra


@operation("girsanov-check")
def _run_girsanov(config, params, seed, out_dir, name):
    base = make_model(config["model"])
    extra_spec = dict(params.require("extra"))
    kind = extra_spec.pop("kind", None)
    if kind is None:
        raise ConfigError("params.extra.kind is required (const, sign or tanh)")
    fn, sup = make_extra_drift(kind, base.dim, **extra_spec)
    split = DriftSplitModel(base=base, extra_drift=fn, sup_extra_drift=sup, name=f"{base.name}+{kind}")
    cfg = _integrator(params, seed)
    bins = _bin_grid(params.require("bins"))
    horizon = params.number("T", 1.0)
    n = params.integer("n", 100_000)
    direction = str(params.get("direction", "add-drift"))
    x0 = np.atleast_1d(np.asarray(params.get("x0", 0.0), dtype=float))
    weighted, wstats = reweighted_kernel_with_stats(
        split, x0, horizon, n, bins, cfg, direction=direction,
        self_normalize=bool(params.get("self_normalize", False)),
    )
    results = {
        "mean_weight": wstats.mean_weight,
        "stderr": wstats.stderr,
        "martingale_gap_sigmas": wstats.martingale_gap,
        "n_eff": wstats.n_eff,
        "overflow_count": wstats.overflow_count,
        "n": n,
        "direction": direction,
        "outside_mass": weighted.outside_mass,
    }
    ok = wstats.martingale_gap <= 3.0
    if bool(params.get("direct_check", True)):
        direct = sample_transition(split.full_model(), x0, horizon, n, cfg.shifted(10_000))
        masses, outside, _ = histogram_masses(direct.points, bins)
        direct_dist = DiscreteDistribution(
            weighted.cell_ids, weighted.lambda_masses, masses / bins.volumes, outside_mass=outside
        )
        results["tv_weighted_vs_direct"] = tv_exact(weighted, direct_dist)
    md_table = params.get("md")
    if md_table is not None:
        md_params = Params(dict(md_table))
        md_report = estimate_md_girsanov(
            split,
            radius=md_params.number("radius", 1.0),
            horizon=horizon,
            n=n,
            bins=_bin_grid(md_table.get("bins", params.require("bins"))),
            cfg=cfg.shifted(20_000),
            direction=direction,
        )
        results["md"] = _md_payload(md_report)
    return results, ok, []


@operation("harnack-parabolic")
def _run_harnack_parabolic(config, params, seed, out_dir, name):
    model = make_model(config["model"])
    eps = params.number("eps", 0.1)
    cells_table = params.get("cells", {})
    cells = CylinderCells(
        eps=eps,
        n_time=int(cells_table.get("n_time", 5)),
        n_angle=int(cells_table.get("n_angle", 8)),
        n_radius=int(cells_table.get("n_radius", 3)),
    )
    cfg = _integrator(params, seed, default_h=0.002)
    n = params.integer("n", 50_000)
    report = parabolic_harnack_check(
        model,
        x1_grid=_point_grid(params.require("x1_grid"), model.dim),
        x2_grid=_point_grid(params.require("x2_grid"), model.dim),
        eps=eps,
        n=n,
        cells=cells,
        cfg=cfg,
    )
    results = {
        "n_hat": report.n_hat,
        "md_min": report.md_min,
        "md_min_stderr": report.md_min_stderr,
        "md_argmin": list(report.md_argmin),
        "q_hat": report.q_hat,
        "bound_holds": report.bound_holds,
        "violations": report.violations,
        "captured_start0": report.captured_start0.tolist(),
        "captured_start_eps": report.captured_start_eps.tolist(),
        "early_mass": report.early_mass.tolist(),
        "excluded_cells": report.excluded_cells.tolist(),
        "eps": eps,
        "n": n,
    }
    corollary_table = params.get("corollary")
    if corollary_table is not None:
        coro = md_via_parabolic_corollary(
            model,
            x_grid=_point_grid(corollary_table["grid"], model.dim),
            eps=eps,
            n=n,
            bins=_bin_grid(corollary_table["bins"]),
            cfg=cfg.shifted(500),
            cells=cells,
        )
        results["corollary"] = {
            "kappa": coro.kappa,
            "kappa_stderr": coro.kappa_report.kappa_stderr,
            "q_hat": coro.q_hat,
            "q_prime": coro.q_prime,
            "q_prime_se": coro.q_prime_se,
            "p_eps": coro.p_eps.tolist(),
            "chained_lower_bound": coro.q_prime / report.n_hat if report.n_hat > 0 else None,
        }
    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w") as fh:
        fh.write("kind,i,j,ratio_sup\n")
        for label, ratio in zip(cells.labels(model.dim), report.cell_ratio_sup):
            val = "" if math.isnan(ratio) else repr(float(ratio))
            fh.write(f"{label[0]},{label[1]},{label[2]},{val}\n")
    return results, report.bound_holds, [csv_path]


@operation("harnack-elliptic")
def _run_harnack_elliptic(config, params, seed, out_dir, name):
    model = make_model(config["model"])
    radius = params.number("radius", 1.0)
    cells = SphereCells(n_angle=params.integer("n_angle", 36))
    cfg = _integrator(params, seed, default_h=0.001)
    n = params.integer("n", 100_000)
    report = elliptic_harnack_check(
        model,
        radius=radius,
        x_grid=_point_grid(params.require("grid"), model.dim),
        n=n,
        cells=cells,
        cfg=cfg,
        max_steps=params.integer("max_steps", 1_000_000),
    )
    results = {
        "n_hat": report.n_hat,
        "cells_excluded": report.excluded,
        "radius": radius,
        "n": n,
        "cell_sup": report.cell_sup.tolist(),
        "cell_inf": report.cell_inf.tolist(),
    }
    ok = True
    if bool(params.get("oracle", False)):
        grid = report.grid
        oracle_masses = np.stack(
            [poisson_cell_masses(x, radius, cells.n_cells(model.dim)) for x in grid]
        )
        oracle_n = float(np.max(np.max(oracle_masses, axis=0) / np.min(oracle_masses, axis=0)))
        rel_err = abs(report.n_hat / oracle_n - 1.0)
        tol = params.number("rel_tol", 0.1)
        results["oracle"] = {"n_ratio": oracle_n, "rel_err": rel_err, "tol": tol}
        ok = rel_err <= tol
    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w") as fh:
        fh.write("cell,sup,inf,ratio,passing\n")
        for c in range(report.cell_masses.shape[1]):
            ratio = report.cell_ratio[c]
            val = "" if math.isnan(ratio) else repr(float(ratio))
            fh.write(
                f"{c},{float(report.cell_sup[c])!r},{float(report.cell_inf[c])!r},"
                f"{val},{int(report.passing[c])}\n"
            )
    return results, ok, [csv_path]


@operation("md-elliptic")
def _run_md_elliptic(config, params, seed, out_dir, name):
    model = make_model(config["model"])
    horizons = [float(t) for t in params.require("horizons")]
    cfg = IntegratorConfig(
        step=params.number("h", 0.002),
        horizon=max(horizons),
        seed=seed,
        substream=params.integer("substream", 0),
    )
    report = md_via_elliptic(
        model,
        radius=params.number("radius", 1.0),
        horizons=horizons,
        x_grid=_point_grid(params.require("grid"), model.dim),
        n=params.integer("n", 20_000),
        cells=SphereCells(n_angle=params.integer("n_angle", 24)),
        cfg=cfg,
    )
    results = {
        "horizons": report.horizons.tolist(),
        "kappa": report.kappa.tolist(),
        "kappa_se": report.kappa_se.tolist(),
        "survival_sup": report.survival_sup.tolist(),
        "kappa_monotone": report.kappa_monotone,
        "survival_monotone": report.survival_monotone,
        "argmin_final": list(report.argmin_final),
        "radius": report.radius,
        "n": report.n,
        "convention": report.convention,
    }
    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w") as fh:
        fh.write("T,kappa,kappa_se,survival_sup\n")
        for t, k, s, surv in zip(report.horizons, report.kappa, report.kappa_se, report.survival_sup):
            fh.write(f"{float(t)!r},{float(k)!r},{float(s)!r},{float(surv)!r}\n")
    ok = report.kappa_monotone and report.survival_monotone
    return results, ok, [csv_path]


@operation("tv-curve")
def _run_tv_curve(config, params, seed, out_dir, name):
    mode = params.get("mode", "chain")
    times = params.require("times")
    if mode == "chain":
        chain = FiniteChain(np.asarray(params.require("matrix"), dtype=float))
        curve = tv_curve_to_stationary(chain, np.asarray(params.require("initial"), dtype=float), None, times)
    elif mode == "model":
        model = make_model(config["model"])
        cfg = _integrator(params, seed, default_t=max(float(t) for t in times))
        bins = _bin_grid(params.require("bins"))
        stat = params.require("stationary")
        if "masses" in stat:
            stationary = (np.asarray(stat["masses"], dtype=float), float(stat.get("outside", 0.0)))
        elif stat.get("kind") == "gaussian":
            if bins.dim != 1:
                raise ConfigError("gaussian stationary masses require 1-d bins")
            stationary = gaussian_bin_masses(float(stat["mean"]), float(stat["std"]), bins.edges[0])
        else:
            raise ConfigError("params.stationary needs masses=[...] or kind='gaussian' with mean/std")
        curve = tv_curve_to_stationary(
            model,
            np.atleast_1d(np.asarray(params.get("x0", 0.0), dtype=float)),
            stationary,
            times,
            n=params.integer("n", 20_000),
            bins=bins,
            cfg=cfg,
        )
    else:
        raise ConfigError(f"unknown tv-curve mode {mode!r}; use 'chain' or 'model'")
    results = {
        "kind": curve.kind,
        "times": curve.times.tolist(),
        "tv": curve.values.tolist(),
        "stderr": curve.stderr.tolist(),
    }
    ok = True
    if bool(params.get("check", True)):
        verdict = check_tv_monotonicity(curve)
        results["monotone"] = {
            "ok": verdict.ok,
            "max_excess": verdict.max_excess,
            "pairs_checked": verdict.pairs_checked,
            "violations": jsonable(verdict.violations),
        }
        ok = verdict.ok
    if bool(params.get("fit", False)):
        results["exponential_fit"] = fit_exponential(curve)
    csv_path = out_dir / f"{name}.csv"
    dat_path = out_dir / f"{name}.dat"
    curve.write_csv(csv_path)
    curve.write_gnuplot(dat_path)
    return results, ok, [csv_path, dat_path]


@operation("oracle")
def _run_oracle(config, params, seed, out_dir, name):
    what = params.require("what")
    if what == "gaussian-overlap":
        interval = params.get("interval")
        value = gaussian_overlap(
            params.number("m1"), params.number("m2"), params.number("sigma"),
            interval=tuple(interval) if interval is not None else None,
        )
        results = {"what": what, "value": value}
    elif what == "gaussian-tv":
        results = {
            "what": what,
            "value": gaussian_tv(params.number("m1"), params.number("m2"), params.number("sigma")),
        }
    elif what == "bm-meeting":
        results = {
            "what": what,
            "value": bm_pair_meeting_probability(
                params.number("distance"), params.number("T"), params.number("sigma", 1.0)
            ),
        }
    elif what == "ou-moments":
        mean, var = ou_moments(params.number("x0"), params.number("t"), params.number("theta"))
        results = {"what": what, "mean": mean, "variance": var}
    elif what == "disk-exit-mean":
        results = {
            "what": what,
            "value": disk_mean_exit_time(
                params.require("x"), params.number("radius", 1.0), params.integer("dim", 2)
            ),
        }
    elif what == "poisson-cells":
        masses = poisson_cell_masses(
            np.asarray(params.require("x"), dtype=float),
            params.number("radius", 1.0),
            params.integer("count", 36),
        )
        results = {"what": what, "masses": masses.tolist()}
    elif what == "chain-stationary":
        chain = FiniteChain(np.asarray(params.require("matrix"), dtype=float))
        results = {"what": what, "stationary": chain.stationary().tolist()}
    elif what == "chain-md":
        value = exact_md_finite_chain(
            np.asarray(params.require("matrix"), dtype=float),
            params.require("d"),
            params.require("dprime"),
        )
        results = {"what": what, "value": value}
    else:
        raise ConfigError(f"unknown oracle {what!r}")
    return results, True, []


# ---------------------------------------------------------------------------
# runners


def run_operation(config: dict, out_dir, seed_override: int | None = None) -> list[FsPath]:
    """Execute one configured operation; returns the deterministic artifacts.

    The report JSON and CSVs depend only on the config and seed; wall-clock
    metadata goes into the ``.meta.json`` sidecar, which is not returned.
    """
    validate_config(config)
    op = config.get("operation")
    if op not in OPERATIONS:
        raise ConfigError(f"unknown operation {op!r}; known: {sorted(OPERATIONS)}")
    seed = 0 if op == "oracle" else resolve_seed(config, seed_override)
    out_dir = FsPath(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = str(config.get("output", {}).get("name", op))
    params = Params(config.get("params", {}))
    started = time.perf_counter()
    results, ok, extra = OPERATIONS[op](config, params, seed, out_dir, name)
    payload = {
        "schema_version": 1,
        "operation": op,
        "seed": seed,
        "model": config.get("model"),
        "params": config.get("params", {}),
        "results": results,
        "ok": ok,
    }
    report_path = out_dir / f"{name}.json"
    _dump_json(report_path, payload)
    _dump_json(
        out_dir / f"{name}.meta.json",
        {
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "elapsed_s": time.perf_counter() - started,
            "version": __version__,
        },
    )
    return [report_path, *extra]


def run_suite(config: dict, out_dir, seed_override=None, threads=1, scale_override=None) -> bool:
    from . import checks as checks_mod

    validate_config(config)
    seed = resolve_seed(config, seed_override)
    params = config.get("params", {})
    n_scale = float(scale_override if scale_override is not None else params.get("n_scale", 1.0))
    names = params.get("checks")
    out_dir = FsPath(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    results = checks_mod.run_checks(names, seed=seed, n_scale=n_scale, threads=threads)
    for r in results:
        print(r.line())
    payload = {
        "schema_version": 1,
        "operation": "suite",
        "seed": seed,
        "n_scale": n_scale,
        "results": checks_mod.summary_payload(results),
        "ok": all(r.passed for r in results),
    }
    name = str(config.get("output", {}).get("name", "suite"))
    _dump_json(out_dir / f"{name}.json", payload)
    _dump_json(
        out_dir / f"{name}.meta.json",
        {
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "elapsed_s": time.perf_counter() - started,
            "version": __version__,
        },
    )
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    return all(r.passed for r in results)


# ---------------------------------------------------------------------------
# argument parsing


def _shipped_config(filename: str) -> dict:
    from importlib.resources import files

    resource = files("couplex").joinpath("configs", filename)
    import tomli

    return tomli.loads(resource.read_text())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="couplex",
        description="Coupling, overlap and local-mixing estimation for diffusions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for op in [*OPERATIONS, "suite"]:
        p = sub.add_parser(op, help=f"run the {op} operation from a TOML config")
        p.add_argument("--config", help="TOML config file (suite falls back to the shipped default)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="couplex-out", help="output directory (default: couplex-out)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: $COUPLEX_THREADS or 1)")
        if op == "suite":
            p.add_argument("--scale", type=float, default=None, help="override the sample-size scale factor")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
        if args.command == "suite":
            if args.config is not None:
                config = load_toml(args.config)
            else:
                config = _shipped_config("suite.toml")
            ok = run_suite(
                config, args.out, seed_override=args.seed, threads=threads,
                scale_override=getattr(args, "scale", None),
            )
            return 0 if ok else 2
        if args.config is None:
            raise ConfigError(f"--config is required for {args.command}")
        config = load_toml(args.config)
        config.setdefault("operation", args.command)
        if config["operation"] != args.command:
            raise ConfigError(
                f"config declares operation {config['operation']!r} but the "
                f"{args.command!r} subcommand was invoked"
            )
        written = run_operation(config, args.out, seed_override=args.seed)
        report = json.loads(written[0].read_text())
        for path in written:
            print(f"wrote {path}")
        return 0 if report["ok"] else 2
    except CouplexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
