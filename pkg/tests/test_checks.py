import math

import pytest

from couplex.checks import CHECKS, CheckResult, _scaled, _stat_tol, run_checks, summary_payload


def test_scaled_sample_sizes_floor():
    assert _scaled(100_000, 1.0) == 100_000
    assert _scaled(100_000, 0.1) == 10_000
    assert _scaled(1_000, 0.01) == 200  # floored, never vanishing
    assert _scaled(100, 1.0) == 200


def test_stat_tol_widens_but_never_tightens():
    assert _stat_tol(0.05, 1.0) == 0.05
    assert _stat_tol(0.05, 0.25) == pytest.approx(0.1)
    assert _stat_tol(0.05, 4.0) == 0.05  # oversampling never shrinks the band


def test_result_line_format():
    ok = CheckResult("alpha", True, detail="x = 1")
    bad = CheckResult("beta", False, detail="y missed")
    assert ok.line() == "[PASS] alpha: x = 1"
    assert bad.line() == "[FAIL] beta: y missed"


def test_registry_has_ten_checks():
    assert len(CHECKS) == 10
    assert all(callable(fn) for fn in CHECKS.values())


def test_run_checks_subset_and_unknown():
    results = run_checks(["residual_mixture_identity"], n_scale=0.05)
    assert [r.name for r in results] == ["residual_mixture_identity"]
    assert results[0].passed
    with pytest.raises(KeyError):
        run_checks(["no_such_check"])


def test_run_checks_thread_pool_matches_serial():
    names = ["residual_mixture_identity", "maximal_coupling_bernoulli"]
    serial = run_checks(names, seed=1234, n_scale=0.05, threads=1)
    pooled = run_checks(names, seed=1234, n_scale=0.05, threads=2)
    assert [r.observed for r in serial] == [r.observed for r in pooled]


def test_summary_payload_shape():
    results = run_checks(["residual_mixture_identity"], n_scale=0.05)
    payload = summary_payload(results)
    assert payload["n_checks"] == 1 and payload["n_passed"] == 1
    assert payload["all_passed"] is True
    assert payload["results"][0]["name"] == "residual_mixture_identity"
    assert set(payload["results"][0]) == {"name", "passed", "observed", "thresholds", "detail"}
