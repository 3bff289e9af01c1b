import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from couplex.coupling import DiscreteDistribution, build_maximal_coupling
from couplex.errors import IncompatibleSupport
from couplex.rng import path_generator
from couplex.mixing import BinGrid
from couplex.oracles import FiniteChain, gaussian_bin_masses
from couplex.sde import IntegratorConfig, make_model
from couplex.tvdist import (
    TvCurve,
    check_tv_monotonicity,
    coupling_bound_check,
    fit_exponential,
    overlap_exact,
    tv_curve_to_stationary,
    tv_exact,
)


def dist(probs, outside=0.0):
    return DiscreteDistribution.from_probabilities(probs, outside_mass=outside)


def test_tv_exact_hand_values():
    p = dist([0.7, 0.3])
    q = dist([0.5, 0.5])
    assert tv_exact(p, q) == pytest.approx(0.2)
    assert overlap_exact(p, q) == pytest.approx(0.8)
    assert tv_exact(p, p) == 0.0
    r = dist([1.0, 0.0])
    s = dist([0.0, 1.0])
    assert tv_exact(r, s) == pytest.approx(1.0)


def test_tv_counts_outside_mass_as_a_cell():
    p = dist([0.5, 0.2], outside=0.3)
    q = dist([0.5, 0.5], outside=0.0)
    assert tv_exact(p, q) == pytest.approx(0.3)
    assert overlap_exact(p, q) == pytest.approx(0.7)
    assert tv_exact(p, q) + overlap_exact(p, q) == pytest.approx(1.0)


def test_tv_requires_shared_support():
    p = dist([0.5, 0.5])
    q = dist([0.3, 0.3, 0.4])
    with pytest.raises(IncompatibleSupport):
        tv_exact(p, q)


@st.composite
def _prob_vec_pair(draw):
    m = draw(st.integers(min_value=2, max_value=8))
    def vec():
        v = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m)))
        return v / v.sum()
    return vec(), vec(), vec()


@settings(max_examples=50, deadline=None)
@given(_prob_vec_pair())
def test_tv_is_a_metric(triple):
    a, b, c = (dist(v) for v in triple)
    dab, dba = tv_exact(a, b), tv_exact(b, a)
    assert dab == pytest.approx(dba, abs=1e-12)          # symmetry
    assert 0.0 <= dab <= 1.0 + 1e-12                     # range
    assert tv_exact(a, a) <= 1e-12                       # identity
    assert dab <= tv_exact(a, c) + tv_exact(c, b) + 1e-12  # triangle
    assert dab + overlap_exact(a, b) == pytest.approx(1.0, abs=1e-12)


def test_chain_curve_matches_closed_form():
    # two-state chain: tv(t) = (1/3) * 0.7^t from the point mass at state 0
    chain = FiniteChain([[0.9, 0.1], [0.2, 0.8]])
    times = list(range(7))
    curve = tv_curve_to_stationary(chain, [1.0, 0.0], None, times)
    assert curve.kind == "exact-chain"
    expected = [(1.0 / 3.0) * 0.7**t for t in times]
    assert np.allclose(curve.values, expected, atol=1e-12)
    assert np.all(curve.stderr == 0.0)


def test_chain_curve_rejects_fractional_times():
    chain = FiniteChain([[0.9, 0.1], [0.2, 0.8]])
    with pytest.raises(ValueError):
        tv_curve_to_stationary(chain, [1.0, 0.0], None, [0, 0.5, 1])


def test_exact_curve_monotonicity_verdict():
    chain = FiniteChain([[0.9, 0.1], [0.2, 0.8]])
    curve = tv_curve_to_stationary(chain, [1.0, 0.0], None, range(10))
    verdict = check_tv_monotonicity(curve)
    assert verdict.ok and bool(verdict)
    assert verdict.pairs_checked == 45
    assert verdict.max_excess <= 0.0


def test_constructed_violation_is_detected():
    curve = TvCurve(
        times=np.array([0.0, 1.0, 2.0]),
        values=np.array([0.5, 0.2, 0.3]),  # rises after t=1
        stderr=np.zeros(3),
        kind="exact-chain",
    )
    verdict = check_tv_monotonicity(curve)
    assert not verdict.ok
    assert verdict.violations == ((1.0, 2.0, pytest.approx(0.1)),)


def test_mc_noise_band_tolerates_small_wiggles():
    curve = TvCurve(
        times=np.array([0.0, 1.0, 2.0]),
        values=np.array([0.5, 0.2, 0.21]),
        stderr=np.array([0.0, 0.01, 0.01]),
        kind="mc-model",
    )
    assert check_tv_monotonicity(curve).ok          # 0.01 rise within 3*(0.02)
    assert not check_tv_monotonicity(curve, z=0.1).ok


def test_model_curve_tracks_ou_relaxation():
    model = make_model("ou{theta=1}")
    bins = BinGrid.regular(-4.0, 4.0, 60)
    pi = gaussian_bin_masses(0.0, math.sqrt(0.5), bins.edges[0])
    times = [0.0, 0.5, 1.0, 2.0, 3.0]
    curve = tv_curve_to_stationary(
        model, [1.5], pi, times, n=20_000, bins=bins, cfg=IntegratorConfig(0.01, 3.0, seed=51)
    )
    assert curve.kind == "mc-model"
    assert curve.values[0] == pytest.approx(1.0 - pi[0][bins.assign([[1.5]])[0]], abs=1e-12)
    assert curve.stderr[0] == 0.0
    assert check_tv_monotonicity(curve).ok
    assert curve.values[-1] < 0.05  # has essentially relaxed by t=3


def test_model_curve_requires_mc_arguments():
    model = make_model("ou{theta=1}")
    with pytest.raises(ValueError):
        tv_curve_to_stationary(model, [0.0], (np.array([1.0]), 0.0), [1.0])
    with pytest.raises(TypeError):
        tv_curve_to_stationary("chain", [0.0], None, [1.0])


def test_coupling_bound_modes():
    p = dist([0.7, 0.3])
    q = dist([0.5, 0.5])
    sampler = build_maximal_coupling(p, q)
    ens = sampler.draw_many(50_000, path_generator(52, 0))
    check = coupling_bound_check(ens, tv_exact(p, q), maximal=True)
    assert check.ok and check.mode == "maximal"
    assert check.mismatch_rate == pytest.approx(0.2, abs=4 * check.stderr + 1e-12)
    # any coupling is an upper bound witness: rate from the maximal one still
    # dominates the tv of a *less separated* pair
    weaker = coupling_bound_check(ens, 0.1, maximal=False)
    assert weaker.ok and weaker.mode == "upper"
    # but cannot certify a larger tv than its mismatch rate
    impossible = coupling_bound_check(ens, 0.5, maximal=False)
    assert not impossible.ok


def test_fit_exponential_recovers_rate():
    times = np.linspace(0.0, 5.0, 11)
    values = 0.8 * np.exp(-1.3 * times)
    curve = TvCurve(times, values, np.zeros_like(times), "exact-chain")
    fit = fit_exponential(curve)
    assert fit["rate"] == pytest.approx(1.3, abs=1e-9)
    assert fit["amplitude"] == pytest.approx(0.8, abs=1e-9)
    assert fit["residual"] == pytest.approx(0.0, abs=1e-9)
    empty = fit_exponential(TvCurve([0.0, 1.0], [0.0, 0.0], [0.0, 0.0], "exact-chain"))
    assert math.isnan(empty["rate"])


def test_curve_file_formats():
    curve = TvCurve([0.0, 1.0], [0.5, 0.25], [0.0, 0.01], "mc-model")
    buf = io.StringIO()
    curve.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,tv,stderr"
    assert lines[1].split(",") == ["0.0", "0.5", "0.0"]
    buf = io.StringIO()
    curve.write_gnuplot(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# t tv"
    assert lines[2].split() == ["1.0", "0.25"]


def test_curve_validation():
    with pytest.raises(ValueError):
        TvCurve([0.0, 0.0], [0.1, 0.1], [0.0, 0.0], "exact-chain")
    with pytest.raises(ValueError):
        TvCurve([0.0, 1.0], [0.1], [0.0, 0.0], "exact-chain")
