import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from couplex.coupling import (
    DiscreteDistribution,
    build_maximal_coupling,
    estimate_meeting_probability,
    intersection_couple_1d,
    mixture_reconstruction,
    write_coupling_csv,
)
from couplex.errors import IncompatibleSupport
from couplex.oracles import bm_pair_meeting_probability
from couplex.rng import path_generator
from couplex.sde import IntegratorConfig, make_model


def test_distribution_validates_mass():
    with pytest.raises(ValueError):
        DiscreteDistribution.from_probabilities([0.5, 0.4])  # sums to 0.9
    with pytest.raises(ValueError):
        DiscreteDistribution.from_probabilities([0.5, -0.5, 1.0])
    d = DiscreteDistribution.from_probabilities([0.25, 0.75])
    assert d.in_cell_mass == pytest.approx(1.0)


def test_shared_support_is_enforced():
    a = DiscreteDistribution.from_probabilities([0.5, 0.5])
    b = DiscreteDistribution.from_probabilities([0.2, 0.3, 0.5])
    with pytest.raises(IncompatibleSupport):
        a.require_shared_support(b)
    c = DiscreteDistribution.from_probabilities([0.5, 0.5], lambda_masses=[2.0, 2.0])
    with pytest.raises(IncompatibleSupport):
        a.require_shared_support(c)


def test_bernoulli_overlap_and_tv_are_exact():
    # min(0.7,0.5) + min(0.3,0.5) = 0.8, tv = 0.2
    p = DiscreteDistribution.from_probabilities([0.7, 0.3])
    q = DiscreteDistribution.from_probabilities([0.5, 0.5])
    sampler = build_maximal_coupling(p, q)
    assert sampler.overlap == pytest.approx(0.8, abs=1e-15)
    assert sampler.tv_distance == pytest.approx(0.2, abs=1e-15)


def test_identical_distributions_always_coalesce():
    p = DiscreteDistribution.from_probabilities([0.3, 0.7])
    sampler = build_maximal_coupling(p, p)
    assert sampler.overlap == 1.0
    ens = sampler.draw_many(500, path_generator(1, 0))
    assert ens.coalesced.all()
    assert np.array_equal(ens.first, ens.second)


def test_disjoint_supports_never_coalesce():
    p = DiscreteDistribution.from_probabilities([1.0, 0.0])
    q = DiscreteDistribution.from_probabilities([0.0, 1.0])
    sampler = build_maximal_coupling(p, q)
    assert sampler.overlap == 0.0 and sampler.xi is None
    ens = sampler.draw_many(200, path_generator(2, 0))
    assert not ens.coalesced.any()
    assert ens.mismatch_rate == 1.0


def test_outside_mass_is_rejected():
    p = DiscreteDistribution.from_probabilities([0.5, 0.4], outside_mass=0.1)
    q = DiscreteDistribution.from_probabilities([0.5, 0.5])
    with pytest.raises(ValueError):
        build_maximal_coupling(p, q)


@st.composite
def _prob_pairs(draw):
    m = draw(st.integers(min_value=2, max_value=12))
    u = draw(st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m))
    v = draw(st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m))
    return np.array(u) / np.sum(u), np.array(v) / np.sum(v)


@given(_prob_pairs())
@settings(max_examples=50, deadline=None)
def test_mixture_identity_property(pair):
    pu, pv = pair
    p = DiscreteDistribution.from_probabilities(pu)
    q = DiscreteDistribution.from_probabilities(pv)
    sampler = build_maximal_coupling(p, q)
    assert np.allclose(mixture_reconstruction(sampler, 1), pu, atol=1e-12)
    assert np.allclose(mixture_reconstruction(sampler, 2), pv, atol=1e-12)
    assert 0.0 <= sampler.overlap <= 1.0


def test_draw_many_marginals_and_rate():
    p = DiscreteDistribution.from_probabilities([0.6, 0.1, 0.3])
    q = DiscreteDistribution.from_probabilities([0.2, 0.5, 0.3])
    sampler = build_maximal_coupling(p, q)
    n = 40_000
    ens = sampler.draw_many(n, path_generator(3, 0))
    se = math.sqrt(sampler.tv_distance * sampler.overlap / n)
    assert abs(ens.mismatch_rate - sampler.tv_distance) <= 4 * se
    for draws, dist in ((ens.first, p), (ens.second, q)):
        freqs = np.bincount(draws, minlength=3) / n
        assert np.allclose(freqs, dist.probabilities, atol=0.015)


def test_intersection_coupling_glues_paths():
    model = make_model("bm{d=1}")
    cfg = IntegratorConfig(step=0.001, horizon=1.0, seed=77, substream=4)
    res = intersection_couple_1d(model, -0.1, 0.1, 1.0, cfg)
    assert res.coalesced  # starts this close meet w.h.p.; seed chosen to meet
    k = int(round(res.tau / 0.001))
    assert np.array_equal(res.first.states[k:], res.second.states[k:])
    # before tau the copies are distinct and driven independently
    assert not np.allclose(res.first.states[:k], res.second.states[:k])


def test_intersection_requires_bounded_model():
    model = make_model("ou{theta=1}")  # no sup_drift declared
    cfg = IntegratorConfig(step=0.01, horizon=1.0, seed=1)
    with pytest.raises(ValueError):
        intersection_couple_1d(model, 0.0, 1.0, 1.0, cfg)


def test_meeting_probability_matches_reflection_oracle():
    model = make_model("bm{d=1}")
    cfg = IntegratorConfig(step=0.0005, horizon=1.0, seed=55)
    table = estimate_meeting_probability(model, [(-0.5, 0.5)], 1.0, 4000, cfg)
    target = bm_pair_meeting_probability(1.0, 1.0)
    assert table.probability[0] == pytest.approx(target, abs=0.03)
    assert table.min_minus(3.0) < table.minimum


def test_degenerate_pair_meets_instantly():
    model = make_model("bm{d=1}")
    cfg = IntegratorConfig(step=0.01, horizon=0.1, seed=56)
    table, ens = estimate_meeting_probability(model, [(0.3, 0.3)], 0.1, 50, cfg, collect=True)
    assert table.probability[0] == 1.0
    assert np.all(ens[0].tau == 0.0)
    assert np.array_equal(ens[0].first, ens[0].second)


def test_coupling_csv_format():
    model = make_model("bm{d=1}")
    cfg = IntegratorConfig(step=0.01, horizon=0.5, seed=57)
    _, ens = estimate_meeting_probability(model, [(-0.2, 0.2)], 0.5, 5, cfg, collect=True)
    buf = io.StringIO()
    write_coupling_csv(ens, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "pair_id,x1,x2,coalesced,tau"
    assert len(lines) == 6
    for line in lines[1:]:
        fields = line.split(",")
        assert fields[0] == "0" and fields[3] in ("0", "1")
        assert (fields[4] == "") == (fields[3] == "0")  # tau shown iff met
