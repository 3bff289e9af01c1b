import math

import numpy as np
import pytest

from couplex.errors import InvalidKernel
from couplex.oracles import (
    FiniteChain,
    bm_kernel,
    bm_pair_meeting_probability,
    chain_marginal,
    disk_mean_exit_time,
    gaussian_bin_masses,
    gaussian_envelope_check,
    gaussian_overlap,
    gaussian_tv,
    ou_kernel,
    ou_moments,
    ou_stationary_std,
    poisson_cell_masses,
    poisson_kernel_disk,
)


def test_gaussian_overlap_frozen_values():
    assert gaussian_overlap(0.0, 1.0, 1.0) == pytest.approx(0.6170750774519738, abs=1e-12)
    assert gaussian_overlap(0.0, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert gaussian_tv(0.0, 1.0, 1.0) == pytest.approx(1.0 - 0.6170750774519738, abs=1e-12)
    # quadrature route agrees with the closed form on the whole line
    wide = gaussian_overlap(0.0, 1.0, 1.0, interval=(-40.0, 41.0))
    assert wide == pytest.approx(0.6170750774519738, abs=1e-9)
    with pytest.raises(ValueError):
        gaussian_overlap(0.0, 1.0, 0.0)


def test_restricted_overlap_frozen_value():
    m, v = ou_moments(1.0, 1.0, 1.0)
    val = gaussian_overlap(-m, m, math.sqrt(v), interval=(-1.0, 1.0))
    assert val == pytest.approx(0.5383312333750137, abs=1e-9)


def test_ou_moments():
    m, v = ou_moments(1.0, 1.0, 1.0)
    assert m == pytest.approx(0.36787944117144233, abs=1e-15)
    assert v == pytest.approx(0.43233235838169365, abs=1e-15)
    assert ou_moments(2.5, 0.7, 0.0) == (2.5, 0.7)  # theta=0 is Brownian
    assert ou_stationary_std(1.0) == pytest.approx(math.sqrt(0.5))
    # long-time variance converges to the stationary one
    _, v_inf = ou_moments(1.0, 50.0, 1.0)
    assert v_inf == pytest.approx(0.5, abs=1e-12)


def test_bm_meeting_probability_frozen_value():
    assert bm_pair_meeting_probability(1.0, 1.0) == pytest.approx(0.4795001221869535, abs=1e-12)
    assert bm_pair_meeting_probability(0.0, 1.0) == pytest.approx(1.0)
    assert bm_pair_meeting_probability(1.0, 1e9) == pytest.approx(1.0, abs=1e-4)
    # doubling sigma at fixed distance = quadrupling the horizon
    assert bm_pair_meeting_probability(1.0, 1.0, sigma=2.0) == pytest.approx(
        bm_pair_meeting_probability(1.0, 4.0), abs=1e-14
    )


def test_gaussian_bin_masses_accounting():
    edges = np.linspace(-2.0, 2.0, 9)
    masses, outside = gaussian_bin_masses(0.0, 1.0, edges)
    assert masses.sum() + outside == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(masses, masses[::-1])  # symmetric around the mean


def test_chain_stationary_and_marginal():
    chain = FiniteChain([[0.9, 0.1], [0.2, 0.8]])
    pi = chain.stationary()
    assert np.allclose(pi, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)
    assert np.allclose(pi @ chain.matrix, pi, atol=1e-12)
    mu2 = chain_marginal(chain, [1.0, 0.0], 2)
    assert np.allclose(mu2, np.array([1.0, 0.0]) @ np.linalg.matrix_power(chain.matrix, 2))
    assert np.allclose(chain.marginal([0.5, 0.5], 0), [0.5, 0.5])
    with pytest.raises(ValueError):
        chain.marginal([1.0, 0.0], -1)


def test_chain_validation():
    with pytest.raises(InvalidKernel):
        FiniteChain([[0.9, 0.2], [0.2, 0.8]])
    with pytest.raises(InvalidKernel):
        FiniteChain([[1.0, 0.0]])
    with pytest.raises(InvalidKernel):
        FiniteChain([[1.5, -0.5], [0.0, 1.0]])


def test_poisson_kernel_center_is_uniform():
    assert poisson_kernel_disk([0.0, 0.0], 0.0) == pytest.approx(1.0 / (2.0 * math.pi))
    masses = poisson_cell_masses([0.0, 0.0], 1.0, 4)
    assert np.allclose(masses, 0.25, atol=1e-10)


def test_poisson_cells_off_center():
    masses = poisson_cell_masses([0.5, 0.0], 1.0, 8)
    assert masses.sum() == pytest.approx(1.0, abs=1e-9)
    # the two sectors straddling theta=0 (nearest boundary) carry the most mass
    assert masses.argmax() in (3, 4)
    assert masses.max() > masses.min()
    # mirror symmetry across the x-axis
    assert np.allclose(masses, masses[::-1], atol=1e-10)


def test_disk_exit_time():
    assert disk_mean_exit_time([0.0, 0.0], 1.0, 2) == pytest.approx(0.5)
    assert disk_mean_exit_time([1.0, 0.0], 1.0, 2) == pytest.approx(0.0)
    assert disk_mean_exit_time(0.0, 2.0, 1) == pytest.approx(4.0)


def test_kernels_evaluate_known_densities():
    k = bm_kernel()
    assert k.density(0.0, 0.0, 1.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))
    assert k.density(0.0, 1.0, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi))
    ko = ou_kernel(theta=1.0)
    m, v = ou_moments(1.0, 1.0, 1.0)
    assert ko.density(1.0, m, 1.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi * v))


def test_envelope_check_passes_for_true_constants():
    # BM density is (2 pi t)^{-1/2} exp(-|x-y|^2 / (2t)); any prefactor above
    # (2 pi)^{-1/2} with scale 2 is an upper envelope, below it a lower one
    pts = [-1.0, 0.0, 2.0]
    v = gaussian_envelope_check(bm_kernel(), 0.5, 0.40, 2.0, 0.39, 2.0, pts)
    assert v.ok and v.upper_ok and v.lower_ok
    assert v.worst_upper <= 0.0 and v.worst_lower <= 0.0
    # looser exponential scales only help the respective side
    v2 = gaussian_envelope_check(bm_kernel(), 0.5, 0.40, 2.5, 0.39, 1.5, pts)
    assert v2.ok


def test_envelope_check_flags_too_small_prefactor():
    pts = [-1.0, 0.0, 2.0]
    v = gaussian_envelope_check(bm_kernel(), 0.5, 0.30, 2.0, 0.39, 2.0, pts)
    assert not v.upper_ok and not v.ok
    assert v.worst_upper > 0.0
    v2 = gaussian_envelope_check(bm_kernel(), 0.5, 0.40, 2.0, 0.45, 2.0, pts)
    assert not v2.lower_ok and not v2.ok
