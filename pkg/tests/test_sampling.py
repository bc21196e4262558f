import sys
import os
# Ensure project root is on sys.path for tests
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest
from scipy.stats import chisquare

from src.errors import ParameterError
from src.params_ring import CenteredPoly, get_param_set
from src.sampling import (
    NoisePoly,
    SeededRng,
    discrete_gaussian_pmf,
    expand_seed,
    gaussian_weight,
    parse_seed,
    psi_k_pmf,
    sample_psi_k,
    sample_sparse_ternary,
    sample_uniform_ring,
    seed_to_hex,
)

# Chi-square tests reject only below this p-value (99.9% level).
SIGNIFICANCE = 0.001


# ============================================================================
# Seeds and streams
# ============================================================================

def test_parse_seed_forms():
    assert parse_seed(42) == 42
    assert parse_seed("00" * 31 + "2a") == 42
    assert parse_seed("0x" + "00" * 31 + "2A") == 42
    assert parse_seed(bytes([42]) + bytes(31)) == 42
    assert seed_to_hex(42) == "0" * 62 + "2a"


@pytest.mark.parametrize("bad", ["abc", "zz" * 32, b"short", -1, 1 << 256, 1.5, True])
def test_parse_seed_rejects(bad):
    with pytest.raises(ParameterError):
        parse_seed(bad)


def test_same_stream_replays(seed_hex):
    first = SeededRng(seed_hex, stream_index=7).integers(0, 1000, size=50)
    second = SeededRng(seed_hex, stream_index=7).integers(0, 1000, size=50)
    assert np.array_equal(first, second)


def test_streams_and_forks_differ(rng):
    base = rng.integers(0, 1 << 30, size=20)
    other_stream = rng.for_stream(1).integers(0, 1 << 30, size=20)
    fork = rng.fork(3).integers(0, 1 << 30, size=20)
    assert not np.array_equal(base, other_stream)
    assert not np.array_equal(base, fork)
    assert not np.array_equal(other_stream, fork)


def test_fork_ignores_parent_draw_order(seed_hex):
    touched = SeededRng(seed_hex)
    touched.integers(0, 10, size=100)
    untouched = SeededRng(seed_hex)
    assert np.array_equal(touched.fork(1, 2).bits(64), untouched.fork(1, 2).bits(64))


def test_stream_index_bounds(seed_hex):
    with pytest.raises(ParameterError):
        SeededRng(seed_hex, stream_index=1 << 64)


# ============================================================================
# Ring samplers
# ============================================================================

def test_uniform_ring_range_and_replay(full_param, seed_hex):
    x = sample_uniform_ring(SeededRng(seed_hex), full_param)
    y = sample_uniform_ring(SeededRng(seed_hex), full_param)
    assert x == y
    assert x.coeffs.min() >= 0 and x.coeffs.max() < full_param.q
    # 1024 draws from 12289 values: many distinct ones, both halves hit.
    assert len(set(x.to_list())) > 900
    assert (x.coeffs < full_param.q // 2).sum() > 400


def test_psi_k_moments(full_param, rng):
    noise = sample_psi_k(rng, full_param)
    assert noise.k == 16
    assert noise.poly.max_abs() <= 16
    assert abs(float(noise.coeffs.mean())) < 0.5
    assert 6.5 < float(noise.coeffs.var()) < 9.5


def test_psi_k_zero(toy_param, rng):
    assert sample_psi_k(rng, toy_param, k=0).poly.nonzero_count() == 0
    with pytest.raises(ParameterError):
        sample_psi_k(rng, toy_param, k=-1)


def test_noise_poly_bound_enforced():
    with pytest.raises(ParameterError):
        NoisePoly(CenteredPoly([0, 3, 0]), 2)


@pytest.mark.parametrize("weight", [0, 1, 2, 16, 96])
def test_sparse_ternary_weight(weight, full_param, rng):
    poly = sample_sparse_ternary(rng, full_param.n, weight)
    assert poly.nonzero_count() == weight
    assert set(np.unique(poly.coeffs)) <= {-1, 0, 1}


def test_sparse_ternary_rejects_weight_above_n(rng):
    with pytest.raises(ParameterError):
        sample_sparse_ternary(rng, 8, 9)


def test_expand_seed_is_deterministic(full_param):
    seed = bytes(range(32))
    assert expand_seed(seed, full_param) == expand_seed(seed, full_param)
    assert expand_seed(seed, full_param) != expand_seed(bytes(32), full_param)


# ============================================================================
# Reference distributions
# ============================================================================

def test_psi_k_pmf():
    pmf = psi_k_pmf(1)
    assert pmf == pytest.approx({-1: 0.25, 0: 0.5, 1: 0.25})
    assert sum(psi_k_pmf(16).values()) == pytest.approx(1.0)
    assert psi_k_pmf(16)[16] == pytest.approx(4.0 ** -16)


def test_psi_16_matches_exact_pmf(full_param):
    rng = SeededRng(17)
    draws = np.concatenate([sample_psi_k(rng.fork(i), full_param, k=16).coeffs for i in range(100)])
    pmf = psi_k_pmf(16)
    # |x| >= 10 is pooled into the two end bins so every expected count stays above 5.
    support = np.arange(-10, 11)
    probs = np.array([pmf[int(x)] for x in support])
    probs[0] = sum(p for x, p in pmf.items() if x <= -10)
    probs[-1] = sum(p for x, p in pmf.items() if x >= 10)
    clipped = np.clip(draws, -10, 10)
    observed = np.array([np.count_nonzero(clipped == x) for x in support])
    _, p_value = chisquare(observed, probs * draws.size)
    assert p_value > SIGNIFICANCE


def test_uniform_ring_is_uniform_mod_q():
    param = get_param_set("toy-n8-q97")
    rng = SeededRng(19)
    draws = np.concatenate([sample_uniform_ring(rng.fork(i), param).coeffs for i in range(12500)])
    observed = np.bincount(draws, minlength=param.q)
    assert observed.shape[0] == param.q
    _, p_value = chisquare(observed)
    assert p_value > SIGNIFICANCE


def test_gaussian_helpers():
    assert gaussian_weight(0, 2.83) == 1.0
    assert gaussian_weight(3, 1.0) == pytest.approx(np.exp(-4.5))
    support, probs = discrete_gaussian_pmf(2.83)
    assert probs.sum() == pytest.approx(1.0)
    assert support[np.argmax(probs)] == 0
    with pytest.raises(ParameterError):
        gaussian_weight(1, 0.0)
