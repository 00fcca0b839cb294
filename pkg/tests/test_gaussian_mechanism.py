import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from credit.embedding_io import EmbeddingMatrix, clip_embeddings
from credit.errors import ParamError, SensitivityError
from credit.gaussian_mechanism import (
    DefenseParams,
    apply_mechanism,
    calibrate_sigma_dp,
    mi_upper_bound,
    row_noise,
)


def clipped(rng, n=40, d=3, radius=1.0):
    return clip_embeddings(EmbeddingMatrix(rng.standard_normal((n, d)) * 2.0), radius)


def test_mechanism_adds_seeded_noise(rng):
    m = clipped(rng)
    p = DefenseParams(sigma=0.5, delta_sensitivity=2.0, d=3, seed=7)
    out = apply_mechanism(m, p)
    expected = m.values + np.stack([row_noise(p, i) for i in range(m.n)])
    assert np.array_equal(out.values, expected)
    assert out.clip_radius is None


def test_mechanism_deterministic(rng):
    m = clipped(rng)
    p = DefenseParams(sigma=0.5, delta_sensitivity=2.0, d=3, seed=123)
    a = apply_mechanism(m, p)
    b = apply_mechanism(m, p)
    assert a.values.tobytes() == b.values.tobytes()


def test_row_noise_independent_of_matrix_size(rng):
    """Row i's noise depends on (seed, i) only, so prefixes agree."""
    p = DefenseParams(sigma=1.0, delta_sensitivity=2.0, d=4, seed=9)
    small = clipped(rng, n=10, d=4)
    large = EmbeddingMatrix(
        np.vstack([small.values, clipped(rng, n=15, d=4).values]),
        clip_radius=1.0,
    )
    out_small = apply_mechanism(small, p)
    out_large = apply_mechanism(large, p)
    assert np.array_equal(out_large.values[:10], out_small.values)


def test_noise_statistics(rng):
    # crude moment check on a long stream, generous bands
    p = DefenseParams(sigma=0.7, delta_sensitivity=2.0, d=8, seed=0)
    draws = np.stack([row_noise(p, i) for i in range(4000)])
    assert abs(float(draws.mean())) < 0.01
    assert abs(float(draws.std()) - 0.7) < 0.01


def test_mechanism_requires_clipped_input(rng):
    m = EmbeddingMatrix(rng.standard_normal((5, 3)))
    p = DefenseParams(sigma=1.0, delta_sensitivity=2.0, d=3, seed=0)
    with pytest.raises(SensitivityError):
        apply_mechanism(m, p)


def test_mechanism_rejects_dimension_mismatch(rng):
    m = clipped(rng, d=3)
    p = DefenseParams(sigma=1.0, delta_sensitivity=2.0, d=4, seed=0)
    with pytest.raises(ParamError):
        apply_mechanism(m, p)


def test_mechanism_rejects_undersized_sensitivity(rng):
    # radius 1.0 implies sensitivity 2.0; declaring less is an error
    m = clipped(rng, radius=1.0)
    p = DefenseParams(sigma=1.0, delta_sensitivity=1.5, d=3, seed=0)
    with pytest.raises(SensitivityError):
        apply_mechanism(m, p)


def test_defense_params_validation():
    with pytest.raises(ParamError):
        DefenseParams(sigma=0.0, delta_sensitivity=2.0, d=3, seed=0)
    with pytest.raises(ParamError):
        DefenseParams(sigma=1.0, delta_sensitivity=0.0, d=3, seed=0)
    with pytest.raises(ParamError):
        DefenseParams(sigma=1.0, delta_sensitivity=2.0, d=0, seed=0)
    with pytest.raises(ParamError):
        DefenseParams(sigma=1.0, delta_sensitivity=2.0, d=3, seed=-1)
    with pytest.raises(ParamError):
        DefenseParams(sigma=1.0, delta_sensitivity=2.0, d=3, seed=2**64)


def test_calibrate_sigma_dp_frozen_values():
    """Calibration sqrt(2 ln(1.25/delta)) * Delta / eps at two pinned points."""
    got = calibrate_sigma_dp(1.0 - 1e-9, 1e-5, 1.0)
    assert got == pytest.approx(4.8448052674501945, abs=1e-12)
    # ln(1.25/0.125) = ln 10 and eps = 0.5 give sigma = 2 sqrt(2 ln 10)
    got = calibrate_sigma_dp(0.5, 0.125, 1.0)
    assert got == pytest.approx(2.0 * math.sqrt(2.0 * math.log(10.0)), abs=1e-12)
    assert got == pytest.approx(4.291932052578694, abs=1e-12)


def test_calibrate_sigma_dp_exact_form():
    eps, delta, sens = 0.5, 1e-6, 3.0
    want = math.sqrt(2.0 * math.log(1.25 / delta)) * sens / eps
    assert calibrate_sigma_dp(eps, delta, sens) == want


@pytest.mark.parametrize("eps", [0.0, 1.0, 1.5, -0.2])
def test_calibrate_sigma_dp_domain_eps(eps):
    with pytest.raises(ParamError):
        calibrate_sigma_dp(eps, 1e-5, 1.0)


@pytest.mark.parametrize("delta", [0.0, 1.0, 2.0])
def test_calibrate_sigma_dp_domain_delta(delta):
    with pytest.raises(ParamError):
        calibrate_sigma_dp(0.5, delta, 1.0)


def test_mi_upper_bound_formula():
    # beta = Delta^2 n_comp / (2 sigma^2)
    assert mi_upper_bound(2.0, 0.5, 1) == pytest.approx(8.0)
    assert mi_upper_bound(2.0, 0.5, 3) == pytest.approx(24.0)
    assert mi_upper_bound(1.0, 2.0, 1) == pytest.approx(0.125)


@given(
    sens=st.floats(min_value=1e-3, max_value=1e3),
    sigma=st.floats(min_value=1e-3, max_value=1e3),
)
def test_mi_upper_bound_scaling(sens, sigma):
    # invariant under joint rescaling of Delta and sigma
    base = mi_upper_bound(sens, sigma)
    assert mi_upper_bound(2.0 * sens, 2.0 * sigma) == pytest.approx(base, rel=1e-12)


def test_mi_upper_bound_rejects_bad_args():
    with pytest.raises(ParamError):
        mi_upper_bound(0.0, 1.0)
    with pytest.raises(ParamError):
        mi_upper_bound(1.0, -1.0)
    with pytest.raises(ParamError):
        mi_upper_bound(1.0, 1.0, 0)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**64 - 1),
    sigma=st.floats(min_value=1e-2, max_value=10.0),
)
def test_noise_scales_with_sigma(seed, sigma):
    unit = DefenseParams(sigma=1.0, delta_sensitivity=2.0, d=5, seed=seed)
    scaled = DefenseParams(sigma=sigma, delta_sensitivity=2.0, d=5, seed=seed)
    np.testing.assert_allclose(
        row_noise(scaled, 3), sigma * row_noise(unit, 3), rtol=1e-12
    )
