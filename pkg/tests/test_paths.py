import numpy as np
import pytest
from hypothesis import given, strategies as st

from youngflow.errors import RangeError
from youngflow.paths import (
    FBM_ALPHA_MARGIN,
    SampledPath,
    estimate_holder,
    gen_fbm,
    gen_smooth,
    gen_weierstrass,
    sample_function,
    stack_paths,
    uniform_grid,
    weierstrass_exponent,
)


def test_fbm_starts_at_zero_and_is_deterministic():
    a = gen_fbm(0.75, 1025, seed=42)
    b = gen_fbm(0.75, 1025, seed=42)
    assert a.values[0, 0] == 0.0
    assert np.array_equal(a.values, b.values)
    assert a.alpha == pytest.approx(0.75 - FBM_ALPHA_MARGIN)
    assert a.meta["method"] == "circulant"


def test_fbm_seed_changes_path():
    assert not np.array_equal(gen_fbm(0.7, 257, seed=1).values, gen_fbm(0.7, 257, seed=2).values)


def test_fbm_small_sample_estimate_in_band():
    est = estimate_holder(gen_fbm(0.75, 2**10 + 1, seed=42))
    assert 0.65 <= est.exponent <= 0.85


def test_fbm_increment_variance_matches_hurst():
    # Var(B_t - B_s) = |t - s|^{2H}; pooled over many seeds and lags
    H, n = 0.7, 513
    paths = np.stack([gen_fbm(H, n, seed=s).values[:, 0] for s in range(200)])
    for lag in (1, 8, 64):
        dt = lag / (n - 1)
        v = np.var(paths[:, lag:] - paths[:, :-lag])
        assert v == pytest.approx(dt ** (2 * H), rel=0.1)


def test_fbm_cholesky_matches_circulant_in_law():
    H, n = 0.8, 65
    a = np.stack([gen_fbm(H, n, seed=s, method="cholesky").values[-1, 0] for s in range(400)])
    b = np.stack([gen_fbm(H, n, seed=s, method="circulant").values[-1, 0] for s in range(400)])
    assert np.var(a) == pytest.approx(1.0, rel=0.2)
    assert np.var(b) == pytest.approx(1.0, rel=0.2)


def test_fbm_multidimensional_shape():
    p = gen_fbm(0.75, 129, seed=3, dim=3)
    assert p.values.shape == (129, 3)
    assert np.all(p.values[0] == 0)


@pytest.mark.parametrize("hurst", [0.5, 1.0, 0.3])
def test_fbm_rejects_hurst_outside_young_regime(hurst):
    with pytest.raises(RangeError):
        gen_fbm(hurst, 65)


@pytest.mark.parametrize("a,b", [(0.5, 7), (0.6, 3), (0.8, 3), (0.7, 3)])
def test_weierstrass_rejects_rough_exponents(a, b):
    assert weierstrass_exponent(a, b) <= 0.5
    with pytest.raises(RangeError):
        gen_weierstrass(a, b, 2**12)


def test_weierstrass_exponent_values():
    assert weierstrass_exponent(0.5, 7) == pytest.approx(np.log(2) / np.log(7))
    assert weierstrass_exponent(0.6, 3) == pytest.approx(0.46497, abs=1e-4)
    assert weierstrass_exponent(0.9, 1.1) == pytest.approx(1.10547, abs=1e-4)


def test_weierstrass_clamps_alpha_and_samples_series():
    p = gen_weierstrass(0.9, 1.1, 257)
    assert p.alpha == 1.0
    assert p.meta["raw_alpha"] == pytest.approx(1.10547, abs=1e-4)
    K = p.meta["params"]["terms"]
    t = p.times
    ref = sum(0.9**k * np.cos(1.1**k * np.pi * t) for k in range(K))
    assert np.allclose(p.values[:, 0], ref, atol=1e-10)


def test_weierstrass_rough_but_young():
    p = gen_weierstrass(0.8, 1.5, 257)
    assert p.alpha == pytest.approx(np.log(1 / 0.8) / np.log(1.5))


def test_smooth_examples():
    lin = gen_smooth("linear", 11, T=1.0, slope=1.0)
    assert np.allclose(lin.values[:, 0], np.linspace(0, 1, 11), atol=1e-15)
    sine = gen_smooth("sine", 1001, T=2 * np.pi, amp=1.0, freq=1.0)
    assert abs(sine.values[-1, 0]) < 1e-12
    poly = gen_smooth("polynomial", 3, T=1.0, coeffs=[0, 0, 1])
    assert np.array_equal(poly.values[:, 0], [0, 0.25, 1])
    assert lin.alpha == 1.0


def test_smooth_refinement_reproduces_coarse_nodes():
    coarse = gen_smooth("sine", 65, T=3.0, amp=2.0, freq=0.7)
    fine = gen_smooth("sine", 257, T=3.0, amp=2.0, freq=0.7)
    assert np.array_equal(fine.values[::4], coarse.values)
    assert np.array_equal(uniform_grid(257, 3.0)[::4], uniform_grid(65, 3.0))


def test_smooth_unknown_kind():
    with pytest.raises(RangeError):
        gen_smooth("spline", 10)


def test_sampled_path_validation():
    with pytest.raises(RangeError):
        SampledPath([0, 0.5, 0.5], [0, 1, 2])
    with pytest.raises(RangeError):
        SampledPath([0, 1], [0, np.nan])
    with pytest.raises(RangeError):
        SampledPath([0, 1], [0, 1], alpha=1.5)
    p = SampledPath([0, 1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        p.values[0, 0] = 5


def test_subsample_window_and_stack():
    p = gen_fbm(0.75, 33, seed=0)
    s = p.subsample(4)
    assert len(s) == 9 and np.array_equal(s.values, p.values[::4])
    w = p.window(8, 16)
    assert len(w) == 9 and w.times[0] == p.times[8]
    with pytest.raises(RangeError):
        p.subsample(5)
    both = stack_paths([p, p.map(np.sin)])
    assert both.dim == 2


def test_estimate_linear_is_one():
    est = estimate_holder(gen_smooth("linear", 1025, slope=3.0))
    assert est.exponent == pytest.approx(1.0, abs=0.01)
    assert not est.degenerate


def test_estimate_constant_is_degenerate():
    est = estimate_holder(SampledPath(uniform_grid(128, 1.0), np.ones(128)))
    assert est.degenerate and est.exponent == 1.0


def test_estimate_needs_enough_nodes():
    with pytest.raises(RangeError):
        estimate_holder(gen_smooth("linear", 32))


def test_estimate_preserved_under_smooth_map():
    # a smooth function of a Holder path keeps its exponent
    ests = [estimate_holder(gen_fbm(0.75, 2**16 + 1, seed=s).map(np.tanh)).exponent for s in range(10)]
    assert np.mean(ests) == pytest.approx(0.75, abs=0.05)


@given(st.floats(0.55, 0.95), st.integers(0, 2**31))
def test_fbm_property_finite_and_zero_start(h, seed):
    p = gen_fbm(h, 65, seed=seed)
    assert p.values[0, 0] == 0 and np.all(np.isfinite(p.values))
    assert 0.5 < p.alpha < h


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4), st.integers(3, 50))
def test_polynomial_property_exact_samples(coeffs, n):
    p = gen_smooth("polynomial", n, T=2.0, coeffs=coeffs)
    t = uniform_grid(n, 2.0)
    assert np.allclose(p.values[:, 0], np.polynomial.polynomial.polyval(t, coeffs), atol=1e-9)


def test_sample_function_declares_alpha():
    p = sample_function(lambda t: np.abs(t - 0.5) ** 0.8, 101, alpha=0.8)
    assert p.alpha == 0.8
