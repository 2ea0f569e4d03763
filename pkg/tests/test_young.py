import numpy as np
import pytest
from hypothesis import given, strategies as st

from youngflow.diagnostics import loglog_slope
from youngflow.errors import RangeError, YoungConditionError
from youngflow.paths import gen_fbm, gen_smooth, sample_function, uniform_grid
from youngflow.young import (
    IntegrandPath,
    dyadic_refinements,
    integrate_one_form,
    ito_residual,
    young_integrate,
)


def test_identity_integrand_telescopes():
    Z = gen_fbm(0.75, 513, seed=1, dim=2)
    I = young_integrate(IntegrandPath.constant(np.eye(2), Z), Z)
    assert np.allclose(I.values[-1], Z.values[-1] - Z.values[0], atol=1e-13)
    assert np.all(I.values[0] == 0)


def test_zero_integrand():
    Z = gen_fbm(0.75, 129, seed=1)
    I = young_integrate(IntegrandPath.constant([[0.0]], Z), Z)
    assert np.all(I.values == 0)


def test_constant_integrand_exact():
    Z = gen_fbm(0.8, 257, seed=4, dim=2)
    M = np.array([[1.0, -2.0], [0.5, 3.0], [0.0, 1.0]])
    I = young_integrate(IntegrandPath.constant(M, Z), Z)
    assert np.allclose(I.values, (Z.values - Z.values[0]) @ M.T, atol=1e-12)


def test_chain_rule_smooth_sine():
    Z = gen_smooth("sine", 2**14 + 1, T=1.0, amp=1.3, freq=0.8)
    I = young_integrate(IntegrandPath.from_path(Z, lambda z: z[:, :, None]), Z)
    ref = (Z.values[-1, 0] ** 2 - Z.values[0, 0] ** 2) / 2
    assert I.values[-1, 0] == pytest.approx(ref, abs=1e-3)


def test_young_condition_reported():
    Z = gen_fbm(0.75, 65, seed=0).with_alpha(0.4)
    Y = IntegrandPath(Z.times, Z.values, alpha=0.5)
    with pytest.raises(YoungConditionError) as info:
        young_integrate(Y, Z)
    assert info.value.alpha_integrand == 0.5 and info.value.alpha_driver == 0.4


def test_dimension_mismatch():
    Z = gen_fbm(0.75, 65, seed=0, dim=2)
    with pytest.raises(RangeError):
        young_integrate(IntegrandPath.constant([[1.0]], Z), Z)


def test_linearity_exact():
    Z = gen_fbm(0.7, 257, seed=9)
    Y1 = IntegrandPath.from_path(Z, lambda z: np.sin(z)[:, :, None])
    Y2 = IntegrandPath.from_path(Z, lambda z: (z**2)[:, :, None])
    Y = IntegrandPath(Z.times, 2 * Y1.values - 3 * Y2.values)
    lhs = young_integrate(Y, Z).values
    rhs = 2 * young_integrate(Y1, Z).values - 3 * young_integrate(Y2, Z).values
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_additivity_over_time():
    Z = gen_fbm(0.75, 257, seed=2)
    Y = IntegrandPath.from_path(Z, lambda z: np.cos(z)[:, :, None])
    whole = young_integrate(Y, Z).values[-1]
    a = young_integrate(IntegrandPath(Y.times[:101], Y.values[:101]), Z.window(0, 100)).values[-1]
    b = young_integrate(IntegrandPath(Y.times[100:], Y.values[100:]), Z.window(100, 256)).values[-1]
    assert np.allclose(a + b, whole, atol=1e-13)


def test_mismatched_grids_merge():
    Z = gen_smooth("linear", 5, T=1.0, slope=2.0)
    Y = IntegrandPath(uniform_grid(3, 1.0), np.array([1.0, 3.0, 5.0]))
    I = young_integrate(Y, Z)
    # left-constant integrand: 1 on [0, .5), 3 on [.5, 1)
    assert len(I) == 5
    assert I.values[-1, 0] == pytest.approx(1.0 * 1.0 + 3.0 * 1.0)


def test_dyadic_refinement_cauchy_slope():
    slopes = []
    for seed in range(4):
        Z = gen_fbm(0.75, 2**14 + 1, seed=seed)
        diffs, mesh = [], []
        for lev in range(7, 14):
            Zs = Z.subsample(2 ** (14 - lev))
            Y = IntegrandPath.from_path(Zs, lambda z: np.sin(3 * z)[:, :, None])
            r = dyadic_refinements(Y, Zs, levels=2)
            diffs.append(abs(r[1, 0] - r[0, 0]))
            mesh.append(Zs.mesh)
        slopes.append(loglog_slope(mesh, diffs))
    assert np.mean(slopes) == pytest.approx(0.5, abs=0.2)


def test_refinements_returned_with_integral():
    Z = gen_fbm(0.75, 65, seed=0)
    I, refs = young_integrate(IntegrandPath.from_path(Z, lambda z: z[:, :, None]), Z, return_refinements=True)
    assert refs.shape == (3, 1)
    assert refs[-1, 0] == I.values[-1, 0]


def test_one_form_exact_differential():
    x = sample_function(lambda t: np.column_stack([np.cos(t), np.sin(2 * t)]), 2**14 + 1, T=1.5)
    f = lambda p: p[:, 0] ** 2 * p[:, 1]
    df = lambda p: np.column_stack([2 * p[:, 0] * p[:, 1], p[:, 0] ** 2])
    I = integrate_one_form(df, x)
    assert I.values[-1, 0] == pytest.approx(f(x.values[-1:])[0] - f(x.values[:1])[0], abs=1e-3)


def test_one_form_zero_and_closed_loop():
    loop = sample_function(lambda t: np.column_stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)]), 4097)
    assert integrate_one_form(lambda p: np.zeros_like(p), loop).values[-1, 0] == 0
    dx1 = lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))])
    assert abs(integrate_one_form(dx1, loop).values[-1, 0]) < 1e-12


def test_ito_identity_and_affine():
    x = gen_fbm(0.75, 2**12 + 1, seed=3, dim=2)
    ident = ito_residual(lambda p: p, lambda p: np.broadcast_to(np.eye(2), (len(p), 2, 2)), x)
    assert ident == 0.0
    M = np.array([[2.0, -1.0], [0.3, 4.0]])
    aff = ito_residual(lambda p: p @ M.T + 7.0, lambda p: np.broadcast_to(M, (len(p), 2, 2)), x)
    assert aff < 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_property_affine_scalar_ito_is_exact(a, b, seed):
    x = gen_fbm(0.75, 129, seed=seed)
    r = ito_residual(lambda p: a * p + b, lambda p: np.full((len(p), 1, 1), a), x)
    assert r < 1e-12


@given(st.floats(-2, 2), st.integers(0, 1000))
def test_property_constant_integrand_matches_increment(c, seed):
    Z = gen_fbm(0.75, 65, seed=seed)
    I = young_integrate(IntegrandPath.constant([[c]], Z), Z)
    assert np.allclose(I.values[:, 0], c * (Z.values[:, 0] - Z.values[0, 0]), atol=1e-12)
