import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from youngflow.errors import FoliationError, RangeError
from youngflow.linear import (
    LinearSystem,
    MatrixPath,
    decompose_blocks,
    decompose_foliated,
    decompose_via_yde,
    detect_explosion,
    fundamental_solution,
    schur_foliation,
)
from youngflow.paths import SampledPath, gen_fbm, gen_smooth, sample_function

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_linear_system_blocks_reassemble():
    A = np.arange(16.0).reshape(4, 4)
    A1, A2, A3, A4 = LinearSystem(A, 1).blocks
    assert np.array_equal(np.block([[A1, A2], [A3, A4]]), A)
    with pytest.raises(RangeError):
        LinearSystem(A, 4)


def test_fundamental_solution_examples():
    Z = gen_fbm(0.75, 129, seed=0)
    F0 = fundamental_solution(np.zeros((3, 3)), Z)
    assert np.all(F0.mats == np.eye(3))
    F = fundamental_solution(ROT, Z)
    z = Z.values[:, 0] - Z.values[0, 0]
    ref = np.stack([np.stack([np.cos(z), -np.sin(z)], -1), np.stack([np.sin(z), np.cos(z)], -1)], -2)
    assert np.max(np.abs(F.mats - ref)) < 1e-14
    D = np.diag([0.5, -1.0, 2.0])
    Fd = fundamental_solution(D, Z)
    assert np.allclose(np.diagonal(Fd.mats, axis1=1, axis2=2), np.exp(z[:, None] * np.diag(D)), rtol=1e-13)


def test_decompose_rotation_at_quarter_pi():
    Z = SampledPath([0.0, 1.0], [0.0, np.pi / 4])
    dec = decompose_blocks(fundamental_solution(ROT, Z), 1)
    r2 = np.sqrt(2.0)
    assert np.allclose(dec.eta()[1], [[r2, -1.0], [0.0, 1.0]], atol=1e-14)
    assert np.allclose(dec.psi()[1], [[1.0, 0.0], [r2 / 2, r2 / 2]], atol=1e-14)
    assert np.allclose(dec.eta()[0], np.eye(2)) and np.allclose(dec.psi()[0], np.eye(2))


def test_structural_zeros_exact():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4))
    Z = gen_fbm(0.75, 257, seed=1)
    dec = decompose_blocks(fundamental_solution(0.3 * A, Z), 2)
    assert np.all(dec.eta()[:, 2:, :2] == 0)
    assert np.all(dec.psi()[:, :2, 2:] == 0)
    assert np.all(dec.psi()[:, :2, :2] == np.eye(2))


def test_explosion_index_on_rotation():
    Z = gen_smooth("linear", 401, T=2.0, slope=1.0)
    dec = decompose_blocks(fundamental_solution(ROT, Z), 1)
    assert dec.exploded
    t = Z.times[dec.explosion_index]
    assert t >= np.pi / 2 and t - Z.mesh < np.pi / 2
    assert len(dec.g1) == dec.explosion_index


def test_explosion_at_start():
    F = MatrixPath([0.0, 1.0], np.stack([np.array([[1.0, 1.0], [1.0, 0.0]])] * 2))
    dec = decompose_blocks(F, 1)
    assert dec.explosion_index == 0 and len(dec.g1) == 0


def test_threshold_trigger():
    # F4 shrinking continuously towards zero without a sign change
    t = np.linspace(0, 1, 11)
    mats = np.stack([np.array([[1.0, 0.0], [0.0, 10.0 ** (-12 * s)]]) for s in t])
    dec = decompose_blocks(MatrixPath(t, mats), 1)
    assert dec.info["explosion_kind"] == "singular"
    assert t[dec.explosion_index] == pytest.approx(0.7)


def test_via_yde_zero_matrix():
    Z = gen_fbm(0.75, 65, seed=0)
    dec = decompose_via_yde(np.zeros((3, 3)), 1, Z)
    assert np.all(dec.eta() == np.eye(3)) and np.all(dec.psi() == np.eye(3))


def test_via_yde_rotation_sec():
    Z = sample_function(lambda t: 1.2 * np.sin(2 * np.pi * t), 2**14 + 1)
    dec = decompose_via_yde(ROT, 1, Z)
    z = Z.values[:, 0]
    assert not dec.exploded
    assert np.max(np.abs(dec.g1[:, 0, 0] - 1 / np.cos(z))) < 5e-3
    assert np.max(np.abs(dec.g2[:, 0, 0] + np.tan(z))) < 5e-3


def test_via_yde_upper_triangular_agrees_with_blocks():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 4))
    A[2:, :2] = 0
    Z = gen_smooth("sine", 4097, amp=1.0, freq=1.0)
    ref = decompose_blocks(fundamental_solution(A, Z), 2)
    dec = decompose_via_yde(A, 2, Z)
    assert not dec.exploded and not ref.exploded
    err = max(np.max(np.abs(getattr(dec, g) - getattr(ref, g))) for g in ("g1", "g2", "g3", "g4"))
    assert err < 0.05


def test_via_yde_blows_up_on_rotation_past_pole():
    Z = gen_smooth("linear", 801, T=2.0, slope=1.0)
    dec = decompose_via_yde(ROT, 1, Z)
    assert dec.exploded and Z.times[dec.explosion_index] > np.pi / 2


def test_detect_explosion_none_cases():
    Z = gen_smooth("linear", 201, T=2.0, slope=1.0)
    assert detect_explosion(np.zeros((2, 2)), 1, Z) is None
    A = np.array([[1.0, 2.0], [0.0, -1.0]])
    assert detect_explosion(A, 1, Z) is None


def test_detect_explosion_threshold_validation():
    Z = gen_smooth("linear", 11)
    with pytest.raises(RangeError):
        detect_explosion(ROT, 1, Z, threshold=1.5)


def test_detect_explosion_on_coarse_grid_and_negative_driver():
    Z = gen_smooth("linear", 9, T=2.0, slope=-1.0)
    rep = detect_explosion(ROT, 1, Z)
    assert rep.time == pytest.approx(np.pi / 2, abs=1e-9)


def test_schur_upper_triangular_identity():
    A = np.triu(np.arange(1.0, 10.0).reshape(3, 3))
    fol = schur_foliation(A)
    assert fol.k == 1
    assert np.allclose(np.abs(fol.P), np.eye(3))


def test_schur_rotation_plus_scalar():
    A = scipy.linalg.block_diag(ROT, [[2.0]])
    fol = schur_foliation(A)
    assert fol.k in (1, 2)
    assert np.all(fol.T[fol.k:, :fol.k] == 0)
    assert fol.real_count + 2 * fol.pair_count == fol.k
    assert np.allclose(fol.P @ fol.T @ fol.P.T, A, atol=1e-13)


def test_schur_rotation_alone_fails():
    with pytest.raises(FoliationError):
        schur_foliation(ROT)


def test_schur_requested_k():
    A = scipy.linalg.block_diag(ROT, [[2.0]])
    fol = schur_foliation(A)
    bad = ({1, 2} - set(fol.admissible)).pop()
    with pytest.raises(FoliationError):
        schur_foliation(A, k=bad)


def test_foliated_decomposition_conjugation_consistency():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((4, 4))
    Z = gen_fbm(0.75, 513, seed=7)
    fol = schur_foliation(A)
    dec, eta, psi = decompose_foliated(A, Z, fol)
    assert not dec.exploded
    F = fundamental_solution(A, Z).mats
    assert np.max(np.abs(eta @ psi - F)) < 1e-8 * np.max(np.abs(F))
    # eta fixes the E2 coordinates, psi fixes the E1 coordinates
    P = fol.P
    k = fol.k
    E1, E2 = P[:, :k], P[:, k:]
    assert np.max(np.abs(E2.T @ eta @ E1)) < 1e-12 * np.max(np.abs(eta))
    assert np.max(np.abs(E2.T @ eta @ E2 - np.eye(4 - k))) < 1e-10
    assert np.max(np.abs(E1.T @ psi @ E1 - np.eye(k))) < 1e-10


@given(arrays(float, (3, 3), elements=st.floats(-2, 2)), st.integers(0, 100))
def test_property_compose_equals_flow(A, seed):
    Z = gen_fbm(0.75, 65, seed=seed)
    F = fundamental_solution(A, Z)
    dec = decompose_blocks(F, 1)
    m = len(dec.g1)
    if m:
        scale = np.max(np.abs(F.mats[:m])) * max(1.0, np.max(np.abs(dec.g2)))
        assert np.max(np.abs(dec.compose() - F.mats[:m])) <= 1e-10 * scale


@given(arrays(float, (4, 4), elements=st.floats(-3, 3)))
def test_property_schur_zero_block(A):
    try:
        fol = schur_foliation(A)
    except FoliationError:
        return
    assert np.all(fol.T[fol.k:, :fol.k] == 0)
    assert np.allclose(fol.P.T @ fol.P, np.eye(4), atol=1e-12)
