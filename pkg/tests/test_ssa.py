import numpy as np
import pytest

from fluxharmonics.embedding import TrajectoryMatrix, default_window, delay_embed, standardize_rows
from fluxharmonics.exceptions import KOutOfRange
from fluxharmonics.spectral import fft_power
from fluxharmonics.ssa import ssa_decompose, variance_spectrum

from conftest import tone


def _std(x, W):
    return standardize_rows(delay_embed(x, W))


def _raw(A):
    A = np.asarray(A, dtype=float)
    return TrajectoryMatrix(A, np.zeros(A.shape[0]), np.ones(A.shape[0]), standardized=True)


def test_energy_identity(rng):
    X = _std(rng.standard_normal(300), 80)
    ms = ssa_decompose(X, 80)
    np.testing.assert_allclose((ms.spectrum**2).sum(), np.sum(X.data**2), rtol=1e-8)


def test_orthonormal_descending_and_projection(rng):
    X = _std(np.cumsum(rng.standard_normal(500)), 120)
    ms = ssa_decompose(X, 16)
    np.testing.assert_allclose(ms.modes @ ms.modes.T, np.eye(16), atol=1e-8)
    assert np.all(np.diff(ms.spectrum) <= 0)
    np.testing.assert_array_equal(ms.pcs, ms.modes @ X.data)
    np.testing.assert_allclose(ms.variance, ms.spectrum**2 / X.W, rtol=1e-8)
    np.testing.assert_allclose(variance_spectrum(ms, X), ms.variance, rtol=1e-12)
    assert ms.method == "SSA" and (ms.k, ms.W, ms.P) == (16, 120, 381)


def test_full_rank_variance_sum(rng):
    X = _std(rng.standard_normal(200), 50)
    ms = ssa_decompose(X, 50)
    np.testing.assert_allclose(ms.variance.sum(), np.sum(X.data**2) / X.W, rtol=1e-8)


def test_rank_one(rng):
    a, b = rng.standard_normal(6), rng.standard_normal(9)
    ms = ssa_decompose(_raw(np.outer(a, b)), 3)
    np.testing.assert_allclose(ms.spectrum[0], np.linalg.norm(a) * np.linalg.norm(b), rtol=1e-12)
    np.testing.assert_allclose(ms.spectrum[1:], 0.0, atol=1e-12)


def test_zero_matrix_variance():
    ms = ssa_decompose(_raw(np.zeros((4, 7))), 2)
    np.testing.assert_array_equal(ms.variance, 0.0)


def test_commensurate_sine_pair_is_degenerate():
    # window and column count both span whole half periods
    h = 91
    W, P = 12 * h, 16 * h
    x = np.sin(np.pi * np.arange(W + P - 1) / h)
    s = ssa_decompose(_std(x, W), 2).spectrum
    assert abs(s[0] - s[1]) / s[0] <= 1e-12


def test_sine_pair_nearly_degenerate_and_quarter_period():
    x = tone(2, 7)
    W = default_window(len(x))
    ms = ssa_decompose(_std(x, W), 2)
    s = ms.spectrum
    # a 365.25-day year never fits the integer window exactly
    assert abs(s[0] - s[1]) / s[0] <= 5e-3
    # both modes oscillate at 2/yr, a quarter period apart
    for m in ms.modes:
        spec = fft_power(m)
        assert abs(spec.freqs[np.argmax(spec.power)] - 2) <= spec.bin_width
    z = np.fft.rfft(ms.modes, axis=1)
    i = np.argmax(np.abs(z[0]))
    dphi = np.angle(z[1, i] / z[0, i])
    assert abs(abs(dphi) - np.pi / 2) < 0.05


def test_sign_convention_and_determinism(rng):
    X = _std(rng.standard_normal(400), 100)
    a, b = ssa_decompose(X, 10), ssa_decompose(X, 10)
    np.testing.assert_array_equal(a.modes, b.modes)
    idx = np.argmax(np.abs(a.modes), axis=1)
    assert np.all(a.modes[np.arange(10), idx] > 0)


def test_iterative_solver_agrees(rng):
    X = _std(np.cumsum(rng.standard_normal(700)), 300)
    dense = ssa_decompose(X, 6, solver="dense")
    it = ssa_decompose(X, 6, solver="arpack")
    np.testing.assert_allclose(it.spectrum, dense.spectrum, rtol=1e-8)
    np.testing.assert_allclose(np.abs(it.modes @ dense.modes.T), np.eye(6), atol=1e-6)


def test_k_out_of_range(rng):
    X = _std(rng.standard_normal(100), 20)
    with pytest.raises(KOutOfRange):
        ssa_decompose(X, 0)
    with pytest.raises(KOutOfRange):
        ssa_decompose(X, 21)


def test_reconstruct_method(rng):
    X = _std(rng.standard_normal(100), 20)
    ms = ssa_decompose(X, 20)
    np.testing.assert_allclose(ms.reconstruct().values, np.mean([0]) + ms.reconstruct(range(20)).values)
    assert ms.reconstruct([0, 1]).mode_indices == (0, 1)
