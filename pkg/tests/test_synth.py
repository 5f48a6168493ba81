import numpy as np
import pytest

from fluxharmonics.embedding import default_window, delay_embed, standardize_rows
from fluxharmonics.ingest import column_spec_for_written, parse_flux_csv, write_flux_csv
from fluxharmonics.metrics import hf_variability, regularity
from fluxharmonics.nlsa import nlsa_fit
from fluxharmonics.spectral import classify_modes, fft_power, pair_harmonics
from fluxharmonics.ssa import ssa_decompose
from fluxharmonics.synth import Noise, SignalRecipe, generate, n_samples


def test_single_harmonic_spectrum():
    syn = generate(SignalRecipe(4))
    spec = fft_power(syn.series.values)
    assert abs(spec.freqs[np.argmax(spec.power)] - 1) <= spec.bin_width
    assert spec.power.max() >= 0.99
    assert syn.harmonic_set == (1,)
    assert syn.series.n == n_samples(4) == 1461


def test_fixed_seed_is_bitwise_reproducible():
    rec = SignalRecipe(3, noise=Noise.broadband(1.5), seed=9)
    a, b = generate(rec), generate(rec)
    assert a.series == b.series
    assert not np.array_equal(a.series.values, generate(SignalRecipe(3, noise=Noise.broadband(1.5), seed=10)).series.values)


@pytest.mark.parametrize("noise", [Noise.white(0.7), Noise.broadband(0.7, beta=1.0), Noise.hf_white(0.7)])
def test_noise_scale(noise):
    syn = generate(SignalRecipe(6, noise=noise, seed=1))
    assert syn.noise.std() == pytest.approx(0.7, rel=0.05)
    np.testing.assert_allclose(syn.series.values, syn.truth + syn.noise)


def test_broadband_slope():
    syn = generate(SignalRecipe(20, harmonics=((1, 0.0, 0.0),), noise=Noise.broadband(1.0, beta=1.0), seed=2))
    spec = fft_power(syn.noise)
    slope = np.polyfit(np.log(spec.freqs), np.log(spec.power), 1)[0]
    assert slope == pytest.approx(-1.0, abs=1e-9)


def test_hf_white_has_no_low_content():
    syn = generate(SignalRecipe(4, noise=Noise.hf_white(1.0), seed=3))
    spec = fft_power(syn.noise)
    assert spec.power[spec.freqs < 6].sum() <= 1e-20


def test_noiseless_regularity_and_hf():
    syn = generate(SignalRecipe(8, harmonics=((1, 1, 0), (3, 0.5, 1.0))))
    spec = fft_power(syn.series.values)
    assert regularity(spec) >= 0.99
    assert hf_variability(spec) <= 1e-3
    syn = generate(SignalRecipe(8, harmonics=((1, 1, 0), (8, 1, 0))))
    assert hf_variability(fft_power(syn.series.values)) == pytest.approx(0.5, abs=0.01)


def test_amplitude_change():
    syn = generate(SignalRecipe(6, amplitude_change=(0.5, 3.0)))
    half = syn.series.n // 2
    early = np.abs(syn.truth[: half - 100]).max()
    late = np.abs(syn.truth[half + 100 :]).max()
    assert late == pytest.approx(3 * early, rel=1e-3)


def test_invalid_recipes():
    with pytest.raises(ValueError):
        SignalRecipe(1.5)
    with pytest.raises(ValueError):
        SignalRecipe(4, harmonics=((1, -1.0, 0),))
    with pytest.raises(ValueError):
        Noise("pink", 1.0)


def test_csv_emission_round_trip():
    syn = generate(SignalRecipe(2, noise=Noise.white(0.2), seed=4, offset=5.0))
    s = syn.series
    assert parse_flux_csv(write_flux_csv(s), column_spec_for_written(s), site_id=s.site_id) == s


def test_two_harmonics_both_methods():
    syn = generate(SignalRecipe(4, ((1, 1, 0), (2, 0.5, 0)), Noise.white(0.1), seed=0))
    x = syn.series.values
    X = standardize_rows(delay_embed(x, default_window(len(x))))
    for ms in (ssa_decompose(X, 16), nlsa_fit(X, 16)[0]):
        assert {1, 2} <= set(pair_harmonics(classify_modes(ms)).harmonics)
