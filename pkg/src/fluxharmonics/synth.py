"""Synthetic daily series with known harmonic content."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embedding import DAYS_PER_YEAR
from .ingest import FluxSeries

__all__ = ["Noise", "SignalRecipe", "SyntheticSeries", "generate", "n_samples"]

RAMP_DAYS = 60.0
_NOISE_KINDS = ("none", "white", "broadband", "hf_white")


@dataclass(frozen=True)
class Noise:
    """Additive noise model.

    ``white``: i.i.d. Gaussian with std ``sigma``.
    ``broadband``: power spectrum proportional to ``1 / f**beta``, random
    phases, rescaled to std ``sigma``.
    ``hf_white``: white noise with all content below ``f_min`` cycles/year
    removed, rescaled to std ``sigma``.
    """

    kind: str = "none"
    sigma: float = 0.0
    beta: float = 1.0
    f_min: float = 6.0

    def __post_init__(self):
        if self.kind not in _NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {_NOISE_KINDS}")
        if self.sigma < 0:
            raise ValueError("noise sigma must be nonnegative")

    @classmethod
    def white(cls, sigma: float) -> "Noise":
        return cls("white", sigma)

    @classmethod
    def broadband(cls, sigma: float, beta: float = 1.0) -> "Noise":
        return cls("broadband", sigma, beta=beta)

    @classmethod
    def hf_white(cls, sigma: float, f_min: float = 6.0) -> "Noise":
        return cls("hf_white", sigma, f_min=f_min)


@dataclass(frozen=True)
class SignalRecipe:
    """Harmonics ``(f, amplitude, phase)`` with f in cycles/year, plus noise.

    ``amplitude_change = (fraction, factor)`` multiplies the oscillation by
    ``factor`` after ``fraction`` of the record, through a smooth ramp.
    """

    n_years: float
    harmonics: tuple = ((1, 1.0, 0.0),)
    noise: Noise = Noise()
    amplitude_change: Optional[tuple] = None
    seed: int = 0
    offset: float = 0.0
    start_date: dt.date = dt.date(2007, 1, 1)
    site_id: str = "SYN"
    variable: str = "X"

    def __post_init__(self):
        if self.n_years < 2:
            raise ValueError("n_years must be at least 2")
        for h in self.harmonics:
            if len(h) != 3 or h[1] < 0:
                raise ValueError(f"harmonic {h!r} must be (f, amplitude >= 0, phase)")
        object.__setattr__(self, "harmonics", tuple(tuple(h) for h in self.harmonics))


@dataclass(frozen=True, eq=False)
class SyntheticSeries:
    series: FluxSeries
    truth: np.ndarray
    harmonic_set: tuple
    noise: np.ndarray = field(repr=False)


def n_samples(n_years: float) -> int:
    return int(round(n_years * DAYS_PER_YEAR))


def _ramp(t_days: np.ndarray, at_day: float) -> np.ndarray:
    # logistic rising from 1% to 99% over RAMP_DAYS
    scale = RAMP_DAYS / (2.0 * math.log(99.0))
    return 0.5 * (1.0 + np.tanh((t_days - at_day) / (2.0 * scale)))


def _spectral_noise(rng: np.random.Generator, n: int, weight) -> np.ndarray:
    freqs = np.fft.rfftfreq(n, d=1.0 / DAYS_PER_YEAR)
    amp = np.zeros_like(freqs)
    amp[1:] = weight(freqs[1:])
    phases = rng.uniform(0.0, 2.0 * np.pi, size=freqs.size)
    x = np.fft.irfft(amp * np.exp(1j * phases), n=n)
    std = x.std()
    return x / std if std > 0 else x


def _noise(noise: Noise, rng: np.random.Generator, n: int) -> np.ndarray:
    if noise.kind == "none" or noise.sigma == 0:
        return np.zeros(n)
    if noise.kind == "white":
        return noise.sigma * rng.standard_normal(n)
    if noise.kind == "broadband":
        beta = noise.beta
        return noise.sigma * _spectral_noise(rng, n, lambda f: f ** (-beta / 2.0))
    # hf_white: Gaussian white noise with the low band removed
    x = rng.standard_normal(n)
    X = np.fft.rfft(x)
    X[np.fft.rfftfreq(n, d=1.0 / DAYS_PER_YEAR) < noise.f_min] = 0.0
    x = np.fft.irfft(X, n=n)
    return noise.sigma * x / x.std()


def generate(recipe: SignalRecipe) -> SyntheticSeries:
    """Build the daily series and its noiseless ground truth."""
    n = n_samples(recipe.n_years)
    t_days = np.arange(n, dtype=float)
    t_yr = t_days / DAYS_PER_YEAR
    clean = np.zeros(n)
    for f, a, phi in recipe.harmonics:
        clean += a * np.sin(2.0 * np.pi * f * t_yr + phi)
    if recipe.amplitude_change is not None:
        fraction, factor = recipe.amplitude_change
        clean *= 1.0 + (factor - 1.0) * _ramp(t_days, fraction * n)
    clean += recipe.offset
    rng = np.random.default_rng(recipe.seed)
    noise = _noise(recipe.noise, rng, n)
    series = FluxSeries(
        values=clean + noise,
        start_date=recipe.start_date,
        site_id=recipe.site_id,
        variable=recipe.variable,
    )
    return SyntheticSeries(
        series=series,
        truth=clean,
        harmonic_set=tuple(sorted({int(f) for f, a, _ in recipe.harmonics if a > 0})),
        noise=noise,
    )
