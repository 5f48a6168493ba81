"""Data characterization: high-frequency variability, regularity, sample entropy,
persistent low quality flags and three-bin labelling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .embedding import DAYS_PER_YEAR
from .spectral import PowerSpectrum, fft_power

__all__ = [
    "CharacterizationReport",
    "hf_variability",
    "regularity",
    "sample_entropy",
    "sample_entropy_counts",
    "persistent_qf",
    "bin_metrics",
    "characterize",
    "HF_CUTOFF",
    "HALF_YEAR",
    "REGULARITY_HARMONICS",
]

HF_CUTOFF = 6.0
HALF_YEAR = math.ceil(DAYS_PER_YEAR / 2)  # 183 daily samples
REGULARITY_HARMONICS = (1, 2, 3, 4)
BIN_LABELS = ("low", "mid", "high")


def hf_variability(spec: PowerSpectrum, cutoff: float = HF_CUTOFF) -> float:
    """Relative power at frequencies >= ``cutoff`` cycles/year."""
    return float(spec.power[spec.freqs >= cutoff].sum())


def regularity(spec: PowerSpectrum, harmonic_set: Sequence[int] = REGULARITY_HARMONICS) -> float:
    """Relative power in the bins nearest to the annual harmonics.

    A harmonic contributes only if its nearest bin lies within one bin
    width; each bin is counted once.
    """
    dk = spec.bin_width
    picked = set()
    for f in harmonic_set:
        i = int(np.argmin(np.abs(spec.freqs - f)))
        if abs(spec.freqs[i] - f) <= dk:
            picked.add(i)
    return float(sum(spec.power[i] for i in picked))


def sample_entropy_counts(series, m: int = 2, r: Optional[float] = None, r_frac: float = 0.2):
    """Match counts ``(A, B)`` for sample entropy.

    ``B`` counts unordered pairs of distinct length-``m`` templates within
    Chebyshev distance ``r``; ``A`` the same for length ``m + 1``. Both use
    the first ``N - m`` templates so the counts are comparable.
    """
    x = np.asarray(series, dtype=float)
    N = x.shape[0]
    if N <= m + 1:
        raise ValueError(f"sample entropy needs N > m + 1 (N={N}, m={m})")
    if r is None:
        r = r_frac * float(np.std(x))
    n_templates = N - m
    A = B = 0
    # lag-wise sweep: template pair (i, i + lag) matches when m (or m + 1)
    # consecutive absolute differences are all within r
    for lag in range(1, n_templates):
        close = np.abs(x[lag:] - x[:-lag]) <= r
        # runs of m consecutive hits starting at i, for i < n_templates - lag
        n_pairs = n_templates - lag
        hit_m = np.ones(n_pairs, dtype=bool)
        for j in range(m):
            hit_m &= close[j : j + n_pairs]
        B += int(hit_m.sum())
        A += int((hit_m & close[m : m + n_pairs]).sum())
    return A, B


def sample_entropy(series, m: int = 2, r_frac: float = 0.2) -> float:
    """``-ln(A / B)`` with ``r = r_frac * std`` (population std of the whole series).

    Returns ``inf`` when no templates match (undefined entropy).
    """
    A, B = sample_entropy_counts(series, m=m, r_frac=r_frac)
    if A == 0 or B == 0:
        return float("inf")
    return math.log(B / A)


def persistent_qf(qf, min_length: int = HALF_YEAR):
    """Maximal runs where every flag is strictly below the series mean.

    Returns ``(flagged, windows)`` with half-open ``(start, end)`` index
    windows of length at least ``min_length``.
    """
    q = np.asarray(qf, dtype=float)
    if q.size == 0:
        return False, []
    low = q < q.mean()
    edges = np.diff(np.concatenate(([0], low.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    windows = [(int(s), int(e)) for s, e in zip(starts, ends) if e - s >= min_length]
    return bool(windows), windows


def bin_metrics(values):
    """Three equal-width bins over ``[min, max]`` labelled low / mid / high.

    Returns ``(labels, note)``; ``note`` is ``"DegenerateRange"`` when all
    values coincide (everything is then labelled low). Non-finite values are
    labelled ``None`` and ignored for the range.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one value to bin")
    finite = np.isfinite(v)
    if not finite.any():
        return [None] * v.size, "DegenerateRange"
    lo, hi = float(v[finite].min()), float(v[finite].max())
    if hi == lo:
        return [("low" if ok else None) for ok in finite], "DegenerateRange"
    width = hi - lo
    labels = []
    for x, ok in zip(v, finite):
        if not ok:
            labels.append(None)
            continue
        pos = (x - lo) / width
        labels.append("low" if pos < 1 / 3 else ("mid" if pos < 2 / 3 else "high"))
    return labels, None


@dataclass
class CharacterizationReport:
    hf_variability: float
    regularity: float
    sample_entropy: float
    persistent_qf: Optional[bool]
    qf_windows: list = field(default_factory=list)
    bins: dict = field(default_factory=dict)

    @property
    def entropy_undefined(self) -> bool:
        return math.isinf(self.sample_entropy)

    def to_dict(self) -> dict:
        return {
            "hf_variability": self.hf_variability,
            "regularity": self.regularity,
            "sample_entropy": None if self.entropy_undefined else self.sample_entropy,
            "sample_entropy_undefined": self.entropy_undefined,
            "persistent_qf": self.persistent_qf,
            "qf_windows": [list(w) for w in self.qf_windows],
            "bins": dict(self.bins),
        }


def characterize(
    series,
    qf=None,
    harmonic_set: Sequence[int] = REGULARITY_HARMONICS,
    m: int = 2,
    r_frac: float = 0.2,
    dt_days: float = 1.0,
) -> CharacterizationReport:
    """All per-series metrics; bin labels are filled in later across a batch."""
    spec = fft_power(series, dt_days)
    flagged, windows = (None, []) if qf is None else persistent_qf(qf)
    return CharacterizationReport(
        hf_variability=hf_variability(spec),
        regularity=regularity(spec, harmonic_set),
        sample_entropy=sample_entropy(series, m=m, r_frac=r_frac),
        persistent_qf=flagged,
        qf_windows=windows,
    )
