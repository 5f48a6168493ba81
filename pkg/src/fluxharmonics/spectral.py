"""FFT spectra, low-pass filtering, harmonic classification of modes and seasonal cycles."""

from __future__ import annotations

import datetime as dt
import io
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np
from scipy.optimize import least_squares

from .embedding import DAYS_PER_YEAR, TrajectoryMatrix, destandardize, reconstruct_component
from .exceptions import InvalidCutoff, NoPairs, TooShort
from .ssa import ModeSet

__all__ = [
    "PowerSpectrum",
    "HarmonicLabel",
    "HarmonicInventory",
    "SeasonalCycle",
    "CATEGORIES",
    "DEFAULT_HARMONICS",
    "APPENDIX_HARMONICS",
    "fft_power",
    "lowpass",
    "fit_gaussian_peak",
    "classify_spectrum",
    "classify_mode",
    "classify_modes",
    "pair_harmonics",
    "build_seasonal_cycle",
    "write_spectrum",
    "write_series",
]

EPS_F = 0.15
EPS_P = 0.15
DEFAULT_HARMONICS = (1, 2, 3, 4, 5, 6)
APPENDIX_HARMONICS = (1, 2, 3, 4)
FIT_WINDOW = (0.0, 7.0)
SUPPORT_SIGMAS = 3.0
NULL_MODE_TOL = 1e-10  # modes explaining less variance than this (relative) are null
CATEGORIES = ("none", "deficient", "fundamental", "multiple")


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    """One-sided relative power over positive frequencies (cycles per year)."""

    freqs: np.ndarray
    power: np.ndarray
    n_samples: int
    zero_power: bool = False

    @property
    def bin_width(self) -> float:
        return float(self.freqs[0])

    @property
    def density(self) -> np.ndarray:
        """Relative power per unit frequency."""
        return self.power / self.bin_width


def fft_power(series, dt_days: float = 1.0) -> PowerSpectrum:
    """Relative power spectrum of a mean-removed series.

    Bins ``k_n = n / (N dt)`` for ``n = 1 .. N // 2`` with ``dt`` in years
    (365.25 days). Interior bins carry both signed frequencies, so power is
    Parseval-consistent; the result sums to 1 unless the series is
    constant, in which case it is all zero and ``zero_power`` is set.
    """
    x = np.asarray(series, dtype=float)
    N = x.shape[0]
    if N < 4:
        raise TooShort("need at least 4 samples for a spectrum")
    X = np.fft.rfft(x - x.mean())
    freqs = np.fft.rfftfreq(N, d=dt_days / DAYS_PER_YEAR)[1:]
    power = np.abs(X[1:]) ** 2
    if N % 2 == 0:
        power[:-1] *= 2.0
    else:
        power *= 2.0
    total = power.sum()
    scale = np.abs(x).max() if N else 0.0
    if total <= (1e-24 * scale * scale * N * N) or total == 0.0:
        return PowerSpectrum(freqs=freqs, power=np.zeros_like(power), n_samples=N, zero_power=True)
    return PowerSpectrum(freqs=freqs, power=power / total, n_samples=N)


def lowpass(series, f_l: float, dt_days: float = 1.0) -> np.ndarray:
    """Zero every Fourier bin with frequency >= ``f_l`` (cycles/year) and invert."""
    if not f_l > 0:
        raise InvalidCutoff(f"cutoff must be positive, got {f_l}")
    x = np.asarray(series, dtype=float)
    N = x.shape[0]
    if N < 4:
        raise TooShort("need at least 4 samples to filter")
    X = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(N, d=dt_days / DAYS_PER_YEAR)
    X[freqs >= f_l] = 0.0
    return np.fft.irfft(X, n=N)


@dataclass(frozen=True)
class HarmonicLabel:
    mode_index: int
    is_harmonic: bool
    mu_k: float
    sigma_g: float
    peak_height: float
    residual_max: float
    matched_f: Optional[int] = None
    nearest_f: Optional[int] = None
    fit_converged: bool = True
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            "mode_index": self.mode_index,
            "is_harmonic": self.is_harmonic,
            "mu_k": _finite_or_none(self.mu_k),
            "sigma_g": _finite_or_none(self.sigma_g),
            "peak_height": _finite_or_none(self.peak_height),
            "residual_max": _finite_or_none(self.residual_max),
            "matched_f": self.matched_f,
            "nearest_f": self.nearest_f,
            "fit_converged": self.fit_converged,
            "diagnostic": self.diagnostic,
        }


def _finite_or_none(v: float):
    return float(v) if np.isfinite(v) else None


def _gaussian(k, height, mu, sigma):
    return height * np.exp(-0.5 * ((k - mu) / sigma) ** 2)


def fit_gaussian_peak(freqs, density, window: tuple = FIT_WINDOW):
    """Least-squares Gaussian peak over the bins inside ``window``.

    The peak is parametrized by its height rather than its area: for a
    single-bin spike the width is then a flat direction the solver can stop
    on, while the height stays well determined. Starts from the highest bin
    with a width of one bin.

    Returns
    -------
    height, mu, sigma : float
        ``height = A / (sigma sqrt(2 pi))`` for the equivalent area ``A``.
    converged : bool
    """
    k = np.asarray(freqs, dtype=float)
    y = np.asarray(density, dtype=float)
    mask = (k >= window[0]) & (k <= window[1])
    k, y = k[mask], y[mask]
    if k.size < 3 or not np.any(y > 0):
        return 0.0, float("nan"), float("nan"), False
    dk = float(np.median(np.diff(k)))
    i = int(np.argmax(y))
    p0 = np.array([y[i], k[i], dk])
    # narrower peaks are indistinguishable on the bin grid
    lower = [0.0, window[0], 0.25 * dk]
    upper = [np.inf, window[1], window[1] - window[0]]
    try:
        res = least_squares(
            lambda p: _gaussian(k, *p) - y,
            p0,
            bounds=(lower, upper),
            x_scale=np.array([max(y[i], 1e-300), dk, dk]),
            max_nfev=200,
            xtol=1e-10,
            ftol=1e-10,
            gtol=1e-10,
        )
    except (ValueError, FloatingPointError):
        return 0.0, float("nan"), float("nan"), False
    height, mu, sigma = (float(v) for v in res.x)
    # an exact fit to a single-bin spike can exhaust the budget while sliding
    # along the flat width direction; a negligible residual still counts
    exact = res.cost <= 1e-10 * 0.5 * float(y @ y)
    ok = bool(res.status > 0 or exact) and all(np.isfinite(res.x))
    return height, mu, sigma, ok


def classify_spectrum(
    spec: PowerSpectrum,
    eps_f: float = EPS_F,
    eps_p: float = EPS_P,
    harmonic_set: Sequence[int] = DEFAULT_HARMONICS,
    mode_index: int = 0,
    window: tuple = FIT_WINDOW,
) -> HarmonicLabel:
    """Decide whether a spectrum is a single pure harmonic peak.

    The spectrum is fitted by one Gaussian peak in ``window``. It is
    harmonic when the peak centre lies within ``eps_f`` of an admissible
    harmonic and no bin farther than three widths from the centre exceeds
    ``eps_p`` times the peak height. All quantities are in relative power
    per cycle/year.
    """
    if spec.zero_power:
        return HarmonicLabel(
            mode_index, False, float("nan"), float("nan"), 0.0, 0.0,
            fit_converged=False, diagnostic="zero power",
        )
    density = spec.density
    height, mu, sigma, ok = fit_gaussian_peak(spec.freqs, density, window)
    if not ok:
        return HarmonicLabel(
            mode_index, False, mu, sigma, 0.0, float(density.max()),
            fit_converged=False, diagnostic="gaussian fit did not converge",
        )
    outside = np.abs(spec.freqs - mu) > SUPPORT_SIGMAS * sigma
    residual = float(density[outside].max()) if outside.any() else 0.0
    fs = np.asarray(sorted(harmonic_set), dtype=float)
    nearest = int(fs[np.argmin(np.abs(fs - mu))]) if fs.size else None
    freq_ok = nearest is not None and abs(mu - nearest) <= eps_f
    power_ok = residual <= eps_p * height
    harmonic = bool(freq_ok and power_ok)
    if harmonic:
        note = ""
    elif not freq_ok:
        note = f"peak at {mu:.3f}/yr is not within {eps_f} of a harmonic"
    else:
        note = f"residual {residual:.4g} exceeds {eps_p} x peak {height:.4g}"
    return HarmonicLabel(
        mode_index=mode_index,
        is_harmonic=harmonic,
        mu_k=mu,
        sigma_g=sigma,
        peak_height=height,
        residual_max=residual,
        matched_f=nearest if harmonic else None,
        nearest_f=nearest,
        diagnostic=note,
    )


def classify_mode(
    mode,
    eps_f: float = EPS_F,
    eps_p: float = EPS_P,
    harmonic_set: Sequence[int] = DEFAULT_HARMONICS,
    mode_index: int = 0,
    dt_days: float = 1.0,
) -> HarmonicLabel:
    """Classify one window-space mode by its FFT spectrum."""
    mode = np.asarray(mode, dtype=float)
    if mode.shape[0] * dt_days < 2 * DAYS_PER_YEAR - 1:
        raise TooShort("modes must span at least two years to resolve the fundamental")
    return classify_spectrum(fft_power(mode, dt_days), eps_f, eps_p, harmonic_set, mode_index)


def classify_modes(ms: ModeSet, eps_f=EPS_F, eps_p=EPS_P, harmonic_set=DEFAULT_HARMONICS, dt_days=1.0):
    """Classify every mode of a decomposition.

    Modes that explain no variance (rank-deficient trajectory matrices)
    are arbitrary directions; they are labelled non-harmonic without a fit.
    """
    total = float(np.sum(ms.variance))
    labels = []
    for i, m in enumerate(ms.modes):
        if total > 0 and ms.variance[i] <= NULL_MODE_TOL * total:
            labels.append(
                HarmonicLabel(
                    i, False, float("nan"), float("nan"), 0.0, 0.0,
                    fit_converged=False, diagnostic="null mode (no variance explained)",
                )
            )
            continue
        labels.append(classify_mode(m, eps_f, eps_p, harmonic_set, mode_index=i, dt_days=dt_days))
    return labels


@dataclass(frozen=True)
class HarmonicInventory:
    labels: tuple
    pairs: tuple
    deficient: tuple
    category: str

    @property
    def harmonics(self) -> tuple:
        return tuple(sorted({f for _, _, f in self.pairs}))

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def paired_modes(self) -> tuple:
        return tuple(sorted(i for a, b, _ in self.pairs for i in (a, b)))

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "pairs": [list(p) for p in self.pairs],
            "deficient": list(self.deficient),
            "harmonics": list(self.harmonics),
            "labels": [lab.to_dict() for lab in self.labels],
        }


def _category(pairs, n_harmonic: int) -> str:
    if n_harmonic == 0:
        return "none"
    fs = {f for _, _, f in pairs}
    if 1 not in fs:
        return "deficient"
    return "multiple" if any(f >= 2 for f in fs) else "fundamental"


def pair_harmonics(labels: Iterable[HarmonicLabel]) -> HarmonicInventory:
    """Greedily pair harmonic modes that share a frequency, in mode order.

    Leftover single modes are deficient. Pairs without the fundamental do
    not count as a resolved seasonal cycle and also yield ``deficient``.
    """
    labels = tuple(sorted(labels, key=lambda lab: lab.mode_index))
    open_by_f: dict[int, int] = {}
    pairs = []
    for lab in labels:
        if not lab.is_harmonic:
            continue
        f = lab.matched_f
        if f in open_by_f:
            pairs.append((open_by_f.pop(f), lab.mode_index, f))
        else:
            open_by_f[f] = lab.mode_index
    deficient = tuple(sorted(open_by_f.values()))
    n_harmonic = sum(lab.is_harmonic for lab in labels)
    return HarmonicInventory(
        labels=labels,
        pairs=tuple(pairs),
        deficient=deficient,
        category=_category(pairs, n_harmonic),
    )


@dataclass(frozen=True, eq=False)
class SeasonalCycle:
    """Seasonal cycle in original units.

    ``offset`` is the trapezoid-averaged row mean restored by
    destandardization; ``anomaly = values - offset`` is linear in the set
    of modes used.
    """

    values: np.ndarray
    offset: np.ndarray
    harmonics_used: tuple
    method: str
    mode_indices: tuple = ()

    @property
    def anomaly(self) -> np.ndarray:
        return self.values - self.offset


def build_seasonal_cycle(
    ms: ModeSet,
    inv: HarmonicInventory,
    X: TrajectoryMatrix,
    N: Optional[int] = None,
    harmonics: Optional[Iterable[int]] = None,
) -> SeasonalCycle:
    """Reconstruct the paired harmonic modes and undo the standardization.

    ``harmonics`` optionally restricts the pairs used to those frequencies.
    """
    N = X.N if N is None else N
    pairs = [p for p in inv.pairs if harmonics is None or p[2] in set(harmonics)]
    if not pairs:
        raise NoPairs("no complete harmonic pair to build a seasonal cycle from")
    idx = sorted(i for a, b, _ in pairs for i in (a, b))
    rc = reconstruct_component(ms.modes[idx], ms.pcs[idx], N, mode_indices=idx)
    orig = destandardize(rc, X.row_means, X.row_stds, N)
    offset = destandardize(reconstruct_component([], [], N), X.row_means, X.row_stds, N).values
    return SeasonalCycle(
        values=orig.values,
        offset=offset,
        harmonics_used=tuple(sorted({f for _, _, f in pairs})),
        method=ms.method,
        mode_indices=tuple(idx),
    )


def write_spectrum(spec: PowerSpectrum, dest: Optional[TextIO] = None) -> str:
    buf = io.StringIO()
    buf.write("freq\tpower\n")
    for f, p in zip(spec.freqs, spec.power):
        buf.write(f"{f:.10g}\t{p:.10g}\n")
    text = buf.getvalue()
    if dest is not None:
        dest.write(text)
    return text


def write_series(start: dt.date, columns: dict, dest: Optional[TextIO] = None) -> str:
    """Daily columns as ``date<TAB>name...`` text."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    n = len(arrays[0]) if arrays else 0
    buf = io.StringIO()
    buf.write("\t".join(["date"] + names) + "\n")
    for i in range(n):
        day = (start + dt.timedelta(days=i)).isoformat()
        buf.write("\t".join([day] + [f"{a[i]:.10g}" for a in arrays]) + "\n")
    text = buf.getvalue()
    if dest is not None:
        dest.write(text)
    return text
