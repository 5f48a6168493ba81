"""scikit-learn style estimators around the decompositions.

Each estimator is fitted on one daily series. ``transform`` maps a series
onto the fitted modes (principal components) or, for
:class:`SeasonalCycleExtractor`, returns the reconstructed seasonal cycle.
New series are standardized with the row statistics learned in ``fit``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .embedding import (
    TrajectoryMatrix,
    default_window,
    delay_embed,
    destandardize,
    reconstruct_component,
    standardize_rows,
)
from .ingest import FluxSeries
from .nlsa import NlsaConfig, nlsa_fit
from .spectral import (
    DEFAULT_HARMONICS,
    EPS_F,
    EPS_P,
    SeasonalCycle,
    build_seasonal_cycle,
    classify_modes,
    lowpass,
    pair_harmonics,
)
from .ssa import DEFAULT_N_MODES, ModeSet, ssa_decompose

__all__ = ["SSA", "NLSA", "SeasonalCycleExtractor", "check_series"]


def check_series(x, min_length: int = 2) -> np.ndarray:
    """Validate a single series and return it as a finite 1-D float array.

    Accepts sequences, 1-D arrays, single-column 2-D arrays and
    :class:`FluxSeries`.
    """
    if isinstance(x, FluxSeries):
        x = x.values
    arr = check_array(x, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected one series, got an array of shape {arr.shape}")
        arr = arr[:, 0]
    if arr.shape[0] < min_length:
        raise ValueError(f"series has {arr.shape[0]} samples, at least {min_length} required")
    return arr


def _restandardize(X: TrajectoryMatrix, means: np.ndarray, stds: np.ndarray) -> TrajectoryMatrix:
    data = (X.data - means[:, None]) / stds[:, None]
    return TrajectoryMatrix(data, means, stds, standardized=True, ddof=X.ddof)


class _DelayEmbeddingDecomposition(TransformerMixin, BaseEstimator):
    """Shared embedding, projection and reconstruction logic."""

    def _embed_fit(self, x) -> TrajectoryMatrix:
        x = check_series(x)
        W = self.window if self.window is not None else default_window(x.shape[0])
        X = standardize_rows(delay_embed(x, W), ddof=self.ddof)
        self.window_ = W
        self.n_samples_ = x.shape[0]
        self.row_means_ = X.row_means
        self.row_stds_ = X.row_stds
        return X

    def _embed_new(self, x) -> TrajectoryMatrix:
        check_is_fitted(self, "modes_")
        x = check_series(x, min_length=self.window_)
        return _restandardize(delay_embed(x, self.window_), self.row_means_, self.row_stds_)

    def _store(self, ms: ModeSet, X: TrajectoryMatrix):
        self.mode_set_ = ms
        self.trajectory_ = X
        self.modes_ = ms.modes
        self.components_ = ms.modes
        self.pcs_ = ms.pcs
        self.spectrum_ = ms.spectrum
        self.variance_ = ms.variance
        self.n_components_ = ms.k

    def transform(self, x):
        """Principal components of ``x``: shape (P, k) with P = len(x) - W + 1."""
        X = self._embed_new(x)
        return (self.modes_ @ X.data).T

    def reconstruct(self, indices=None, x=None) -> np.ndarray:
        """Series rebuilt from the selected modes, in original units."""
        check_is_fitted(self, "modes_")
        X = self.trajectory_ if x is None else self._embed_new(x)
        idx = list(range(self.n_components_)) if indices is None else [int(i) for i in indices]
        pcs = self.modes_[idx] @ X.data
        rc = reconstruct_component(self.modes_[idx], pcs, X.N, mode_indices=idx)
        return destandardize(rc, X.row_means, X.row_stds, X.N).values


class SSA(_DelayEmbeddingDecomposition):
    """Singular spectrum analysis of one series.

    Parameters
    ----------
    window : int, optional
        Embedding window W in samples; default is the largest whole number
        of years not exceeding half the series.
    n_components : int
        Number of leading modes kept.
    solver : {"auto", "dense", "arpack"}
    ddof : int
        Degrees of freedom for the row standard deviations.

    Attributes
    ----------
    modes_ : ndarray of shape (n_components, W)
    pcs_ : ndarray of shape (n_components, P)
    singular_values_ : ndarray of shape (n_components,)
    variance_ : ndarray of shape (n_components,)
    """

    def __init__(self, window: Optional[int] = None, n_components: int = DEFAULT_N_MODES, solver: str = "auto", ddof: int = 0):
        self.window = window
        self.n_components = n_components
        self.solver = solver
        self.ddof = ddof

    def fit(self, x, y=None):
        X = self._embed_fit(x)
        ms = ssa_decompose(X, self.n_components, solver=self.solver)
        self._store(ms, X)
        self.singular_values_ = ms.spectrum
        return self


class NLSA(_DelayEmbeddingDecomposition):
    """Nonlinear Laplacian spectral analysis of one series.

    Parameters
    ----------
    window, n_components, ddof
        As for :class:`SSA`.
    epsilon : float, optional
        Kernel scale; chosen from the kernel saturation curve when omitted.
    knn : int, optional
        Sparsify the kernel to this many nearest neighbors.
    subset_size, n_runs : int
        Sampling used by the automatic kernel scale.
    random_state : int
        Seed for that sampling.

    Attributes
    ----------
    modes_, pcs_, variance_
        As for :class:`SSA`.
    eigenvalues_ : ndarray of shape (n_components,)
        Transition-matrix eigenvalues, trivial one excluded.
    eigenfunctions_ : ndarray of shape (n_components, P)
    epsilon_ : float
    epsilon_estimate_ : EpsilonEstimate or None
    """

    def __init__(
        self,
        window: Optional[int] = None,
        n_components: int = DEFAULT_N_MODES,
        epsilon: Optional[float] = None,
        knn: Optional[int] = None,
        subset_size: int = 256,
        n_runs: int = 10,
        random_state: int = 0,
        ddof: int = 0,
    ):
        self.window = window
        self.n_components = n_components
        self.epsilon = epsilon
        self.knn = knn
        self.subset_size = subset_size
        self.n_runs = n_runs
        self.random_state = random_state
        self.ddof = ddof

    def _config(self) -> NlsaConfig:
        return NlsaConfig(
            subset_size=self.subset_size,
            n_runs=self.n_runs,
            knn=self.knn,
            seed=self.random_state,
            epsilon=self.epsilon,
        )

    def fit(self, x, y=None):
        X = self._embed_fit(x)
        ms, est = nlsa_fit(X, self.n_components, self._config())
        self._store(ms, X)
        self.eigenvalues_ = ms.eigenvalues
        self.eigenfunctions_ = ms.eigenfunctions
        self.epsilon_ = ms.metadata["epsilon"]
        self.epsilon_estimate_ = est
        return self


class SeasonalCycleExtractor(TransformerMixin, BaseEstimator):
    """Seasonal cycle from the harmonic mode pairs of SSA or NLSA.

    ``fit`` decomposes, classifies every mode and pairs the harmonic ones;
    ``transform`` returns the seasonal cycle of a series in original units,
    built from the fitted harmonic modes. Series without any pair yield the
    trapezoid-averaged row means only (a cycle of zero amplitude).

    Parameters
    ----------
    method : {"SSA", "NLSA"}
    lowpass_cutoff : float, optional
        Remove frequencies at or above this many cycles per year before
        decomposing.
    eps_f, eps_p : float
        Classifier tolerances on peak position and off-peak residual.
    harmonic_set : tuple of int
    decomposition_params : dict, optional
        Extra keyword arguments for :class:`SSA` or :class:`NLSA`.
    """

    def __init__(
        self,
        method: str = "SSA",
        window: Optional[int] = None,
        n_components: int = DEFAULT_N_MODES,
        lowpass_cutoff: Optional[float] = None,
        eps_f: float = EPS_F,
        eps_p: float = EPS_P,
        harmonic_set: tuple = DEFAULT_HARMONICS,
        decomposition_params: Optional[dict] = None,
    ):
        self.method = method
        self.window = window
        self.n_components = n_components
        self.lowpass_cutoff = lowpass_cutoff
        self.eps_f = eps_f
        self.eps_p = eps_p
        self.harmonic_set = harmonic_set
        self.decomposition_params = decomposition_params

    def _prepare(self, x) -> np.ndarray:
        x = check_series(x)
        return x if self.lowpass_cutoff is None else lowpass(x, self.lowpass_cutoff)

    def fit(self, x, y=None):
        method = str(self.method).upper()
        if method not in ("SSA", "NLSA"):
            raise ValueError(f"method must be 'SSA' or 'NLSA', got {self.method!r}")
        cls = SSA if method == "SSA" else NLSA
        dec = cls(window=self.window, n_components=self.n_components, **(self.decomposition_params or {}))
        dec.fit(self._prepare(x))
        labels = classify_modes(dec.mode_set_, self.eps_f, self.eps_p, self.harmonic_set)
        inv = pair_harmonics(labels)
        self.decomposition_ = dec
        self.labels_ = labels
        self.inventory_ = inv
        self.category_ = inv.category
        self.harmonics_ = inv.harmonics
        self.cycle_: Optional[SeasonalCycle] = (
            build_seasonal_cycle(dec.mode_set_, inv, dec.trajectory_) if inv.pairs else None
        )
        return self

    def transform(self, x):
        check_is_fitted(self, "inventory_")
        dec = self.decomposition_
        return dec.reconstruct(self.inventory_.paired_modes, x=self._prepare(x))

    def anomaly(self, x) -> np.ndarray:
        """``x`` minus its seasonal cycle."""
        return check_series(x) - self.transform(x)
