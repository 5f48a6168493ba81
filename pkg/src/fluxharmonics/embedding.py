"""Uniform delay embedding, row standardization and diagonal-averaging reconstruction.

Trajectory matrices are stored window-major: ``X[i, j] = x[i + j]`` with
``i < W`` (lag within the window) and ``j < P`` (window start), so each column
is one delay window and ``P = N - W + 1``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import ConstantRow, ShapeMismatch, WindowTooLarge, WindowZero

__all__ = [
    "DAYS_PER_YEAR",
    "TrajectoryMatrix",
    "ReconstructedComponent",
    "delay_embed",
    "standardize_rows",
    "coverage",
    "diagonal_average",
    "reconstruct_component",
    "destandardize",
    "default_window",
]

DAYS_PER_YEAR = 365.25
_HEADER = struct.Struct("<QQ")


@dataclass(frozen=True, eq=False)
class TrajectoryMatrix:
    """W x P delay-embedded data plus the statistics needed to undo standardization."""

    data: np.ndarray
    row_means: np.ndarray
    row_stds: np.ndarray
    standardized: bool = False
    ddof: int = 0

    def __post_init__(self):
        for name in ("data", "row_means", "row_stds"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.data.ndim != 2:
            raise ShapeMismatch("trajectory data must be two-dimensional")
        W = self.data.shape[0]
        if self.row_means.shape != (W,) or self.row_stds.shape != (W,):
            raise ShapeMismatch("row statistics must have length W")

    @property
    def W(self) -> int:
        return self.data.shape[0]

    @property
    def P(self) -> int:
        return self.data.shape[1]

    @property
    def N(self) -> int:
        return self.W + self.P - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def to_bytes(self) -> bytes:
        """16-byte header (W, P as little-endian uint64) then row-major float64 LE."""
        body = np.ascontiguousarray(self.data, dtype="<f8").tobytes(order="C")
        return _HEADER.pack(self.W, self.P) + body

    @staticmethod
    def matrix_from_bytes(blob: bytes) -> np.ndarray:
        W, P = _HEADER.unpack_from(blob, 0)
        expected = _HEADER.size + 8 * W * P
        if len(blob) != expected:
            raise ShapeMismatch(f"payload has {len(blob)} bytes, header implies {expected}")
        return np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(W, P).astype(float)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())


@dataclass(frozen=True, eq=False)
class ReconstructedComponent:
    """Time-domain reconstruction from a subset of modes.

    ``modes`` (k x W) and ``pcs`` (k x P) are the factors the values were
    built from; keeping them lets :func:`destandardize` undo the per-row
    scaling exactly before averaging.
    """

    values: np.ndarray
    mode_indices: tuple
    domain: str = "standardized"
    modes: Optional[np.ndarray] = field(default=None, repr=False)
    pcs: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.values)


def default_window(n: int) -> int:
    """Longest whole-year window not exceeding N/2 (falls back to N//2 below one year)."""
    years = int(np.floor((n / 2) / DAYS_PER_YEAR))
    if years < 1:
        return n // 2
    return int(np.floor(years * DAYS_PER_YEAR))


def delay_embed(values, W: int) -> TrajectoryMatrix:
    """Embed a series into its W x (N - W + 1) trajectory matrix.

    >>> delay_embed([1.0, 2.0, 3.0, 4.0], 2).data
    array([[1., 2., 3.],
           [2., 3., 4.]])
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ShapeMismatch("values must be one-dimensional")
    n = x.shape[0]
    if W < 1:
        raise WindowZero("window length must be at least 1")
    if W > n / 2:
        raise WindowTooLarge(f"window {W} exceeds N/2 = {n / 2}")
    P = n - W + 1
    data = np.lib.stride_tricks.sliding_window_view(x, P).copy()
    return TrajectoryMatrix(data=data, row_means=np.zeros(W), row_stds=np.ones(W))


def standardize_rows(X: TrajectoryMatrix, ddof: int = 0) -> TrajectoryMatrix:
    """Center every row and scale it to unit standard deviation.

    ``ddof=0`` (population normalization) is the pipeline convention; pass
    ``ddof=1`` for sample standard deviation.
    """
    if X.standardized:
        raise ValueError("trajectory matrix is already standardized")
    data = X.data
    means = data.mean(axis=1)
    centered = data - means[:, None]
    stds = np.sqrt((centered**2).sum(axis=1) / (X.P - ddof))
    scale = np.maximum(np.abs(means), 1.0)
    flat = np.flatnonzero(stds <= 1e-13 * scale)
    if flat.size:
        raise ConstantRow(int(flat[0]))
    return TrajectoryMatrix(
        data=centered / stds[:, None],
        row_means=means,
        row_stds=stds,
        standardized=True,
        ddof=ddof,
    )


def coverage(N: int, W: int) -> np.ndarray:
    """Number of windows covering each time step (the trapezoid weight M(t))."""
    P = N - W + 1
    t = np.arange(1, N + 1)
    return np.minimum.reduce([t, np.full(N, W), np.full(N, P), N - t + 1]).astype(float)


def diagonal_average(matrix) -> np.ndarray:
    """Average a W x P matrix over its anti-diagonals into a length W+P-1 series."""
    Y = np.asarray(matrix, dtype=float)
    W, P = Y.shape
    N = W + P - 1
    idx = (np.arange(W)[:, None] + np.arange(P)[None, :]).ravel()
    sums = np.bincount(idx, weights=Y.ravel(), minlength=N)
    return sums / coverage(N, W)


def _as_factor_rows(arr, name: str) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ShapeMismatch(f"{name} must be a sequence of 1-D arrays")
    return a


def reconstruct_component(
    modes, pcs, N: int, mode_indices: Optional[Sequence[int]] = None
) -> ReconstructedComponent:
    """Rebuild the time series contribution of the selected modes.

    Parameters
    ----------
    modes : array_like, shape (k, W)
        Selected spatial patterns.
    pcs : array_like, shape (k, P)
        Matching projections onto those patterns.
    N : int
        Length of the source series; must equal ``W + P - 1``.

    Returns
    -------
    ReconstructedComponent
        Values in the standardized domain. An empty selection gives zeros.
    """
    modes = np.asarray(modes, dtype=float)
    pcs = np.asarray(pcs, dtype=float)
    if modes.size == 0 and pcs.size == 0:
        return ReconstructedComponent(
            values=np.zeros(N), mode_indices=(), modes=np.zeros((0, 0)), pcs=np.zeros((0, 0))
        )
    modes = _as_factor_rows(modes, "modes")
    pcs = _as_factor_rows(pcs, "pcs")
    if modes.shape[0] != pcs.shape[0]:
        raise ShapeMismatch(f"{modes.shape[0]} modes but {pcs.shape[0]} projections")
    W, P = modes.shape[1], pcs.shape[1]
    if P != N - W + 1:
        raise ShapeMismatch(f"W={W}, P={P} inconsistent with N={N}")
    if mode_indices is None:
        mode_indices = range(modes.shape[0])
    values = diagonal_average(modes.T @ pcs)
    return ReconstructedComponent(
        values=values, mode_indices=tuple(int(i) for i in mode_indices), modes=modes, pcs=pcs
    )


def destandardize(rc: ReconstructedComponent, row_means, row_stds, N: int) -> ReconstructedComponent:
    """Map a standardized reconstruction back to original units.

    Each window entry is sent through its row's inverse affine map
    (``y * std_i + mean_i``) before the trapezoid averaging, so a full-rank
    reconstruction returns the original series and a zero component returns
    the averaged row means.
    """
    if rc.domain != "standardized":
        raise ValueError("component is already in the original domain")
    means = np.asarray(row_means, dtype=float)
    stds = np.asarray(row_stds, dtype=float)
    if means.shape != stds.shape or means.ndim != 1:
        raise ShapeMismatch("row_means and row_stds must be 1-D of equal length")
    W = means.shape[0]
    if len(rc.values) != N or N - W + 1 < 1:
        raise ShapeMismatch(f"component of length {len(rc.values)} with W={W} and N={N}")
    P = N - W + 1
    offset = np.convolve(means, np.ones(P)) / coverage(N, W)
    if rc.modes is None or rc.modes.size == 0:
        if rc.modes is None and np.any(rc.values != 0):
            raise ValueError("component carries no mode factors; cannot destandardize exactly")
        values = offset
    else:
        if rc.modes.shape[1] != W:
            raise ShapeMismatch(f"modes have length {rc.modes.shape[1]}, statistics {W}")
        values = diagonal_average((rc.modes * stds[None, :]).T @ rc.pcs) + offset
    return ReconstructedComponent(
        values=values,
        mode_indices=rc.mode_indices,
        domain="original",
        modes=rc.modes,
        pcs=rc.pcs,
    )


def standardized_signal(X: TrajectoryMatrix) -> np.ndarray:
    """Diagonal average of the (standardized) trajectory matrix."""
    return diagonal_average(X.data)
