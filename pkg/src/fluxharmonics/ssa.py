"""Singular spectrum analysis of a standardized trajectory matrix."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .embedding import TrajectoryMatrix, reconstruct_component
from .exceptions import KOutOfRange, ShapeMismatch, SvdFailure

__all__ = [
    "ModeSet",
    "ssa_decompose",
    "variance_spectrum",
    "DEFAULT_N_MODES",
    "PAIR_TOLERANCE",
]

DEFAULT_N_MODES = 16
# relative gap below which two singular values are treated as one oscillation plane
PAIR_TOLERANCE = 1e-6
# above this size the truncated iterative solver replaces the dense SVD
DENSE_SVD_LIMIT = 1500
ITERATIVE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Ordered modes of one decomposition.

    Attributes
    ----------
    method : {"SSA", "NLSA"}
    modes : ndarray, shape (k, W)
        Orthonormal window-space patterns.
    pcs : ndarray, shape (k, P)
        Projections of the trajectory matrix onto each mode.
    spectrum : ndarray, shape (k,)
        Singular values (SSA) or norms of the lifted eigenfunctions (NLSA).
    variance : ndarray, shape (k,)
        Diagonal of ``EOF^T X X^T EOF / W``.
    eigenvalues : ndarray or None
        Transition-matrix eigenvalues (NLSA only).
    eigenfunctions : ndarray or None, shape (k, P)
        Unit-norm right eigenvectors of the transition matrix (NLSA only).
    """

    method: str
    modes: np.ndarray
    pcs: np.ndarray
    spectrum: np.ndarray
    variance: np.ndarray
    eigenvalues: Optional[np.ndarray] = None
    eigenfunctions: Optional[np.ndarray] = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.modes.shape[0]

    @property
    def W(self) -> int:
        return self.modes.shape[1]

    @property
    def P(self) -> int:
        return self.pcs.shape[1]

    def reconstruct(self, indices=None):
        """Standardized-domain reconstruction from a subset of modes."""
        idx = list(range(self.k)) if indices is None else [int(i) for i in indices]
        N = self.W + self.P - 1
        return reconstruct_component(self.modes[idx], self.pcs[idx], N, mode_indices=idx)


def _orient(U: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def _fix_degenerate_pairs(U: np.ndarray, s: np.ndarray, tol: float = PAIR_TOLERANCE) -> np.ndarray:
    """Pin the orientation of rotation-ambiguous mode planes.

    Within a plane of (numerically) equal singular values the first mode is
    rotated to carry the largest possible value at the window midpoint; the
    second is the in-plane orthogonal complement.
    """
    U = U.copy()
    mid = U.shape[0] // 2
    i = 0
    while i < U.shape[1] - 1:
        a, b = s[i], s[i + 1]
        if a > 0 and abs(a - b) <= tol * a:
            ua, ub = U[:, i].copy(), U[:, i + 1].copy()
            c = np.array([ua[mid], ub[mid]])
            norm = np.hypot(*c)
            if norm > 0:
                c /= norm
                U[:, i] = c[0] * ua + c[1] * ub
                U[:, i + 1] = -c[1] * ua + c[0] * ub
            i += 2
        else:
            i += 1
    return U


def _deterministic_start(n: int) -> np.ndarray:
    rng = np.random.default_rng(0)
    return rng.standard_normal(n)


def _top_svd(A: np.ndarray, k: int, solver: str):
    W, P = A.shape
    m = min(W, P)
    if solver == "auto":
        solver = "dense" if (m <= DENSE_SVD_LIMIT or k >= m // 2) else "arpack"
    if solver == "dense":
        try:
            U, s, _ = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesdd")
        except np.linalg.LinAlgError:
            try:
                U, s, _ = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
            except np.linalg.LinAlgError as exc:
                raise SvdFailure(str(exc)) from exc
        return U[:, :k], s[:k]
    if solver == "arpack":
        if k >= m:
            raise KOutOfRange("the iterative solver needs k < min(W, P)")
        try:
            U, s, _ = svds(A, k=k, tol=ITERATIVE_TOL, v0=_deterministic_start(m), solver="arpack")
        except ArpackNoConvergence as exc:
            raise SvdFailure(str(exc)) from exc
        order = np.argsort(s)[::-1]
        return U[:, order], s[order]
    raise ValueError(f"unknown solver {solver!r}")


def ssa_decompose(X: TrajectoryMatrix, k: int = DEFAULT_N_MODES, solver: str = "auto") -> ModeSet:
    """Leading ``k`` left singular vectors of the standardized trajectory matrix.

    Signs are fixed so that each mode's largest-magnitude entry is positive,
    after degenerate pairs have been rotated to a reproducible orientation.
    Projections are recomputed as ``X^T u_i`` so they match the final modes.
    """
    if not X.standardized:
        raise ValueError("SSA expects a standardized trajectory matrix")
    m = min(X.W, X.P)
    if not 1 <= k <= m:
        raise KOutOfRange(f"k={k} outside [1, {m}]")
    A = X.data
    if not np.all(np.isfinite(A)):
        raise SvdFailure("trajectory matrix contains non-finite entries")
    U, s = _top_svd(A, k, solver)
    U = _orient(_fix_degenerate_pairs(U, s))
    modes = np.ascontiguousarray(U.T)
    pcs = modes @ A
    ms = ModeSet(
        method="SSA",
        modes=modes,
        pcs=pcs,
        spectrum=s.copy(),
        variance=np.zeros(k),
        metadata={"solver": solver},
    )
    return _with_variance(ms, X)


def _with_variance(ms: ModeSet, X: TrajectoryMatrix) -> ModeSet:
    return ModeSet(
        method=ms.method,
        modes=ms.modes,
        pcs=ms.pcs,
        spectrum=ms.spectrum,
        variance=variance_spectrum(ms, X),
        eigenvalues=ms.eigenvalues,
        eigenfunctions=ms.eigenfunctions,
        metadata=ms.metadata,
    )


def variance_spectrum(ms: ModeSet, X: TrajectoryMatrix) -> np.ndarray:
    """Per-mode variance ``diag(EOF^T X X^T EOF) / W``."""
    if ms.modes.shape[1] != X.W:
        raise ShapeMismatch(f"modes have length {ms.modes.shape[1]}, matrix has W={X.W}")
    proj = ms.modes @ X.data
    return np.einsum("ij,ij->i", proj, proj) / X.W
