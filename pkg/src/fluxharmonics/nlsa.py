"""Nonlinear Laplacian spectral analysis on the delay-embedding point cloud.

The point cloud is the set of P columns (delay windows) of a standardized
trajectory matrix. A Gaussian diffusion kernel on that cloud is renormalized
with alpha = 1 (density removed) and row-normalized into a Markov matrix T.
Right eigenvectors of T are temporal patterns; lifting them through the
trajectory matrix gives window-space modes comparable to SSA's.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.spatial.distance import pdist, squareform
from sklearn.neighbors import NearestNeighbors

from .embedding import TrajectoryMatrix
from .exceptions import DegenerateCurve, EigFailure, KOutOfRange, ShapeMismatch, ZeroDensity
from .ssa import DEFAULT_N_MODES, ModeSet, _orient, variance_spectrum

__all__ = [
    "NlsaConfig",
    "DiffusionKernel",
    "TransitionMatrix",
    "EpsilonEstimate",
    "pairwise_distances",
    "diffusion_kernel",
    "kernel_saturation_curve",
    "estimate_epsilon",
    "build_transition",
    "nlsa_decompose",
    "nlsa_fit",
]

Distances = Union[np.ndarray, sp.csr_matrix]

# second eigenvalue this close to 1 means the leading eigenspace is not simple
DEGENERACY_TOL = 1e-10
DENSE_EIG_LIMIT = 4000


@dataclass(frozen=True)
class NlsaConfig:
    """Settings for kernel-scale selection and the diffusion operator.

    ``grid`` overrides the default relative grid with absolute epsilon
    values. ``alpha`` and ``t_diffusion`` are fixed at 1.
    """

    alpha: float = 1.0
    t_diffusion: float = 1.0
    grid: Optional[tuple] = None
    grid_points: int = 48
    grid_span: tuple = (1e-6, 1e6)
    subset_size: int = 256
    n_runs: int = 10
    knn: Optional[int] = None
    seed: int = 0
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.alpha != 1.0 or self.t_diffusion != 1.0:
            raise ValueError("only alpha = 1 and t_diffusion = 1 are supported")
        if self.n_runs < 1 or self.subset_size < 2:
            raise ValueError("need n_runs >= 1 and subset_size >= 2")
        if self.knn is not None and self.knn < 1:
            raise ValueError("knn must be a positive neighbor count")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def make_grid(self, scale: float) -> np.ndarray:
        if self.grid is not None:
            return np.sort(np.asarray(self.grid, dtype=float))
        lo, hi = self.grid_span
        return np.geomspace(lo * scale, hi * scale, self.grid_points)


@dataclass(frozen=True, eq=False)
class DiffusionKernel:
    epsilon: float
    J: Union[np.ndarray, sp.csr_matrix]
    knn: Optional[int] = None

    @property
    def sparse(self) -> bool:
        return sp.issparse(self.J)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic diffusion operator.

    ``degree`` holds the row sums ``d`` of the density-normalized kernel
    ``K``, so that ``T = diag(d)^-1 K`` and
    ``S = diag(d)^-1/2 K diag(d)^-1/2`` is its symmetric conjugate.
    """

    T: Union[np.ndarray, sp.csr_matrix]
    degree: np.ndarray
    density: np.ndarray

    @property
    def P(self) -> int:
        return self.T.shape[0]

    @property
    def row_sums(self) -> np.ndarray:
        return np.asarray(self.T.sum(axis=1)).ravel()

    def symmetric(self):
        """The symmetric conjugate ``D^1/2 T D^-1/2``."""
        root = np.sqrt(self.degree)
        if sp.issparse(self.T):
            S = sp.diags(root) @ self.T @ sp.diags(1.0 / root)
            return ((S + S.T) * 0.5).tocsr()
        S = root[:, None] * self.T / root[None, :]
        return 0.5 * (S + S.T)


@dataclass(frozen=True, eq=False)
class EpsilonEstimate:
    """Outcome of the kernel-saturation heuristic.

    ``curve`` and ``turning_point`` come from the first sampling run;
    ``runs`` lists the epsilon chosen in every run, and ``epsilon`` is
    their median.
    """

    epsilon: float
    curve: tuple
    turning_point: float
    runs: tuple
    subset_size: int
    grid: np.ndarray = field(repr=False)
    fit_converged: tuple = ()

    @property
    def all_fits_converged(self) -> bool:
        return all(self.fit_converged)


def _columns(X) -> np.ndarray:
    data = X.data if isinstance(X, TrajectoryMatrix) else np.asarray(X, dtype=float)
    if data.ndim != 2:
        raise ShapeMismatch("expected a W x P matrix")
    return np.ascontiguousarray(data.T)


def pairwise_distances(X, knn: Optional[int] = None) -> Distances:
    """Euclidean distances between the P embedding columns.

    With ``knn`` set, only each column's ``knn`` nearest neighbours are kept
    and the graph is symmetrized by union; the diagonal is stored
    explicitly. Returns a dense P x P array or a CSR matrix.
    """
    pts = _columns(X)
    P = pts.shape[0]
    if P < 2:
        raise ShapeMismatch("need at least two embedding columns")
    if knn is None:
        return squareform(pdist(pts, metric="euclidean"))
    knn = min(int(knn), P - 1)
    nn = NearestNeighbors(n_neighbors=knn, algorithm="brute").fit(pts)
    _, idx = nn.kneighbors()
    rows = np.repeat(np.arange(P), knn)
    cols = idx.ravel()
    # union symmetrization
    keys = np.unique(np.concatenate([rows * P + cols, cols * P + rows]))
    rows, cols = np.divmod(keys, P)
    keep = rows != cols
    rows, cols = rows[keep], cols[keep]
    dist = np.empty(rows.shape[0])
    block = 1 << 16
    for s in range(0, rows.shape[0], block):
        diff = pts[rows[s : s + block]] - pts[cols[s : s + block]]
        dist[s : s + block] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    diag = np.arange(P)
    D = sp.csr_matrix(
        (np.concatenate([dist, np.zeros(P)]), (np.concatenate([rows, diag]), np.concatenate([cols, diag]))),
        shape=(P, P),
    )
    D.sort_indices()
    return D


def diffusion_kernel(distances: Distances, epsilon: float) -> DiffusionKernel:
    """Gaussian kernel ``exp(-z^2 / 2 eps)`` on a distance structure."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if sp.issparse(distances):
        J = distances.tocsr(copy=True)
        J.data = np.exp(-(J.data**2) / (2.0 * epsilon))
        knn = int(np.diff(J.indptr).min()) - 1
        return DiffusionKernel(epsilon=float(epsilon), J=J, knn=knn)
    D = np.asarray(distances, dtype=float)
    return DiffusionKernel(epsilon=float(epsilon), J=np.exp(-(D**2) / (2.0 * epsilon)))


def build_transition(kernel: Union[DiffusionKernel, np.ndarray, sp.spmatrix]) -> TransitionMatrix:
    """Alpha = 1 renormalization followed by Markov row normalization.

    ``q = J 1``, ``K = diag(q)^-1 J diag(q)^-1``, ``d = K 1``,
    ``T = diag(d)^-1 K``.
    """
    J = kernel.J if isinstance(kernel, DiffusionKernel) else kernel
    if J.shape[0] != J.shape[1]:
        raise ShapeMismatch("kernel must be square")
    q = np.asarray(J.sum(axis=1)).ravel()
    if np.any(q <= 0):
        raise ZeroDensity(f"kernel row {int(np.flatnonzero(q <= 0)[0])} sums to zero")
    inv_q = 1.0 / q
    if sp.issparse(J):
        K = (sp.diags(inv_q) @ J @ sp.diags(inv_q)).tocsr()
        d = np.asarray(K.sum(axis=1)).ravel()
        T = (sp.diags(1.0 / d) @ K).tocsr()
    else:
        J = np.asarray(J, dtype=float)
        K = inv_q[:, None] * J * inv_q[None, :]
        d = K.sum(axis=1)
        T = K / d[:, None]
    return TransitionMatrix(T=T, degree=d, density=q)


def kernel_saturation_curve(sq_dist: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Total kernel weight ``sum_ij exp(-z_ij^2 / 2 eps)`` for every eps in ``grid``."""
    flat = np.asarray(sq_dist, dtype=float).ravel()
    return np.array([np.exp(-flat / (2.0 * eps)).sum() for eps in grid])


def _tanh_model(u, a, u0, b, c0):
    return a * (1.0 + np.tanh((u - u0) / b)) / 2.0 + c0


def _fit_turning_point(u: np.ndarray, z: np.ndarray) -> tuple[float, bool]:
    lo, hi = float(z.min()), float(z.max())
    mid = 0.5 * (lo + hi)
    u_mid = float(np.interp(mid, z, u))
    p0 = (hi - lo, u_mid, (u[-1] - u[0]) / 8.0, lo)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            params, _ = curve_fit(_tanh_model, u, z, p0=p0, maxfev=2000)
    except (RuntimeError, ValueError):
        return mid, False
    a, u0, b, c0 = params
    if not np.all(np.isfinite(params)) or not (u[0] <= u0 <= u[-1]):
        return mid, False
    return float(a / 2.0 + c0), True


def _select_on_curve(u: np.ndarray, z: np.ndarray, target: float) -> float:
    zz = np.maximum.accumulate(z)
    return float(np.exp(np.interp(target, zz, u)))


def estimate_epsilon(X, cfg: NlsaConfig = NlsaConfig()) -> EpsilonEstimate:
    """Pick the kernel scale from the saturation curve of random column subsets.

    For each run a random subset of ``c`` columns is drawn, the total kernel
    weight is evaluated over a log-spaced grid, a tanh is fitted in
    ``log eps`` and eps is read off where the weight equals the fitted
    turning-point value divided by e. The result is the median over runs.
    """
    pts = _columns(X)
    P = pts.shape[0]
    c = min(cfg.subset_size, P)
    if c < 2:
        raise ShapeMismatch("need at least two columns to sample")

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.n_runs)]
    subsets = [np.sort(rng.choice(P, size=c, replace=False)) for rng in streams]
    sq = [squareform(pdist(pts[s], metric="sqeuclidean")) for s in subsets]

    off = sq[0][np.triu_indices(c, 1)]
    scale = float(np.median(off))
    if scale <= 0:
        scale = float(off.mean())
    if scale <= 0 and cfg.grid is None:
        raise DegenerateCurve("all sampled points coincide; the saturation curve is flat")
    grid = cfg.make_grid(scale)
    if grid.size < 2:
        raise ValueError("epsilon grid needs at least two points")
    u = np.log(grid)

    chosen, converged = [], []
    first_curve, first_turn = None, None
    for d2 in sq:
        z = kernel_saturation_curve(d2, grid)
        if z.max() - z.min() <= 1e-9 * z.max():
            raise DegenerateCurve("kernel saturation curve is flat over the grid")
        z_t, ok = _fit_turning_point(u, z)
        chosen.append(_select_on_curve(u, z, z_t / math.e))
        converged.append(ok)
        if first_curve is None:
            first_curve, first_turn = (u.copy(), z), z_t
    return EpsilonEstimate(
        epsilon=float(np.median(chosen)),
        curve=first_curve,
        turning_point=float(first_turn),
        runs=tuple(chosen),
        subset_size=c,
        grid=grid,
        fit_converged=tuple(converged),
    )


def _top_eigenpairs(S, m: int):
    P = S.shape[0]
    if sp.issparse(S) and m < P - 1:
        v0 = np.random.default_rng(0).standard_normal(P)
        try:
            vals, vecs = eigsh(S, k=m, which="LA", v0=v0, tol=1e-12)
        except ArpackNoConvergence as exc:
            raise EigFailure(str(exc)) from exc
    else:
        A = S.toarray() if sp.issparse(S) else S
        try:
            vals, vecs = scipy.linalg.eigh(A, subset_by_index=[P - m, P - 1])
        except np.linalg.LinAlgError as exc:
            raise EigFailure(str(exc)) from exc
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def nlsa_decompose(T: TransitionMatrix, X: TrajectoryMatrix, k: int = DEFAULT_N_MODES) -> ModeSet:
    """Leading nontrivial eigenvectors of T lifted into window space.

    Raises
    ------
    EigFailure
        If the eigensolver fails, or if eigenvalue 1 is not simple (the
        leading eigenspace is degenerate, e.g. T = I or a disconnected graph).
    """
    P = T.P
    if X.P != P:
        raise ShapeMismatch(f"transition matrix is {P} x {P}, trajectory has P={X.P}")
    kmax = min(P - 1, X.W)
    if not 1 <= k <= kmax:
        raise KOutOfRange(f"k={k} outside [1, {kmax}]")
    vals, vecs = _top_eigenpairs(T.symmetric(), k + 1)
    if vals[1] >= vals[0] - DEGENERACY_TOL:
        raise EigFailure(
            "leading eigenvalue of the transition matrix is degenerate "
            f"(lambda_1={vals[0]:.12g}, lambda_2={vals[1]:.12g}); mode order is undefined"
        )

    phi = vecs / np.sqrt(T.degree)[:, None]
    phi /= np.linalg.norm(phi, axis=0)
    trivial, phi, lam = phi[:, 0], phi[:, 1:], vals[1:]

    lifted = X.data @ phi
    # sign of each eigenfunction follows the largest entry of its lifted pattern
    pivot = np.argmax(np.abs(lifted), axis=0)
    signs = np.sign(lifted[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    phi, lifted = phi * signs, lifted * signs
    norms = np.linalg.norm(lifted, axis=0)

    Q, R = np.linalg.qr(lifted)
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    modes = np.ascontiguousarray(_orient(Q).T)
    ms = ModeSet(
        method="NLSA",
        modes=modes,
        pcs=modes @ X.data,
        spectrum=norms,
        variance=np.zeros(k),
        eigenvalues=lam,
        eigenfunctions=np.ascontiguousarray(phi.T),
        metadata={
            "normalization": "T = D^-1 K, K = Z^-1 J Z^-1, Z = J 1, D = K 1",
            "leading_eigenvalue": float(vals[0]),
            "trivial_spread": float(np.ptp(trivial) / (np.abs(trivial).max() or 1.0)),
        },
    )
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


def nlsa_fit(X: TrajectoryMatrix, k: int = DEFAULT_N_MODES, cfg: NlsaConfig = NlsaConfig()):
    """Distances, automatic epsilon, kernel, transition matrix and modes in one call.

    Returns ``(ModeSet, EpsilonEstimate or None)``; the estimate is ``None``
    when ``cfg.epsilon`` fixes the scale.
    """
    estimate = None
    eps = cfg.epsilon
    if eps is None:
        estimate = estimate_epsilon(X, cfg)
        eps = estimate.epsilon
    kernel = diffusion_kernel(pairwise_distances(X, cfg.knn), eps)
    ms = nlsa_decompose(build_transition(kernel), X, k)
    ms.metadata["epsilon"] = float(eps)
    return ms, estimate
