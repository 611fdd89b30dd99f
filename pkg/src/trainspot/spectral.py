"""Graph Laplacians, the generalized eigenproblem, eigengap model
selection and normalized spectral clustering.

The clustering pipeline follows the random-walk normalization: isolated
vertices are removed, the generalized problem L u = lambda D u is solved
through the symmetric transform D^{-1/2} L D^{-1/2} (valid once every
degree is positive), and vertices are k-means-clustered on the rows of
the matrix of the first k generalized eigenvectors. When k is not given
it is chosen at the largest gap of the ascending spectrum. The number of
(near-)zero eigenvalues equals the number of connected components, which
anchors both the tests and the eigengap behaviour on well-separated
data.

The normalized-cut objective is exposed as a diagnostic only; its direct
minimisation is intractable and the spectral relaxation above stands in
for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DataError
from .similarity import SimilarityGraph

MAX_DENSE_VERTICES = 5000
RESIDUAL_RTOL = 1e-8


@dataclass
class LaplacianPair:
    """Weight matrix with its degree vector; L = diag(d) - W."""

    weights: np.ndarray
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        self.degrees = self.weights.sum(axis=1)

    @property
    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees) - self.weights

    @property
    def isolated(self) -> np.ndarray:
        return self.degrees == 0


@dataclass
class Spectrum:
    """Ascending generalized eigenpairs of L u = lambda D u."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    max_residual: float


@dataclass
class Clustering:
    """Per-vertex labels in 1..k; -1 marks removed/isolated vertices."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)

    def cluster_indices(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]


def laplacian(graph: SimilarityGraph) -> LaplacianPair:
    if graph.n_vertices < 1:
        raise DataError("graph must have at least one vertex")
    return LaplacianPair(np.asarray(graph.weights, dtype=float))


def generalized_eigs(pair: LaplacianPair, m: int) -> Spectrum:
    """Smallest ``m`` generalized eigenpairs, ascending.

    Requires every degree positive; solve on the similarity-transformed
    symmetric matrix and back-substitute u = D^{-1/2} y. Residuals
    ||L u - lambda D u|| are checked against RESIDUAL_RTOL * ||L||.
    """
    d = pair.degrees
    if np.any(d <= 0):
        raise DataError(
            "degree matrix is singular: remove isolated vertices before the eigensolve"
        )
    n = len(d)
    m = int(min(m, n))
    if m < 1:
        raise ValueError("need at least one eigenpair")
    inv_sqrt = 1.0 / np.sqrt(d)
    lap = pair.laplacian
    sym = lap * inv_sqrt[:, None] * inv_sqrt[None, :]
    sym = 0.5 * (sym + sym.T)
    vals, vecs = scipy.linalg.eigh(sym, subset_by_index=(0, m - 1))
    u = vecs * inv_sqrt[:, None]

    lap_norm = np.linalg.norm(lap)
    resid = lap @ u - (d[:, None] * u) * vals[None, :]
    denom = max(lap_norm, np.finfo(float).tiny)
    max_residual = float(np.linalg.norm(resid, axis=0).max() / denom) if lap_norm > 0 else 0.0
    if lap_norm > 0 and max_residual > 100 * RESIDUAL_RTOL:
        raise DataError(f"eigensolve residual {max_residual:.2e} above tolerance")
    return Spectrum(vals, u, max_residual)


def eigengap_select(eigenvalues: np.ndarray, k_min: int, k_max: int) -> int:
    """k at the largest gap of the ascending spectrum.

    Scans gaps lambda_{i+1} - lambda_i for k_min <= i <= k_max (1-based)
    and returns the smallest argmax. Needs at least k_max + 1 values.
    """
    vals = np.asarray(eigenvalues, dtype=float)
    if k_min < 1 or k_min > k_max:
        raise ValueError("require 1 <= k_min <= k_max")
    if len(vals) <= k_max:
        raise ValueError(f"need more than k_max={k_max} eigenvalues, got {len(vals)}")
    if np.any(np.diff(vals) < -1e-9 * max(1.0, abs(vals[-1]))):
        raise ValueError("eigenvalues must be ascending")
    gaps = vals[k_min:k_max + 1] - vals[k_min - 1:k_max]
    return k_min + int(np.argmax(gaps))


def _seed_centers(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted (k-means++ style) center initialization."""
    n = points.shape[0]
    chosen = np.empty(k, dtype=int)
    chosen[0] = rng.integers(n)
    d2 = np.square(points - points[chosen[0]]).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining mass on already-chosen points: fall back to the
            # lowest-index unchosen points for determinism
            unchosen = np.setdiff1d(np.arange(n), chosen[:i], assume_unique=False)
            chosen[i] = unchosen[0]
        else:
            chosen[i] = rng.choice(n, p=d2 / total)
        d2 = np.minimum(d2, np.square(points - points[chosen[i]]).sum(axis=1))
    return points[chosen].copy()


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int):
    """Lloyd iterations with farthest-point repair for emptied clusters.

    Returns (labels, objective, per-iteration objectives). The objective
    sequence is non-increasing: both the update step and moving the
    farthest point into its own singleton cluster lower the within-cluster
    sum of squares.
    """
    k = centers.shape[0]
    sq_pts = np.square(points).sum(axis=1)
    labels = np.full(points.shape[0], -1)
    objective = np.inf
    history: list[float] = []
    for _ in range(max_iter):
        d2 = sq_pts[:, None] - 2.0 * points @ centers.T + np.square(centers).sum(axis=1)[None, :]
        np.maximum(d2, 0.0, out=d2)
        new_labels = np.argmin(d2, axis=1)
        assigned = d2[np.arange(len(new_labels)), new_labels]
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(np.argmax(assigned))
                new_labels[far] = c
                assigned[far] = 0.0
        objective = float(assigned.sum())
        history.append(objective)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return labels, objective, history


def kmeans(points: np.ndarray, k: int, seed: int = 0,
           restarts: int = 10, max_iter: int = 100) -> np.ndarray:
    """Best-of-``restarts`` seeded k-means; returns labels in 0..k-1.

    Deterministic for a fixed seed; ties between restarts keep the
    earlier run.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points n={n}")
    rng = np.random.default_rng(seed)
    best_labels = None
    best_obj = np.inf
    for _ in range(restarts):
        centers = _seed_centers(points, k, rng)
        labels, obj, _ = _lloyd(points, centers, max_iter)
        if obj < best_obj:
            best_obj = obj
            best_labels = labels
    return best_labels


def spectral_cluster(graph: SimilarityGraph, k: int | None = None, *,
                     seed: int = 0, k_min: int = 2, k_max: int | None = None,
                     restarts: int = 10, max_iter: int = 100,
                     max_dense: int = MAX_DENSE_VERTICES) -> Clustering:
    """Normalized spectral clustering with optional eigengap k selection.

    Isolated vertices get label -1; the rest are clustered by k-means on
    the rows of the n x k generalized-eigenvector matrix. With ``k`` None
    the count is picked by :func:`eigengap_select` over
    [k_min, min(k_max, n_active - 1)].
    """
    w = np.asarray(graph.weights, dtype=float)
    n = w.shape[0]
    labels = np.full(n, -1)
    active = w.sum(axis=1) > 0
    n_active = int(active.sum())
    if n_active == 0:
        return Clustering(labels, 0)
    if n_active > max_dense:
        raise DataError(
            f"{n_active} non-isolated vertices exceeds the dense-solver limit "
            f"{max_dense}; split the data into overlapping time windows"
        )
    pair = LaplacianPair(w[np.ix_(active, active)])

    if k is None:
        if n_active <= k_min:
            k = n_active
            spectrum = generalized_eigs(pair, k)
        else:
            cap = k_max if k_max is not None else max(k_min, min(60, n_active // 10))
            cap = max(k_min, min(cap, n_active - 1))
            spectrum = generalized_eigs(pair, cap + 1)
            k = eigengap_select(spectrum.eigenvalues, k_min, cap)
    else:
        if not (1 <= k <= n_active):
            raise ValueError(f"k={k} out of range for {n_active} active vertices")
        spectrum = generalized_eigs(pair, k)

    if k == 1:
        labels[active] = 1
    else:
        rows = spectrum.eigenvectors[:, :k]
        labels[active] = kmeans(rows, k, seed=seed, restarts=restarts,
                                max_iter=max_iter) + 1
    return Clustering(labels, k)


def ncut(graph: SimilarityGraph, clustering: Clustering) -> float:
    """Normalized-cut value of a clustering (diagnostic).

    0.5 * sum over clusters of cut(A, complement) / vol(A). Labels -1 are
    outside every cluster; a cluster with zero volume is an error.
    """
    w = np.asarray(graph.weights, dtype=float)
    labels = clustering.labels
    total = 0.0
    for c in range(1, clustering.k + 1):
        members = labels == c
        if not members.any():
            continue
        vol = float(w[members].sum())
        if vol == 0:
            raise DataError(f"cluster {c} has zero volume")
        cut = float(w[np.ix_(members, ~members)].sum())
        total += cut / vol
    return 0.5 * total


def connected_components(graph: SimilarityGraph) -> Clustering:
    """Components of the positive-weight adjacency; labels 1..k cover
    every vertex (isolated vertices become singleton components)."""
    w = graph.weights
    n = graph.n_vertices
    labels = np.zeros(n, dtype=int)
    comp = 0
    for start in range(n):
        if labels[start]:
            continue
        comp += 1
        stack = [start]
        labels[start] = comp
        while stack:
            v = stack.pop()
            for u in np.nonzero(w[v] > 0)[0]:
                if not labels[u]:
                    labels[u] = comp
                    stack.append(int(u))
    return Clustering(labels, comp)


def spectrum_csv(eigenvalues: np.ndarray, stream) -> None:
    """Dump for eigengap plots: ``index,eigenvalue`` with 1-based index."""
    stream.write("index,eigenvalue\n")
    for i, val in enumerate(np.asarray(eigenvalues, dtype=float), start=1):
        stream.write(f"{i},{val:.12g}\n")
