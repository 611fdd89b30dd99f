"""Journey vectors over the extended reals and pairwise similarity.

A journey embeds into R^S extended with infinity: entry k is the
midpoint of the journey's first/last sighting at station k, or inf when
the station was not observed. Two metrics compare vectors a, b through
their difference d = a - b (with inf - x = x - inf = inf - inf = inf):

* ``l0(d)`` counts finite entries of d, i.e. stations observed in both
  journeys (spatial agreement);
* ``linf(d)`` is the largest |finite entry| of d, inf when there is none
  (worst temporal disagreement on shared stations).

hard similarity: l0(d) if linf(d) <= tolerance else 0
soft similarity: l0(d) * exp(-linf(d)^2 / bandwidth_sq)   (exp(-inf) = 0)

Journeys riding the same train agree within a station dwell wherever
they overlap, so they score high; journeys from different trains
disagree by at least a headway at every shared station and score zero
(hard) or negligibly (soft). The similarity graph connects all pairs
with positive weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from . import _kernels
from ._accel import ACTIVE_BACKEND
from ._kernels import HARD, SOFT
from ._kernels_np import pairwise_weights_block
from .errors import DataError
from .journeys import Journey


@dataclass(frozen=True)
class SimilarityParams:
    """Metric choice plus its scale.

    ``tolerance_s`` is the hard metric's largest accepted time
    disagreement; ``bandwidth_sq_s`` is the soft metric's decay scale
    (twice the squared Gaussian width, in seconds squared).
    """

    metric: str = "hard"
    tolerance_s: float = 30.0
    bandwidth_sq_s: float = 30.0

    def __post_init__(self):
        if self.metric not in ("hard", "soft"):
            raise ValueError(f"metric must be 'hard' or 'soft', got {self.metric!r}")
        if self.tolerance_s <= 0:
            raise ValueError("tolerance_s must be > 0")
        if self.bandwidth_sq_s <= 0:
            raise ValueError("bandwidth_sq_s must be > 0")


@dataclass(frozen=True)
class JourneyVector:
    """Extended-real embedding of one journey over an ordered station set."""

    entries: np.ndarray
    stations: tuple[int, ...]

    def __post_init__(self):
        if self.entries.shape != (len(self.stations),):
            raise ValueError("entries must align with the station set")

    @property
    def n_observed(self) -> int:
        return int(np.isfinite(self.entries).sum())


def vectorize(journey: Journey, stations: Sequence[int]) -> JourneyVector:
    """Embed a journey over ``stations`` (ordered, possibly excluding
    unusable stations). Rejects journeys with no leg on the station set."""
    stations = tuple(stations)
    index = {s: i for i, s in enumerate(stations)}
    entries = np.full(len(stations), np.inf)
    hit = False
    for leg in journey.legs:
        pos = index.get(leg.station)
        if pos is not None:
            entries[pos] = 0.5 * (leg.first + leg.last)
            hit = True
    if not hit:
        raise DataError("journey has no leg in the station set")
    return JourneyVector(entries, stations)


def _entries(v) -> np.ndarray:
    if isinstance(v, JourneyVector):
        return v.entries
    return np.asarray(v, dtype=float)


def l0_norm(v) -> int:
    """Number of finite entries."""
    return int(np.isfinite(_entries(v)).sum())


def linf_norm(v) -> float:
    """Largest absolute finite entry; inf when no entry is finite."""
    e = _entries(v)
    finite = np.isfinite(e)
    if not finite.any():
        return math.inf
    return float(np.abs(e[finite]).max())


def vec_difference(a, b) -> np.ndarray:
    """Entrywise difference with inf absorbing: any inf operand gives inf."""
    if isinstance(a, JourneyVector) and isinstance(b, JourneyVector):
        if a.stations != b.stations:
            raise DataError("vectors built over different station sets")
    ea, eb = _entries(a), _entries(b)
    if ea.shape != eb.shape:
        raise DataError("difference requires equal-length vectors")
    both = np.isfinite(ea) & np.isfinite(eb)
    diff = np.where(both, ea, 0.0) - np.where(both, eb, 0.0)
    return np.where(both, diff, np.inf)


def similarity(a, b, params: SimilarityParams) -> float:
    """Pairwise similarity of two journey vectors under ``params``."""
    d = vec_difference(a, b)
    cnt = l0_norm(d)
    if cnt == 0:
        return 0.0
    worst = linf_norm(d)
    if params.metric == "hard":
        return float(cnt) if worst <= params.tolerance_s else 0.0
    return float(cnt * math.exp(-(worst * worst) / params.bandwidth_sq_s))


@dataclass
class SimilarityGraph:
    """Weighted undirected graph over journey vectors (dense weights)."""

    weights: np.ndarray
    vector_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        w = self.weights
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weight matrix must be square")
        if not self.vector_ids:
            self.vector_ids = tuple(range(w.shape[0]))

    @property
    def n_vertices(self) -> int:
        return self.weights.shape[0]

    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def n_edges(self) -> int:
        return int((np.triu(self.weights, k=1) > 0).sum())

    def sparsity(self) -> float:
        """Fraction of zero off-diagonal pairs."""
        n = self.n_vertices
        if n < 2:
            return 1.0
        return 1.0 - 2.0 * self.n_edges() / (n * (n - 1))

    def edges(self):
        ii, jj = np.nonzero(np.triu(self.weights, k=1))
        for i, j in zip(ii.tolist(), jj.tolist()):
            yield i, j, float(self.weights[i, j])

    def dump(self, stream: IO[str]) -> None:
        stream.write(f"{self.n_vertices}\n")
        for i, j, w in self.edges():
            stream.write(f"{i} {j} {w:.12g}\n")


def load_graph(path) -> SimilarityGraph:
    with open(path, "r", encoding="utf-8") as fh:
        n = int(fh.readline())
        w = np.zeros((n, n))
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            i, j, val = int(parts[0]), int(parts[1]), float(parts[2])
            w[i, j] = w[j, i] = val
    return SimilarityGraph(w)


def pairwise_weights(entries: np.ndarray, params: SimilarityParams,
                     time_cutoff: float | None = None,
                     backend: str | None = None) -> np.ndarray:
    """Dense symmetric weight matrix for rows of ``entries``.

    ``time_cutoff`` zeroes pairs whose finite-observation windows are more
    than that many seconds apart. For the hard metric the effective cutoff
    is max(tolerance, time_cutoff), which cannot change the result (two
    journeys with window gap g disagree by at least g at every shared
    station); for the soft metric it truncates weights below
    l0 * exp(-cutoff^2 / bandwidth_sq).
    """
    entries = np.ascontiguousarray(entries, dtype=np.float64)
    if entries.ndim != 2:
        raise ValueError("entries must be a 2-D array")
    metric = HARD if params.metric == "hard" else SOFT
    scale = params.tolerance_s if metric == HARD else params.bandwidth_sq_s
    if metric == HARD:
        cutoff = scale if time_cutoff is None else max(scale, float(time_cutoff))
    else:
        cutoff = math.inf if time_cutoff is None else float(time_cutoff)

    finite = np.isfinite(entries)
    tmin = np.where(finite, entries, np.inf).min(axis=1, initial=np.inf)
    tmax = np.where(finite, entries, -np.inf).max(axis=1, initial=-np.inf)

    backend = backend or ACTIVE_BACKEND
    if backend == "numba":
        order = np.argsort(tmin, kind="stable")
        wp = _kernels.pairwise_weights_loop(
            entries[order], tmin[order], tmax[order], metric, float(scale), float(cutoff)
        )
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        return wp[np.ix_(inv, inv)]
    if backend == "numpy":
        return pairwise_weights_block(entries, tmin, tmax, metric, float(scale), float(cutoff))
    raise ValueError(f"unknown backend {backend!r}")


def build_graph(vectors: Sequence[JourneyVector] | np.ndarray,
                params: SimilarityParams,
                time_cutoff: float | None = None,
                backend: str | None = None) -> SimilarityGraph:
    """Similarity graph over journey vectors: edge (i, j) with weight
    similarity(v_i, v_j) wherever that weight is positive."""
    if isinstance(vectors, np.ndarray):
        entries = vectors
    else:
        if not vectors:
            raise DataError("build_graph requires at least one vector")
        stations = vectors[0].stations
        for v in vectors[1:]:
            if v.stations != stations:
                raise DataError("vectors built over different station sets")
        entries = np.stack([v.entries for v in vectors])
    if entries.shape[0] < 1:
        raise DataError("build_graph requires at least one vector")
    w = pairwise_weights(entries, params, time_cutoff=time_cutoff, backend=backend)
    return SimilarityGraph(w)
