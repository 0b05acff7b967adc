"""
Nearest Neighbour Index
Exact, deterministic k-nearest-neighbour search over a fixed point set.

Backends:
- brute:  any metric, O(n) per query
- kdtree: Euclidean only, scipy cKDTree candidates re-ranked with exact distances
- line:   Euclidean in one dimension, binary-searched windows over the sorted sample

Every backend returns the same NeighborList: distances non-decreasing, equal
distances ordered by ascending dataset index.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

BACKENDS = ('auto', 'brute', 'kdtree', 'line')

# Rows whose (k+1)-th candidate is not clearly farther than the k-th are re-resolved exactly
_REL_TIE_TOL = 1e-12
_BALL_INFLATE_REL = 1e-9
_BALL_INFLATE_ABS = 1e-12

# Upper bound on query-by-neighbour cells materialised per batch
_BATCH_CELLS = 4_000_000


class IndexBuildError(ValueError):
    """Raised when a point set cannot be indexed"""


class QueryError(ValueError):
    """Raised for an invalid k or a query of the wrong shape"""


@dataclass(frozen=True)
class Metric:
    """
    Distance used by an index

    kind is 'euclidean' or 'custom'; custom metrics carry a callback
    distance(a, b) -> float over 1-D coordinate arrays and always use brute force.
    """
    kind: str = 'euclidean'
    distance: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    name: str = 'euclidean'

    def __post_init__(self):
        if self.kind not in ('euclidean', 'custom'):
            raise ValueError(f"Unknown metric kind: {self.kind}")
        if self.kind == 'custom' and not callable(self.distance):
            raise ValueError("custom metric requires a distance callback")

    @classmethod
    def euclidean(cls) -> 'Metric':
        return cls()

    @classmethod
    def custom(cls, distance: Callable[[np.ndarray, np.ndarray], float], name: str = 'custom') -> 'Metric':
        return cls(kind='custom', distance=distance, name=name)

    @property
    def is_euclidean(self) -> bool:
        return self.kind == 'euclidean'


EUCLIDEAN = Metric.euclidean()


class NeighborList:
    """k nearest dataset indices with their distances, nearest first"""

    __slots__ = ('indices', 'distances')

    def __init__(self, indices: np.ndarray, distances: np.ndarray):
        self.indices = np.asarray(indices, dtype=np.int64)
        self.distances = np.asarray(distances, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.indices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NeighborList):
            return NotImplemented
        return (np.array_equal(self.indices, other.indices)
                and np.array_equal(self.distances, other.distances))

    def __repr__(self) -> str:
        return f"NeighborList(indices={self.indices.tolist()}, distances={self.distances.tolist()})"

    def prefix(self, k: int) -> 'NeighborList':
        return NeighborList(self.indices[:k], self.distances[:k])


@dataclass(frozen=True, eq=False)
class Index:
    """
    Immutable queryable index

    points is a read-only (n, d) float64 copy of the input. tree is set for the
    kdtree backend; order and sorted_coords for the line backend.
    """
    points: np.ndarray
    metric: Metric
    backend: str
    tree: Optional[cKDTree] = None
    order: Optional[np.ndarray] = None
    sorted_coords: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


# ============================================================================
# DISTANCES
# ============================================================================

def euclidean_distances(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """
    Euclidean distances from every row of points to one query

    Squares are accumulated one coordinate at a time so a distance depends only on
    its own pair of points, never on which other rows are in the batch.
    """
    squared = np.zeros(points.shape[0], dtype=np.float64)
    for axis in range(points.shape[1]):
        diff = points[:, axis] - query[axis]
        squared += diff * diff
    return np.sqrt(squared)


def _gathered_euclidean(points: np.ndarray, queries: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Exact distances for an (m, c) candidate matrix, same arithmetic as euclidean_distances"""
    squared = np.zeros(candidates.shape, dtype=np.float64)
    for axis in range(points.shape[1]):
        diff = points[candidates, axis] - queries[:, axis][:, None]
        squared += diff * diff
    return np.sqrt(squared)


def _distances_to(index: Index, query: np.ndarray, candidates: Optional[np.ndarray] = None) -> np.ndarray:
    points = index.points if candidates is None else index.points[candidates]
    if index.metric.is_euclidean:
        return euclidean_distances(points, query)

    distances = np.fromiter(
        (index.metric.distance(point, query) for point in points),
        dtype=np.float64,
        count=points.shape[0]
    )
    if not np.all(np.isfinite(distances)) or np.any(distances < 0):
        raise QueryError(f"metric '{index.metric.name}' returned a negative or non-finite distance")
    return distances


def validate_metric(metric: Metric, points: np.ndarray, num_pairs: int = 32,
                    seed: int = 0, atol: float = 1e-12) -> None:
    """
    Spot-check a custom metric on sampled pairs

    Checks non-negativity, identity d(a,a)=0 and symmetry d(a,b)=d(b,a).
    A passing check is evidence, not proof.

    Raises:
        IndexBuildError: On the first violating pair
    """
    if metric.is_euclidean:
        return

    points = np.asarray(points, dtype=np.float64)
    rng = np.random.default_rng(seed)
    first = rng.integers(0, points.shape[0], size=num_pairs)
    second = rng.integers(0, points.shape[0], size=num_pairs)

    for i, j in zip(first, second):
        a, b = points[i], points[j]
        d_ab = float(metric.distance(a, b))
        d_ba = float(metric.distance(b, a))
        d_aa = float(metric.distance(a, a))

        if not (np.isfinite(d_ab) and np.isfinite(d_ba)) or d_ab < 0 or d_ba < 0:
            raise IndexBuildError(f"metric '{metric.name}' is not non-negative on pair ({i}, {j})")
        if abs(d_aa) > atol:
            raise IndexBuildError(f"metric '{metric.name}' gives d(a,a)={d_aa} at point {i}")
        if abs(d_ab - d_ba) > atol * (1.0 + abs(d_ab)):
            raise IndexBuildError(f"metric '{metric.name}' is not symmetric on pair ({i}, {j})")


# ============================================================================
# BUILD
# ============================================================================

def _as_point_matrix(points) -> np.ndarray:
    try:
        matrix = np.array(points, dtype=np.float64)
    except (ValueError, TypeError) as e:
        raise IndexBuildError(f"points must share one dimension: {e}")

    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    if matrix.ndim != 2:
        raise IndexBuildError(f"points must be a list of coordinate vectors, got shape {matrix.shape}")
    if matrix.shape[0] == 0:
        raise IndexBuildError("cannot index an empty point set")
    if matrix.shape[1] == 0:
        raise IndexBuildError("points must have dimension >= 1")
    if not np.all(np.isfinite(matrix)):
        raise IndexBuildError("points contain NaN or infinite coordinates")
    return matrix


def build_index(points, metric: Metric = EUCLIDEAN, backend: str = 'auto') -> Index:
    """
    Build an immutable k-NN index

    Args:
        points: (n, d) array-like; a flat sequence is read as n one-dimensional points
        metric: EUCLIDEAN or Metric.custom(...)
        backend: 'auto', 'brute', 'kdtree' or 'line'

    Returns:
        Index

    Raises:
        IndexBuildError: Empty set, ragged dimensions, non-finite coordinates,
            accelerated backend requested for a custom metric
    """
    if backend not in BACKENDS:
        raise IndexBuildError(f"Unknown backend '{backend}', expected one of {BACKENDS}")

    matrix = _as_point_matrix(points)
    matrix.setflags(write=False)
    n, dim = matrix.shape

    if backend == 'auto':
        if not metric.is_euclidean:
            backend = 'brute'
        elif dim == 1:
            backend = 'line'
        else:
            backend = 'kdtree'

    if not metric.is_euclidean and backend != 'brute':
        raise IndexBuildError(f"backend '{backend}' supports the euclidean metric only")
    if backend == 'line' and dim != 1:
        raise IndexBuildError(f"line backend needs one-dimensional points, got dimension {dim}")

    if not metric.is_euclidean:
        validate_metric(metric, matrix)

    tree = None
    order = None
    sorted_coords = None

    if backend == 'kdtree':
        tree = cKDTree(matrix)
    elif backend == 'line':
        coords = matrix[:, 0]
        order = np.lexsort((np.arange(n), coords))
        sorted_coords = coords[order]
        order.setflags(write=False)
        sorted_coords.setflags(write=False)

    logger.debug(f"Built {backend} index over {n} points in dimension {dim}")
    return Index(points=matrix, metric=metric, backend=backend,
                 tree=tree, order=order, sorted_coords=sorted_coords)


# ============================================================================
# QUERY HELPERS
# ============================================================================

def check_k(k: int, n: int) -> int:
    """Validate 1 <= k <= n and return k as int"""
    if isinstance(k, bool) or int(k) != k:
        raise QueryError(f"k must be an integer, got {k!r}")
    k = int(k)
    if k < 1 or k > n:
        raise QueryError(f"k={k} out of range [1, {n}]")
    return k


def _as_query(index: Index, query) -> np.ndarray:
    vector = np.asarray(query, dtype=np.float64).reshape(-1)
    if vector.shape[0] != index.dim:
        raise QueryError(f"query has dimension {vector.shape[0]}, index has {index.dim}")
    if not np.all(np.isfinite(vector)):
        raise QueryError("query contains NaN or infinite coordinates")
    return vector


def _as_queries(index: Index, queries) -> np.ndarray:
    matrix = np.asarray(queries, dtype=np.float64)
    if matrix.ndim == 1:
        if index.dim != 1:
            raise QueryError("a flat query batch is only accepted by one-dimensional indexes")
        matrix = matrix.reshape(-1, 1)
    if matrix.ndim != 2 or matrix.shape[1] != index.dim:
        raise QueryError(f"queries must have shape (m, {index.dim}), got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise QueryError("queries contain NaN or infinite coordinates")
    return matrix


def _resolve_exact(index: Index, query: np.ndarray, candidates: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Rank candidates by (distance, index) with exact distances; candidates must hold the true k nearest"""
    distances = _distances_to(index, query, candidates)
    ranked = np.lexsort((candidates, distances))[:k]
    return candidates[ranked], distances[ranked]


def _sort_rows(indices: np.ndarray, distances: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    ranked = np.lexsort((indices, distances), axis=-1)
    return np.take_along_axis(indices, ranked, axis=1), np.take_along_axis(distances, ranked, axis=1)


def _rows_per_batch(k: int) -> int:
    return max(1, _BATCH_CELLS // max(k, 1))


# ============================================================================
# BACKENDS
# ============================================================================

def _brute_many(index: Index, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    everything = np.arange(index.n)
    out_indices = np.empty((queries.shape[0], k), dtype=np.int64)
    out_distances = np.empty((queries.shape[0], k), dtype=np.float64)

    for row, query in enumerate(queries):
        out_indices[row], out_distances[row] = _resolve_exact(index, query, everything, k)

    return out_indices, out_distances


def _kdtree_many(index: Index, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    n = index.n
    fetch = min(k + 1, n)
    m = queries.shape[0]
    out_indices = np.empty((m, k), dtype=np.int64)
    out_distances = np.empty((m, k), dtype=np.float64)
    step = _rows_per_batch(fetch)

    for start in range(0, m, step):
        block = queries[start:start + step]
        _, candidates = index.tree.query(block, k=fetch)
        candidates = np.asarray(candidates, dtype=np.int64).reshape(block.shape[0], fetch)
        exact = _gathered_euclidean(index.points, block, candidates)

        top_indices, top_distances = candidates[:, :k], exact[:, :k]
        kth = top_distances.max(axis=1)
        if fetch > k:
            clear = exact[:, k] > kth * (1.0 + _REL_TIE_TOL)
        else:
            clear = np.ones(block.shape[0], dtype=bool)

        sorted_indices, sorted_distances = _sort_rows(top_indices, top_distances)
        out_indices[start:start + block.shape[0]] = sorted_indices
        out_distances[start:start + block.shape[0]] = sorted_distances

        for row in np.flatnonzero(~clear):
            radius = kth[row] * (1.0 + _BALL_INFLATE_REL) + _BALL_INFLATE_ABS
            ball = np.array(sorted(index.tree.query_ball_point(block[row], r=radius)), dtype=np.int64)
            out_indices[start + row], out_distances[start + row] = _resolve_exact(index, block[row], ball, k)

    return out_indices, out_distances


def _line_distance(coords: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = coords - query
    return np.sqrt(0.0 + diff * diff)


def line_windows(index: Index, coords: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Window starts in sorted order for one-dimensional queries

    Args:
        index: A line-backend index
        coords: (m,) query coordinates
        k: Neighbour count (already validated)

    Returns:
        (starts, clear): the k nearest of query i are order[starts[i]:starts[i]+k]
        whenever clear[i]; rows with a distance tie at the window edge are not clear
    """
    xs = index.sorted_coords
    n = index.n
    position = np.searchsorted(xs, coords, side='left')
    lo = np.maximum(position - k, 0)
    hi = np.minimum(position, n - k)

    while True:
        active = lo < hi
        if not active.any():
            break
        mid = (lo + hi) // 2
        beyond = np.minimum(mid + k, n - 1)
        go_right = active & (_line_distance(xs[mid], coords) > _line_distance(xs[beyond], coords))
        lo = np.where(go_right, mid + 1, lo)
        hi = np.where(active & ~go_right, mid, hi)

    starts = lo
    kth = np.maximum(_line_distance(xs[starts], coords), _line_distance(xs[starts + k - 1], coords))

    left_clear = np.ones(coords.shape[0], dtype=bool)
    has_left = starts > 0
    left_clear[has_left] = _line_distance(xs[starts[has_left] - 1], coords[has_left]) > kth[has_left]

    right_clear = np.ones(coords.shape[0], dtype=bool)
    has_right = starts + k < n
    right_clear[has_right] = _line_distance(xs[starts[has_right] + k], coords[has_right]) > kth[has_right]

    return starts, left_clear & right_clear


def _line_many(index: Index, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    m = queries.shape[0]
    out_indices = np.empty((m, k), dtype=np.int64)
    out_distances = np.empty((m, k), dtype=np.float64)
    offsets = np.arange(k)
    step = _rows_per_batch(k)

    for start in range(0, m, step):
        coords = queries[start:start + step, 0]
        starts, clear = line_windows(index, coords, k)

        window = index.order[starts[:, None] + offsets[None, :]]
        distances = _line_distance(index.points[window, 0], coords[:, None])
        sorted_indices, sorted_distances = _sort_rows(window, distances)
        out_indices[start:start + coords.shape[0]] = sorted_indices
        out_distances[start:start + coords.shape[0]] = sorted_distances

        for row in np.flatnonzero(~clear):
            query = queries[start + row]
            kth = distances[row].max()
            radius = kth * (1.0 + _BALL_INFLATE_REL) + _BALL_INFLATE_ABS
            left = np.searchsorted(index.sorted_coords, query[0] - radius, side='left')
            right = np.searchsorted(index.sorted_coords, query[0] + radius, side='right')
            candidates = np.sort(index.order[left:right])
            out_indices[start + row], out_distances[start + row] = _resolve_exact(index, query, candidates, k)

    return out_indices, out_distances


_DISPATCH = {
    'brute': _brute_many,
    'kdtree': _kdtree_many,
    'line': _line_many,
}


# ============================================================================
# PUBLIC QUERIES
# ============================================================================

def knn_query_many(index: Index, queries, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    k nearest neighbours for a batch of queries

    Returns:
        (indices, distances), both of shape (m, k), rows ordered as NeighborList
    """
    k = check_k(k, index.n)
    matrix = _as_queries(index, queries)
    if matrix.shape[0] == 0:
        return np.empty((0, k), dtype=np.int64), np.empty((0, k), dtype=np.float64)
    return _DISPATCH[index.backend](index, matrix, k)


def knn_query(index: Index, query, k: int) -> NeighborList:
    """
    k nearest neighbours of one query

    Raises:
        QueryError: k outside [1, n] or dimension mismatch
    """
    k = check_k(k, index.n)
    vector = _as_query(index, query)
    indices, distances = _DISPATCH[index.backend](index, vector.reshape(1, -1), k)
    return NeighborList(indices[0], distances[0])


def kth_neighbor_distance(index: Index, query, k: int) -> float:
    """Distance from query to its k-th nearest point (the radius of the k-NN ball)"""
    return float(knn_query(index, query, k).distances[k - 1])
