"""Dimensionality reduction to 2D: a from-scratch UMAP implementation
(exact kNN graph, smooth-kNN calibration, fuzzy union, SGD layout) and a
deterministic PCA fallback, plus a trustworthiness metric for tests."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import curve_fit

from .errors import DataError
from . import jsonio
from .seeding import rng

_SIGMA_LO_SCALE = 1e-3
_SIGMA_HI_SCALE = 1e3
_COORD_CLIP = 10.0
_GRAD_CLIP = 4.0


@dataclass
class KnnGraph:
    k: int
    neighbors: np.ndarray  # (n, k) int64, sorted by ascending distance
    distances: np.ndarray  # (n, k) float64


@dataclass
class FuzzyGraph:
    """Symmetric weighted graph; each undirected edge stored once (i < j)."""

    n_points: int
    edges: np.ndarray   # (m, 2) int64 with edges[:, 0] < edges[:, 1]
    weights: np.ndarray  # (m,) float64 in (0, 1]

    def weight(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        mask = (self.edges[:, 0] == i) & (self.edges[:, 1] == j)
        idx = np.nonzero(mask)[0]
        return float(self.weights[idx[0]]) if idx.size else 0.0


@dataclass
class UmapParams:
    n_neighbors: int = 15
    min_dist: float = 0.1
    spread: float = 1.0
    n_epochs: int = 200
    a: float | None = None
    b: float | None = None
    negative_sample_rate: int = 5
    learning_rate: float = 1.0
    seed: int = 0


@dataclass
class Layout:
    coordinates: np.ndarray  # (n, 2) float64

    def __post_init__(self):
        self.coordinates = np.asarray(self.coordinates, dtype=np.float64)
        if not np.all(np.isfinite(self.coordinates)):
            raise DataError("layout contains non-finite coordinates")


def knn_exact(vectors, k: int) -> KnnGraph:
    """Brute-force k nearest neighbors under Euclidean distance.

    Ties are broken toward the lower index; a point is never its own
    neighbor.
    """
    x = _as_float_matrix(vectors)
    n = x.shape[0]
    if k >= n:
        raise DataError(f"k={k} must be < n={n}")
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    dists = np.sqrt(np.take_along_axis(d2, order, axis=1))
    return KnnGraph(k=k, neighbors=order.astype(np.int64), distances=dists)


def smooth_knn(distances_row, k: int) -> tuple[float, float]:
    """Per-point calibration (rho, sigma) for the fuzzy membership kernel.

    rho is the smallest positive distance; sigma solves
    sum_j exp(-max(0, d_j - rho) / sigma) = log2(k) by 64-iteration
    binary search, clamped to [1e-3, 1e3] times the row mean when the
    target is unreachable.
    """
    d = np.asarray(distances_row, dtype=np.float64)
    if k < 2 or d.shape[0] != k:
        raise DataError("smooth_knn needs a row of k >= 2 ascending distances")
    positive = d[d > 0.0]
    rho = float(positive[0]) if positive.size else 0.0
    target = math.log2(k)
    mean_d = float(np.mean(d)) if np.mean(d) > 0 else 1.0

    lo, hi, mid = 0.0, np.inf, 1.0
    for _ in range(64):
        psum = float(np.sum(np.exp(-np.maximum(0.0, d - rho) / mid)))
        if psum >= target:
            hi = mid
            mid = (lo + hi) / 2.0
        else:
            lo = mid
            mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
    sigma = min(max(mid, _SIGMA_LO_SCALE * mean_d), _SIGMA_HI_SCALE * mean_d)
    return float(rho), float(sigma)


def fuzzy_union(w_ij: float, w_ji: float) -> float:
    """Probabilistic t-conorm used to symmetrize directed memberships."""
    return w_ij + w_ji - w_ij * w_ji


def fit_ab(min_dist: float, spread: float) -> tuple[float, float]:
    """Least-squares fit of 1/(1 + a*d^(2b)) to the target membership
    curve: 1 below min_dist, exponential decay with the given spread
    beyond it."""
    if not (0 < min_dist < spread * 10):
        raise DataError(f"require 0 < min_dist < 10*spread, got {min_dist}, {spread}")

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    try:
        (a, b), _ = curve_fit(curve, xv, yv, p0=(1.0, 1.0), maxfev=5000)
    except RuntimeError as exc:
        raise DataError(f"fit_ab did not converge: {exc}") from exc
    rms = float(np.sqrt(np.mean((curve(xv, a, b) - yv) ** 2)))
    # the attainable optimum approaches 0.021 as min_dist/spread grows, so
    # only a clearly worse residual indicates non-convergence
    if rms >= 0.05:
        raise DataError(f"fit_ab residual RMS {rms:.4f} indicates non-convergence")
    return float(a), float(b)


def build_fuzzy_graph(knn: KnnGraph) -> FuzzyGraph:
    """Directed memberships exp(-max(0, d - rho_i)/sigma_i) symmetrized
    with fuzzy_union; symmetry is exact by construction."""
    n, k = knn.neighbors.shape
    directed: dict[tuple[int, int], float] = {}
    for i in range(n):
        rho, sigma = smooth_knn(knn.distances[i], k)
        w = np.exp(-np.maximum(0.0, knn.distances[i] - rho) / sigma)
        for j, w_ij in zip(knn.neighbors[i], w):
            directed[(i, int(j))] = float(w_ij)

    merged: dict[tuple[int, int], float] = {}
    for (i, j), w_ij in directed.items():
        key = (i, j) if i < j else (j, i)
        if key in merged:
            continue
        w_ji = directed.get((j, i), 0.0)
        if i > j:
            w_ij, w_ji = w_ji, w_ij
        merged[key] = fuzzy_union(w_ij, w_ji)

    keys = sorted(k_ for k_ in merged if merged[k_] > 0.0)
    edges = np.array(keys, dtype=np.int64).reshape(-1, 2)
    weights = np.array([merged[k_] for k_ in keys], dtype=np.float64)
    return FuzzyGraph(n_points=n, edges=edges, weights=weights)


@njit(cache=True)
def _tau_rand(state):
    state[0] = (((state[0] & 4294967294) << 12) & 0xFFFFFFFF) ^ (
        (((state[0] << 13) & 0xFFFFFFFF) ^ state[0]) >> 19
    )
    state[1] = (((state[1] & 4294967288) << 4) & 0xFFFFFFFF) ^ (
        (((state[1] << 2) & 0xFFFFFFFF) ^ state[1]) >> 25
    )
    state[2] = (((state[2] & 4294967280) << 17) & 0xFFFFFFFF) ^ (
        (((state[2] << 3) & 0xFFFFFFFF) ^ state[2]) >> 11
    )
    return state[0] ^ state[1] ^ state[2]


@njit(cache=True)
def _clip(val, bound):
    if val > bound:
        return bound
    if val < -bound:
        return -bound
    return val


@njit(cache=True)
def _sgd_epochs(coords, heads, tails, epochs_per_sample, a, b, n_epochs,
                negative_sample_rate, learning_rate, rng_state):
    """Single-threaded layout optimization; returns (epoch, point) of the
    first non-finite coordinate, or (-1, -1) when the layout is clean."""
    n = coords.shape[0]
    m = heads.shape[0]
    epoch_of_next_sample = epochs_per_sample.copy()
    epochs_per_negative = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative = epochs_per_negative.copy()

    for epoch in range(n_epochs):
        alpha = learning_rate * (1.0 - epoch / n_epochs)
        for e in range(m):
            if epoch_of_next_sample[e] > epoch:
                continue
            i = heads[e]
            j = tails[e]
            dx = coords[i, 0] - coords[j, 0]
            dy = coords[i, 1] - coords[j, 1]
            dsq = dx * dx + dy * dy
            if dsq > 0.0:
                coeff = (-2.0 * a * b * dsq ** (b - 1.0)) / (a * dsq ** b + 1.0)
                gx = _clip(coeff * dx, _GRAD_CLIP)
                gy = _clip(coeff * dy, _GRAD_CLIP)
                coords[i, 0] = _clip(coords[i, 0] + gx * alpha, _COORD_CLIP)
                coords[i, 1] = _clip(coords[i, 1] + gy * alpha, _COORD_CLIP)
                coords[j, 0] = _clip(coords[j, 0] - gx * alpha, _COORD_CLIP)
                coords[j, 1] = _clip(coords[j, 1] - gy * alpha, _COORD_CLIP)
            epoch_of_next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - epoch_of_next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                t = _tau_rand(rng_state) % n
                if t == i:
                    continue
                dx = coords[i, 0] - coords[t, 0]
                dy = coords[i, 1] - coords[t, 1]
                dsq = dx * dx + dy * dy
                if dsq > 0.0:
                    coeff = (2.0 * b) / ((0.001 + dsq) * (a * dsq ** b + 1.0))
                    gx = _clip(coeff * dx, _GRAD_CLIP)
                    gy = _clip(coeff * dy, _GRAD_CLIP)
                elif t == j:
                    continue
                else:
                    gx = _GRAD_CLIP
                    gy = _GRAD_CLIP
                coords[i, 0] = _clip(coords[i, 0] + gx * alpha, _COORD_CLIP)
                coords[i, 1] = _clip(coords[i, 1] + gy * alpha, _COORD_CLIP)
            epoch_of_next_negative[e] += n_neg * epochs_per_negative[e]

        for p in range(n):
            if not (np.isfinite(coords[p, 0]) and np.isfinite(coords[p, 1])):
                return epoch, p
    return -1, -1


def optimize_layout(graph: FuzzyGraph, params: UmapParams, vectors) -> Layout:
    """SGD layout of the fuzzy graph, PCA-initialized and deterministic
    for a given seed."""
    x = _as_float_matrix(vectors)
    n = graph.n_points
    if n < 4:
        raise DataError("optimize_layout requires at least 4 points")
    if x.shape[0] != n:
        raise DataError("vectors and graph size mismatch")
    a, b = params.a, params.b
    if a is None or b is None:
        a, b = fit_ab(params.min_dist, params.spread)

    init = reduce_pca(x, 2).coordinates
    max_abs = np.abs(init).max()
    coords = (init * (_COORD_CLIP / max_abs) if max_abs > 0
              else np.zeros_like(init))
    coords = np.ascontiguousarray(coords, dtype=np.float64)

    # Directed edge arrays: each undirected edge drives updates from both ends.
    heads = np.concatenate([graph.edges[:, 0], graph.edges[:, 1]])
    tails = np.concatenate([graph.edges[:, 1], graph.edges[:, 0]])
    weights = np.concatenate([graph.weights, graph.weights])

    # Sampling schedule: edge e is visited ~ n_epochs * w_e / max(w) times.
    eps = np.full(weights.shape[0], np.inf)
    n_samples = params.n_epochs * weights / weights.max()
    nonzero = n_samples > 0
    eps[nonzero] = params.n_epochs / n_samples[nonzero]

    state = rng(params.seed, "layout").integers(16, 2**31 - 16, size=3)
    bad_epoch, bad_point = _sgd_epochs(
        coords, heads.astype(np.int64), tails.astype(np.int64), eps,
        float(a), float(b), int(params.n_epochs),
        int(params.negative_sample_rate), float(params.learning_rate),
        state.astype(np.int64),
    )
    if bad_epoch >= 0:
        raise DataError(
            f"non-finite coordinate at epoch {bad_epoch}, point {bad_point}"
        )
    return Layout(coords)


def umap_reduce(vectors, params: UmapParams) -> Layout:
    """Full pipeline: L2-normalize, exact kNN, fuzzy graph, SGD layout."""
    x = _as_float_matrix(vectors)
    norms = np.linalg.norm(x, axis=1)
    norms[norms == 0.0] = 1.0
    x = x / norms[:, None]
    k = min(params.n_neighbors, x.shape[0] - 1)
    graph = build_fuzzy_graph(knn_exact(x, k))
    return optimize_layout(graph, params, x)


def reduce_pca(vectors, out_dim: int = 2) -> Layout:
    """Mean-centered projection onto the top principal directions via
    power iteration with deflation.

    Sign convention: the largest-magnitude component of each direction
    is positive.  Rank-deficient input yields zero trailing coordinates
    and a warning.
    """
    x = _as_float_matrix(vectors).copy()
    n, d = x.shape
    if n <= out_dim:
        raise DataError(f"need more than {out_dim} points, got {n}")
    x -= x.mean(axis=0)
    start_gen = rng(0x5EED_9CA)
    coords = np.zeros((n, out_dim), dtype=np.float64)
    total_var = float(np.sum(x * x))
    for c in range(out_dim):
        v = start_gen.standard_normal(d)
        v /= np.linalg.norm(v)
        component_var = float(np.sum((x @ v) ** 2))
        if total_var <= 1e-12 * n or component_var == 0.0:
            pass  # falls through to rank check below
        for _ in range(1000):
            w = x.T @ (x @ v)
            norm = np.linalg.norm(w)
            if norm <= 1e-12:
                break
            w /= norm
            if np.linalg.norm(w - v) < 1e-13 or np.linalg.norm(w + v) < 1e-13:
                v = w
                break
            v = w
        scores = x @ v
        if float(np.sum(scores**2)) <= 1e-16 * max(total_var, 1.0):
            warnings.warn(
                f"input rank < {out_dim}; component {c} set to zero",
                stacklevel=2,
            )
            coords[:, c] = 0.0
            continue
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
            scores = -scores
        coords[:, c] = scores
        x -= np.outer(scores, v)
    return Layout(coords)


def trustworthiness(high_vectors, layout: Layout, k: int) -> float:
    """Share of low-dimensional neighbors that were also close in the
    original space; 1.0 means no false neighbors were introduced."""
    x = _as_float_matrix(high_vectors)
    y = layout.coordinates
    n = x.shape[0]
    if k >= n / 2:
        raise DataError(f"k={k} must be < n/2={n / 2}")
    rank_high = _neighbor_ranks(x)
    order_low = _neighbor_order(y)
    total = 0.0
    for i in range(n):
        low_k = set(order_low[i, :k].tolist())
        high_k = set(np.nonzero(rank_high[i] <= k)[0].tolist())
        for j in low_k - high_k:
            total += rank_high[i, j] - k
    return 1.0 - total * 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0))


def _neighbor_order(points: np.ndarray) -> np.ndarray:
    d2 = _sq_dists(points)
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")


def _neighbor_ranks(points: np.ndarray) -> np.ndarray:
    """ranks[i, j] = position (1-based) of j among i's neighbors."""
    order = _neighbor_order(points)
    n = points.shape[0]
    ranks = np.empty((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(1, n + 1)[None, :]
    return ranks


def _sq_dists(points: np.ndarray) -> np.ndarray:
    sq = np.sum(points * points, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _as_float_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=np.float64)
    rows = [v.values if hasattr(v, "values") else np.asarray(v, dtype=np.float64)
            for v in vectors]
    return np.vstack(rows)


def save_layout(ids: list[str], layout: Layout, path) -> None:
    records = [
        {"id": i, "x": float(xy[0]), "y": float(xy[1])}
        for i, xy in zip(ids, layout.coordinates)
    ]
    jsonio.write_jsonl(path, records)


def load_layout(path) -> tuple[list[str], Layout]:
    ids, coords = [], []
    for _, rec in jsonio.read_jsonl(path):
        ids.append(str(rec["id"]))
        coords.append((float(rec["x"]), float(rec["y"])))
    if not ids:
        raise DataError(f"empty layout file: {path}")
    return ids, Layout(np.asarray(coords))
