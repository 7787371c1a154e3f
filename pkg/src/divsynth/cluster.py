"""k-means++/Lloyd clustering of the 2D layout and medoid selection of
the diverse exemplars, plus the random-sampling control."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import DataError
from .seeding import rng


@dataclass
class Clustering:
    k: int
    assignments: np.ndarray  # (n,) int64
    centroids: np.ndarray    # (k, 2) float64
    inertia: float
    iterations_run: int


@dataclass
class RepresentativeSet:
    # entries: (cluster index, note id, (x, y)) triples, one per cluster
    entries: list[tuple[int, str, tuple[float, float]]]

    def ids(self) -> list[str]:
        return [note_id for _, note_id, _ in self.entries]


def kmeans_pp_init(points, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding: first centroid uniform, subsequent ones sampled
    proportionally to squared distance from the nearest chosen centroid."""
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if k > n:
        raise DataError(f"k={k} exceeds number of points n={n}")
    gen = rng(seed, "kmeans++")
    centroids = np.empty((k, x.shape[1]), dtype=np.float64)
    centroids[0] = x[gen.integers(n)]
    if k == 1:
        return centroids
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = gen.choice(n, p=d2 / total)
        else:
            idx = gen.integers(n)
        centroids[c] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centroids[c]) ** 2, axis=1))
    return centroids


def _assign(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(centroids * centroids, axis=1)[None, :]
        - 2.0 * (x @ centroids.T)
    )
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(x.shape[0]), labels]


def lloyd(points, init_centroids, tol: float = 1e-6, max_iter: int = 300) -> Clustering:
    """Alternate assignment/update until centroids move less than tol.

    Empty clusters are re-seeded with the point currently farthest from
    its assigned centroid, so every final cluster is nonempty.  The
    inertia sequence is checked to be non-increasing.
    """
    x = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(init_centroids, dtype=np.float64).copy()
    k = centroids.shape[0]
    previous_inertia = np.inf
    labels, dist2 = _assign(x, centroids)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        labels, dist2 = _reseed_empty(x, centroids, labels, dist2, k)
        inertia = float(dist2.sum())
        if inertia > previous_inertia + 1e-9:
            raise AssertionError(
                f"inertia increased: {previous_inertia} -> {inertia}"
            )
        previous_inertia = inertia

        new_centroids = centroids.copy()
        for c in range(k):
            members = labels == c
            new_centroids[c] = x[members].mean(axis=0)
        movement = float(np.sqrt(np.sum((new_centroids - centroids) ** 2, axis=1)).max())
        centroids = new_centroids
        labels, dist2 = _assign(x, centroids)
        if movement < tol:
            break
    labels, dist2 = _reseed_empty(x, centroids, labels, dist2, k)
    return Clustering(
        k=k,
        assignments=labels.astype(np.int64),
        centroids=centroids,
        inertia=float(dist2.sum()),
        iterations_run=iterations,
    )


def _reseed_empty(x, centroids, labels, dist2, k):
    """Give each empty cluster the worst-fit point as its sole member."""
    for c in range(k):
        if np.any(labels == c):
            continue
        farthest = int(np.argmax(dist2))
        labels = labels.copy()
        dist2 = dist2.copy()
        labels[farthest] = c
        dist2[farthest] = 0.0
        centroids[c] = x[farthest]
    return labels, dist2


def kmeans(points, k: int, seed: int, tol: float = 1e-6,
           max_iter: int = 300) -> Clustering:
    return lloyd(points, kmeans_pp_init(points, k, seed), tol=tol,
                 max_iter=max_iter)


def select_representatives(clustering: Clustering, points, notes) -> RepresentativeSet:
    """Medoid per cluster: the member nearest its centroid (ties toward
    the lower index).  `notes` supplies ids, index-aligned with points."""
    x = np.asarray(points, dtype=np.float64)
    ids = [n.id if hasattr(n, "id") else str(n) for n in notes]
    if len(ids) != x.shape[0]:
        raise DataError("points and notes must be index-aligned")
    entries = []
    for c in range(clustering.k):
        members = np.nonzero(clustering.assignments == c)[0]
        d2 = np.sum((x[members] - clustering.centroids[c]) ** 2, axis=1)
        chosen = int(members[int(np.argmin(d2))])
        entries.append((c, ids[chosen], (float(x[chosen, 0]), float(x[chosen, 1]))))
    return RepresentativeSet(entries=entries)


def random_sample_control(notes, n: int = 50, seed: int = 0,
                          points=None) -> RepresentativeSet:
    """Uniform sample of n notes, shaped like a RepresentativeSet."""
    ids = [note.id if hasattr(note, "id") else str(note) for note in notes]
    if n > len(ids):
        raise DataError(f"cannot sample {n} notes from {len(ids)}")
    gen = rng(seed, "random-control")
    chosen = sorted(gen.choice(len(ids), size=n, replace=False).tolist())
    coords = (np.asarray(points, dtype=np.float64) if points is not None
              else np.zeros((len(ids), 2)))
    entries = [
        (slot, ids[i], (float(coords[i, 0]), float(coords[i, 1])))
        for slot, i in enumerate(chosen)
    ]
    return RepresentativeSet(entries=entries)


def save_representatives(reps: RepresentativeSet, path) -> None:
    jsonio.write_jsonl(
        path,
        (
            {"cluster": c, "id": note_id, "x": xy[0], "y": xy[1]}
            for c, note_id, xy in reps.entries
        ),
    )


def load_representatives(path) -> RepresentativeSet:
    entries = []
    for _, rec in jsonio.read_jsonl(path):
        entries.append(
            (int(rec["cluster"]), str(rec["id"]),
             (float(rec["x"]), float(rec["y"])))
        )
    return RepresentativeSet(entries=entries)
