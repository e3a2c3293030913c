"""Lloyd's k-means with k-means++ seeding and multiple restarts.

Hand-rolled rather than delegated so the identification step is exactly
reproducible from an RngStream and so empty-cluster handling matches the
relabeling contract (restart, then fail loudly).
"""

from __future__ import annotations

import numpy as np

from .rng import as_generator


class KMeansError(RuntimeError):
    """All restarts produced an empty cluster."""


def _plusplus_init(x: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[gen.integers(n)]
    d2 = np.square(x - centers[0]).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = x[gen.integers(n)]
            continue
        probs = d2 / total
        centers[j] = x[gen.choice(n, p=probs)]
        d2 = np.minimum(d2, np.square(x - centers[j]).sum(axis=1))
    return centers


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, float, bool]:
    k = centers.shape[0]
    assign = np.full(x.shape[0], -1)
    for _ in range(max_iter):
        d2 = np.square(x[:, None, :] - centers[None, :, :]).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            rows = x[assign == j]
            if rows.shape[0] == 0:
                return assign, centers, np.inf, False
            centers[j] = rows.mean(axis=0)
    inertia = float(np.square(x - centers[assign]).sum())
    ok = len(np.unique(assign)) == k
    return assign, centers, inertia, ok


def kmeans(
    x: np.ndarray,
    k: int,
    rng,
    n_restarts: int = 20,
    max_iter: int = 300,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Best-of-restarts k-means; returns (assignments, centers, inertia)."""
    gen = as_generator(rng)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] < k:
        raise ValueError(f"need at least {k} points, got {x.shape[0]}")
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for _ in range(n_restarts):
        centers = _plusplus_init(x, k, gen)
        assign, centers, inertia, ok = _lloyd(x, centers.copy(), max_iter)
        if ok and (best is None or inertia < best[2]):
            best = (assign, centers, inertia)
    if best is None:
        raise KMeansError(f"k-means found no {k}-cluster solution in {n_restarts} restarts")
    return best
