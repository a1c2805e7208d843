"""Unsupervised inshore/offshore scene classification.

A cheap 68-dim statistical descriptor per image (coarse histogram plus
brightness/border statistics) feeds a two-cluster Lloyd k-means; the smaller
cluster is labeled inshore, the larger offshore. Any other feature source
(e.g. pooled backbone activations) can be clustered through the same
interface, since the clustering works on bare vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DimensionError, EmptyImageError

FEATURE_DIM = 68

INSHORE = "inshore"
OFFSHORE = "offshore"


def scene_feature(img: np.ndarray) -> np.ndarray:
    """68-dim descriptor: 64-bin histogram (4 gray levels per bin) followed by
    [mean/255, stddev/255, bright fraction (>128), border bright fraction].

    The border statistic is a land-contact proxy: coastal land usually touches
    the image edge, open water rarely carries bright border pixels.
    """
    img = np.asarray(img)
    if img.size == 0:
        raise EmptyImageError("cannot featurize an empty image")
    counts = np.bincount(img.ravel().astype(np.int64) // 4, minlength=64)
    hist = counts / img.size
    h, w = img.shape
    border = np.concatenate([
        img[0, :], img[-1, :], img[1:-1, 0], img[1:-1, -1],
    ]) if h > 1 else img.ravel()
    feats = np.array([
        img.mean() / 255.0,
        img.std() / 255.0,
        np.count_nonzero(img > 128) / img.size,
        np.count_nonzero(border > 128) / border.size,
    ])
    return np.concatenate([hist, feats])


def distance(v: np.ndarray, c: np.ndarray) -> float:
    """Euclidean distance between a feature vector and a centroid."""
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if v.shape != c.shape:
        raise DimensionError(f"dimension mismatch: {v.shape} vs {c.shape}")
    return float(np.sqrt(np.sum((v - c) ** 2)))


@dataclass
class KMeansModel:
    centroids: np.ndarray  # (2, D)
    assignments: np.ndarray  # (N,) values in {1, 2}
    iterations_run: int
    converged: bool
    wcss_per_iter: list[float] = field(default_factory=list)


def _pick_initial(X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Two distinct input rows, uniformly without replacement under the seed."""
    n = len(X)
    for _ in range(64):
        i, j = rng.choice(n, size=2, replace=False)
        if not np.array_equal(X[i], X[j]):
            return np.stack([X[i], X[j]])
    # extremely duplicate-heavy input: fall back to the first distinct pair
    for j in range(1, n):
        if not np.array_equal(X[0], X[j]):
            return np.stack([X[0], X[j]])
    raise DegenerateInputError("all feature vectors are identical")


def kmeans2(features, seed: int = 0, max_iters: int = 100, epsilon: float = 1e-6,
            init: np.ndarray | None = None) -> KMeansModel:
    """Lloyd's algorithm with k=2.

    Initial centroids are two distinct items sampled under `seed` (or the
    explicit `init` pair, shape (2, D)). Items tie-break to the lower centroid
    index; convergence is both centroids moving less than `epsilon`. An
    emptied cluster is reseeded with the item farthest from the survivor.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise DegenerateInputError("need at least two feature vectors")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if len(np.unique(X, axis=0)) < 2:
        raise DegenerateInputError("need at least two distinct feature vectors")

    if init is not None:
        centroids = np.asarray(init, dtype=np.float64).copy()
        if centroids.shape != (2, X.shape[1]):
            raise DimensionError(f"init must have shape (2, {X.shape[1]})")
    else:
        centroids = _pick_initial(X, np.random.default_rng(seed))

    assignments = np.ones(len(X), dtype=np.int64)
    wcss_per_iter: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        d = np.linalg.norm(X[:, None, :] - centroids[None, :, :], axis=2)
        assignments = np.where(d[:, 1] < d[:, 0], 2, 1)
        wcss_per_iter.append(float(np.sum(np.min(d, axis=1) ** 2)))

        new_centroids = centroids.copy()
        empty = []
        for ci in (1, 2):
            members = X[assignments == ci]
            if len(members):
                new_centroids[ci - 1] = members.mean(axis=0)
            else:
                empty.append(ci)
        reseeded = bool(empty)
        for ci in empty:
            survivor = new_centroids[2 - ci]
            far = int(np.argmax(np.linalg.norm(X - survivor, axis=1)))
            new_centroids[ci - 1] = X[far]
        moved = np.linalg.norm(new_centroids - centroids, axis=1)
        centroids = new_centroids
        if not reseeded and (moved < epsilon).all():
            converged = True
            break

    # final assignment under the converged centroids
    d = np.linalg.norm(X[:, None, :] - centroids[None, :, :], axis=2)
    assignments = np.where(d[:, 1] < d[:, 0], 2, 1)
    return KMeansModel(centroids, assignments, iterations, converged, wcss_per_iter)


def label_scenes(model: KMeansModel) -> list[str]:
    """Smaller cluster -> inshore, larger -> offshore.

    An exact size tie goes to the cluster whose centroid has the larger last
    component; with scene_feature vectors that component is the border-bright
    fraction, a proxy for coastal land touching the frame.
    """
    sizes = [int(np.sum(model.assignments == ci)) for ci in (1, 2)]
    if sizes[0] < sizes[1]:
        inshore_cluster = 1
    elif sizes[1] < sizes[0]:
        inshore_cluster = 2
    else:
        inshore_cluster = 1 if model.centroids[0][-1] > model.centroids[1][-1] else 2
    return [INSHORE if a == inshore_cluster else OFFSHORE for a in model.assignments]


def classify_images(images, seed: int = 0) -> list[str]:
    """Feature-extract, cluster, and label a batch of images in one pass."""
    feats = [scene_feature(img) for img in images]
    return label_scenes(kmeans2(feats, seed=seed))
