"""Bag-of-visual-words: k-means codebook training and TF-IDF vectors.

Descriptors are quantized to their nearest codebook centroid (Euclidean,
ties to the lowest index); per-image term frequencies are weighted by a
smooth inverse document frequency, idf[w] = ln((1+N)/(1+df_w)) + 1, and
L2-normalized. Images with no descriptors yield empty vectors instead of
failing, so textureless inputs survive the pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

DESCRIPTOR_DIM = 128
DEFAULT_K = 1024
DEFAULT_MAX_ITER = 100


@dataclass
class Codebook:
    k: int
    centroids: np.ndarray  # (k, dim) float64
    seed: int
    inertia: float
    idf: np.ndarray | None = None  # (k,) float64, attached after corpus pass

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.k < 2:
            raise ValidationError("codebook needs k >= 2")
        if self.centroids.shape[0] != self.k:
            raise ValidationError("centroid count does not match k")
        if not np.isfinite(self.centroids).all():
            raise ValidationError("codebook centroids must be finite")

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True)
class SparseVector:
    """L2-normalized sparse TF-IDF vector over a k-word vocabulary."""

    k: int
    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint32))
    values: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.uint32)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape:
            raise ValidationError("indices/values length mismatch")
        if idx.size:
            if np.any(np.diff(idx.astype(np.int64)) <= 0):
                raise ValidationError("indices must be strictly increasing")
            if int(idx[-1]) >= self.k:
                raise ValidationError("index out of vocabulary range")
            if np.any(val <= 0):
                raise ValidationError("sparse values must be positive")
            norm = float(np.linalg.norm(val))
            if abs(norm - 1.0) > 1e-6:
                raise ValidationError(f"sparse vector norm {norm} is not 1 +/- 1e-6")

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def densify(self) -> np.ndarray:
        dense = np.zeros(self.k)
        dense[self.indices.astype(np.int64)] = self.values
        return dense


def _assign_labels(points: np.ndarray, centroids: np.ndarray, chunk: int = 8192):
    """Nearest-centroid labels and squared distances, ties to lowest index."""
    labels = np.empty(len(points), dtype=np.int64)
    dists = np.empty(len(points))
    c_sq = np.sum(centroids * centroids, axis=1)
    for start in range(0, len(points), chunk):
        block = points[start : start + chunk]
        sq = (
            np.sum(block * block, axis=1)[:, None]
            - 2.0 * (block @ centroids.T)
            + c_sq[None, :]
        )
        labels[start : start + chunk] = np.argmin(sq, axis=1)
        dists[start : start + chunk] = np.maximum(
            sq[np.arange(len(block)), labels[start : start + chunk]], 0.0
        )
    return labels, dists


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(len(points))]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining mass collapsed; fall back to uniform choice
            idx = int(rng.integers(len(points)))
        else:
            idx = int(rng.choice(len(points), p=closest / total))
        centroids[i] = points[idx]
        closest = np.minimum(closest, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def train_codebook(
    descriptor_sets,
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Codebook:
    """Lloyd's algorithm with k-means++ seeding over pooled descriptors.

    Stops when no assignment changes or after max_iter sweeps. Inertia is
    non-increasing across sweeps; an emptied cluster is re-seeded with the
    point currently farthest from its centroid, which preserves that
    property.
    """
    if k < 2:
        raise ValidationError("k must be >= 2")
    arrays = [np.asarray(d.descriptors, dtype=np.float64) for d in descriptor_sets]
    arrays = [a for a in arrays if a.size]
    points = np.concatenate(arrays, axis=0) if arrays else np.empty((0, DESCRIPTOR_DIM))
    if len(points) < k:
        raise ValidationError(f"need at least k={k} descriptors, got {len(points)}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    labels, dists = _assign_labels(points, centroids)
    inertia = float(dists.sum())
    for _ in range(max_iter):
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = points[members].mean(axis=0)
            else:
                farthest = int(np.argmax(dists))
                centroids[j] = points[farthest]
                dists[farthest] = 0.0
        new_labels, dists = _assign_labels(points, centroids)
        inertia = float(dists.sum())
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return Codebook(k=k, centroids=centroids, seed=seed, inertia=inertia)


def term_frequencies(descriptors: np.ndarray, codebook: Codebook) -> dict[int, int]:
    """Visual-word counts for one image's descriptors."""
    desc = np.asarray(descriptors, dtype=np.float64)
    if desc.size == 0:
        return {}
    labels, _ = _assign_labels(desc, codebook.centroids)
    words, counts = np.unique(labels, return_counts=True)
    return {int(w): int(c) for w, c in zip(words, counts)}


def compute_idf(vectors_tf: list[dict[int, int]], k: int) -> np.ndarray:
    """Smooth idf over per-image word counts: ln((1+N)/(1+df)) + 1."""
    if not vectors_tf:
        raise ValidationError("need at least one image to compute idf")
    n = len(vectors_tf)
    df = np.zeros(k)
    for tf in vectors_tf:
        for word, count in tf.items():
            if count > 0:
                df[word] += 1
    return np.log((1.0 + n) / (1.0 + df)) + 1.0


def vectorize(descriptors: np.ndarray, codebook: Codebook, idf: np.ndarray) -> SparseVector:
    """TF-IDF sparse vector for one image (empty when no descriptors)."""
    idf = np.asarray(idf, dtype=np.float64)
    if idf.shape != (codebook.k,):
        raise ValidationError(f"idf length {idf.shape} does not match k={codebook.k}")
    tf = term_frequencies(descriptors, codebook)
    if not tf:
        return SparseVector(k=codebook.k)
    indices = np.array(sorted(tf), dtype=np.uint32)
    values = np.array([tf[int(i)] for i in indices], dtype=np.float64)
    values = values * idf[indices.astype(np.int64)]
    norm = np.linalg.norm(values)
    return SparseVector(k=codebook.k, indices=indices, values=values / norm)


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Dot product of two normalized sparse vectors; empty pairs score 0."""
    if a.k != b.k:
        raise ValidationError(f"vocabulary mismatch: {a.k} vs {b.k}")
    if len(a) == 0 or len(b) == 0:
        return 0.0
    common, ia, ib = np.intersect1d(a.indices, b.indices, return_indices=True)
    if common.size == 0:
        return 0.0
    return float(np.dot(a.values[ia], b.values[ib]))


# -- CBK1 codebook file format -----------------------------------------------

CBK_MAGIC = b"CBK1"


def save_codebook(codebook: Codebook, path) -> None:
    """CBK1 layout: magic, u32 k, u32 dim, u64 seed, k*dim f32 centroids,
    k f32 idf (zeros when the idf pass has not run)."""
    idf = codebook.idf if codebook.idf is not None else np.zeros(codebook.k)
    with open(path, "wb") as fh:
        fh.write(CBK_MAGIC)
        fh.write(np.array([codebook.k, codebook.dim], dtype="<u4").tobytes())
        fh.write(np.array([codebook.seed], dtype="<u8").tobytes())
        fh.write(codebook.centroids.astype("<f4").tobytes())
        fh.write(np.asarray(idf, dtype="<f4").tobytes())


VEC_MAGIC = b"VEC1"


def save_vectors(ids: list[str], vectors: list[SparseVector], path) -> None:
    """VEC1 layout: magic, u32 count, u32 k, then per image a u16-length
    UTF-8 id, u32 nnz, nnz u32 indices, nnz f32 values."""
    if len(ids) != len(vectors):
        raise ValidationError("ids/vector count mismatch")
    k = vectors[0].k if vectors else 0
    with open(path, "wb") as fh:
        fh.write(VEC_MAGIC)
        fh.write(np.array([len(ids), k], dtype="<u4").tobytes())
        for image_id, vec in zip(ids, vectors):
            if vec.k != k:
                raise ValidationError("vectors come from different codebooks")
            blob = image_id.encode("utf-8")
            fh.write(np.array([len(blob)], dtype="<u2").tobytes())
            fh.write(blob)
            fh.write(np.array([len(vec)], dtype="<u4").tobytes())
            fh.write(vec.indices.astype("<u4").tobytes())
            fh.write(vec.values.astype("<f4").tobytes())


def load_vectors(path) -> tuple[list[str], list[SparseVector]]:
    raw = Path(path).read_bytes()
    if raw[:4] != VEC_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    count, k = (int(v) for v in np.frombuffer(raw, dtype="<u4", count=2, offset=4))
    offset = 12
    ids, vectors = [], []
    for _ in range(count):
        if offset + 2 > len(raw):
            raise FormatError(f"{path}: truncated payload")
        length = int(np.frombuffer(raw, dtype="<u2", count=1, offset=offset)[0])
        offset += 2
        ids.append(raw[offset : offset + length].decode("utf-8"))
        offset += length
        nnz = int(np.frombuffer(raw, dtype="<u4", count=1, offset=offset)[0])
        offset += 4
        indices = np.frombuffer(raw, dtype="<u4", count=nnz, offset=offset)
        offset += 4 * nnz
        values = np.frombuffer(raw, dtype="<f4", count=nnz, offset=offset)
        offset += 4 * nnz
        if not np.isfinite(values).all():
            raise FormatError(f"{path}: non-finite vector values")
        vectors.append(
            SparseVector(k=k, indices=indices.copy(), values=values.astype(np.float64))
        )
    return ids, vectors


def load_codebook(path) -> Codebook:
    raw = Path(path).read_bytes()
    if raw[:4] != CBK_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    k, dim = (int(v) for v in np.frombuffer(raw, dtype="<u4", count=2, offset=4))
    seed = int(np.frombuffer(raw, dtype="<u8", count=1, offset=12)[0])
    floats = np.frombuffer(raw, dtype="<f4", offset=20)
    if floats.size != k * dim + k:
        raise FormatError(f"{path}: truncated payload ({floats.size} floats)")
    if not np.isfinite(floats).all():
        raise FormatError(f"{path}: non-finite payload")
    centroids = floats[: k * dim].reshape(k, dim).astype(np.float64)
    idf = floats[k * dim :].astype(np.float64)
    return Codebook(k=k, centroids=centroids, seed=seed, inertia=math.nan, idf=idf)
