"""Identity clustering: Ward agglomeration over unit-normalized embeddings.

"Ward for the dot product" is realized as Ward's minimum-variance criterion
on squared Euclidean distances between L2-normalized rows (for unit vectors
||a-b||^2 = 2 - 2 a.b, so dot-product structure carries over monotonically).
The production path maintains the pairwise distance matrix with the
Lance-Williams recurrence; a naive O(N^3) implementation that recomputes
centroid-to-centroid merge costs from scratch ships alongside as the
cross-validation oracle for small inputs.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import FormatError, ValidationError
from .gateway import EmbeddingMatrix

DEFAULT_N_CLUSTERS = 24
SUPPORTED_ATTRIBUTES = ("gender", "ethnicity", "joint")


@dataclass
class ClusterModel:
    n_clusters: int
    merge_tree: np.ndarray  # (N-1, 3): left node, right node, height
    assignments: dict[str, int]  # image_id -> cluster index
    centroids: np.ndarray  # (n_clusters, dim) float64 unit rows
    source_corpus_hash: str

    def __post_init__(self):
        self.merge_tree = np.asarray(self.merge_tree, dtype=np.float64).reshape(-1, 3)
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.shape[0] != self.n_clusters:
            raise ValidationError("centroid count does not match n_clusters")
        sizes = np.bincount(
            np.fromiter(self.assignments.values(), dtype=np.int64),
            minlength=self.n_clusters,
        )
        if (sizes < 1).any():
            raise ValidationError("every cluster must keep at least one member")

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def members(self, cluster: int) -> list[str]:
        return [i for i, c in self.assignments.items() if c == cluster]


@dataclass
class RegionSummary:
    cluster: int
    share: float  # fraction of the evaluated dataset assigned here
    top_gender: list[tuple[str, float]]  # (phrase, pct of identity members)
    top_ethnicity: list[tuple[str, float]]


def corpus_fingerprint(ids: list[str]) -> str:
    return hashlib.sha256("\n".join(ids).encode("utf-8")).hexdigest()


def _check_embeddings(embeddings: EmbeddingMatrix) -> np.ndarray:
    rows = np.asarray(embeddings.rows, dtype=np.float64)
    if not np.isfinite(rows).all():
        raise ValidationError("embedding rows contain NaN/Inf")
    norms = np.linalg.norm(rows, axis=1)
    if (norms == 0).any():
        raise ValidationError("embedding rows must be non-zero")
    return rows / norms[:, None]


def _merge_heights_tree(points: np.ndarray):
    """Full Ward merge sequence via Lance-Williams on the distance matrix.

    Returns (N-1, 3) rows of (left node, right node, height) with scipy-style
    node ids (leaf i = i, merge t creates id N+t) and height = sqrt of the
    maintained Ward distance 2|A||B|/(|A|+|B|) * ||cA - cB||^2.
    """
    n = len(points)
    gram = points @ points.T
    d2 = np.maximum(2.0 - 2.0 * gram, 0.0)
    np.fill_diagonal(d2, np.inf)
    sizes = np.ones(n)
    node_id = np.arange(n)
    active = np.ones(n, dtype=bool)
    nn_val = d2.min(axis=1)
    nn_idx = d2.argmin(axis=1)
    tree = np.empty((n - 1, 3))
    for step in range(n - 1):
        masked = np.where(active, nn_val, np.inf)
        i = int(np.argmin(masked))
        j = int(nn_idx[i])
        if d2[i, j] > nn_val[i]:  # stale cache entry
            row = np.where(active, d2[i], np.inf)
            row[i] = np.inf
            j = int(np.argmin(row))
        a, b = (i, j) if i < j else (j, i)
        height = np.sqrt(d2[a, b])
        left, right = sorted((node_id[a], node_id[b]))
        tree[step] = (left, right, height)

        si, sj, dij = sizes[a], sizes[b], d2[a, b]
        total = si + sj + sizes
        new_row = ((si + sizes) * d2[a] + (sj + sizes) * d2[b] - sizes * dij) / total
        new_row[a] = np.inf
        new_row[b] = np.inf
        d2[a] = new_row
        d2[:, a] = new_row
        d2[b] = np.inf
        d2[:, b] = np.inf
        active[b] = False
        sizes[a] = si + sj
        node_id[a] = n + step

        if step == n - 2:
            break
        refresh = active & ((nn_idx == a) | (nn_idx == b))
        refresh[a] = True
        better = active & ~refresh & (new_row < nn_val)
        nn_val[better] = new_row[better]
        nn_idx[better] = a
        for m in np.nonzero(refresh)[0]:
            row = np.where(active, d2[m], np.inf)
            row[m] = np.inf
            nn_idx[m] = int(np.argmin(row))
            nn_val[m] = row[nn_idx[m]]
    return tree


def _naive_merge_tree(points: np.ndarray):
    """O(N^3) Ward agglomeration recomputing merge costs from centroids."""
    n = len(points)
    clusters: list[list[int]] = [[i] for i in range(n)]
    ids = list(range(n))
    tree = np.empty((n - 1, 3))
    for step in range(n - 1):
        best = None
        for i in range(len(clusters)):
            ci = points[clusters[i]].mean(axis=0)
            ni = len(clusters[i])
            for j in range(i + 1, len(clusters)):
                cj = points[clusters[j]].mean(axis=0)
                nj = len(clusters[j])
                cost = 2.0 * ni * nj / (ni + nj) * float(np.sum((ci - cj) ** 2))
                if best is None or cost < best[0]:
                    best = (cost, i, j)
        cost, i, j = best
        left, right = sorted((ids[i], ids[j]))
        tree[step] = (left, right, np.sqrt(cost))
        clusters[i] = clusters[i] + clusters[j]
        ids[i] = n + step
        del clusters[j], ids[j]
    return tree


def _cut_assignments(tree: np.ndarray, n_points: int, n_clusters: int) -> np.ndarray:
    """Labels (ordered by smallest member row) after the first
    n_points - n_clusters merges."""
    parent = list(range(n_points))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    node_root = {}
    for step in range(n_points - n_clusters):
        left, right, _ = tree[step]
        ra = find(node_root.get(int(left), int(left)))
        rb = find(node_root.get(int(right), int(right)))
        parent[rb] = ra
        node_root[n_points + step] = ra
    roots = [find(i) for i in range(n_points)]
    first_seen: dict[int, int] = {}
    labels = np.empty(n_points, dtype=np.int64)
    for i, root in enumerate(roots):
        if root not in first_seen:
            first_seen[root] = len(first_seen)
        labels[i] = first_seen[root]
    return labels


def _model_from_tree(
    tree: np.ndarray, points: np.ndarray, ids: list[str], n_clusters: int
) -> ClusterModel:
    labels = _cut_assignments(tree, len(points), n_clusters)
    centroids = np.empty((n_clusters, points.shape[1]))
    for c in range(n_clusters):
        mean = points[labels == c].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0:
            raise ValidationError(f"cluster {c} has a zero-mean centroid")
        centroids[c] = mean / norm
    return ClusterModel(
        n_clusters=n_clusters,
        merge_tree=tree,
        assignments={image_id: int(c) for image_id, c in zip(ids, labels)},
        centroids=centroids,
        source_corpus_hash=corpus_fingerprint(ids),
    )


def ward_cluster(
    embeddings: EmbeddingMatrix, n_clusters: int = DEFAULT_N_CLUSTERS
) -> ClusterModel:
    points = _check_embeddings(embeddings)
    n = len(points)
    if not 2 <= n_clusters <= n:
        raise ValidationError(f"n_clusters={n_clusters} outside [2, {n}]")
    tree = _merge_heights_tree(points)
    return _model_from_tree(tree, points, list(embeddings.ids), n_clusters)


def ward_cluster_naive(
    embeddings: EmbeddingMatrix, n_clusters: int = DEFAULT_N_CLUSTERS
) -> ClusterModel:
    """Oracle variant; only sensible for a few hundred points."""
    points = _check_embeddings(embeddings)
    n = len(points)
    if not 2 <= n_clusters <= n:
        raise ValidationError(f"n_clusters={n_clusters} outside [2, {n}]")
    tree = _naive_merge_tree(points)
    return _model_from_tree(tree, points, list(embeddings.ids), n_clusters)


def assign(model: ClusterModel, embeddings: EmbeddingMatrix) -> dict[str, int]:
    """Nearest-centroid (dot product) assignment; ties go to the lowest
    cluster index. Scale-invariant in each probe row."""
    rows = _check_embeddings(embeddings)
    if rows.shape[1] != model.dim:
        raise ValidationError(
            f"embedding dim {rows.shape[1]} does not match model dim {model.dim}"
        )
    scores = rows @ model.centroids.T
    labels = np.argmax(scores, axis=1)
    return {image_id: int(c) for image_id, c in zip(embeddings.ids, labels)}


def _phrase_table(model: ClusterModel, identity_corpus: Corpus):
    phrases: dict[int, dict[str, list[str]]] = {
        c: {"gender": [], "ethnicity": []} for c in range(model.n_clusters)
    }
    for image_id, cluster in model.assignments.items():
        prompt = identity_corpus[image_id].prompt
        phrases[cluster]["gender"].append(prompt.gender_phrase)
        phrases[cluster]["ethnicity"].append(prompt.ethnicity_phrase)
    return phrases


def _ranked_percentages(values: list[str]) -> list[tuple[str, float]]:
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    total = len(values)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(phrase, 100.0 * count / total) for phrase, count in ranked]


def summarize_regions(
    model: ClusterModel,
    identity_corpus: Corpus,
    eval_assignments: dict[str, int],
) -> list[RegionSummary]:
    """Per-cluster share of the evaluated dataset plus the ranked gender /
    ethnicity prompt phrases of the cluster's identity members."""
    phrases = _phrase_table(model, identity_corpus)
    total_eval = len(eval_assignments)
    if total_eval == 0:
        raise ValidationError("eval_assignments must be non-empty")
    eval_counts = np.bincount(
        np.fromiter(eval_assignments.values(), dtype=np.int64),
        minlength=model.n_clusters,
    )
    summaries = []
    for c in range(model.n_clusters):
        summaries.append(
            RegionSummary(
                cluster=c,
                share=float(eval_counts[c] / total_eval),
                top_gender=_ranked_percentages(phrases[c]["gender"]),
                top_ethnicity=_ranked_percentages(phrases[c]["ethnicity"]),
            )
        )
    return summaries


def attribute_entropy(
    model: ClusterModel, identity_corpus: Corpus, attribute: str
) -> float:
    """Size-weighted mean Shannon entropy (bits) of the attribute's prompt
    phrases within each cluster; low = attributes are well separated."""
    if attribute not in SUPPORTED_ATTRIBUTES:
        raise ValidationError(f"unknown attribute {attribute!r}")
    per_cluster_values: dict[int, list] = {c: [] for c in range(model.n_clusters)}
    for image_id, cluster in model.assignments.items():
        prompt = identity_corpus[image_id].prompt
        if attribute == "gender":
            value = prompt.gender_phrase
        elif attribute == "ethnicity":
            value = prompt.ethnicity_phrase
        else:
            value = (prompt.gender_phrase, prompt.ethnicity_phrase)
        per_cluster_values[cluster].append(value)
    return _weighted_entropy(per_cluster_values, len(model.assignments))


def _weighted_entropy(per_cluster_values: dict[int, list], total: int) -> float:
    acc = 0.0
    for values in per_cluster_values.values():
        if not values:
            continue
        counts = np.array(list(Counter(values).values()), dtype=np.float64)
        p = counts / counts.sum()
        entropy = float(-(p * np.log2(p)).sum())
        acc += (len(values) / total) * entropy
    return acc


# -- CLM1 model file format ------------------------------------------------------

CLM_MAGIC = b"CLM1"


def save_model(model: ClusterModel, path) -> None:
    """CLM1 layout: magic, u32 n_points, u32 n_clusters, u32 dim, 32-byte
    corpus hash, id table (u16 length + UTF-8), n_points u32 assignments,
    (n_points-1) x (u32 left, u32 right, f64 height) merges, centroids f64."""
    ids = list(model.assignments)
    with open(path, "wb") as fh:
        fh.write(CLM_MAGIC)
        fh.write(
            np.array([len(ids), model.n_clusters, model.dim], dtype="<u4").tobytes()
        )
        fh.write(bytes.fromhex(model.source_corpus_hash))
        for image_id in ids:
            blob = image_id.encode("utf-8")
            fh.write(np.array([len(blob)], dtype="<u2").tobytes())
            fh.write(blob)
        fh.write(
            np.array([model.assignments[i] for i in ids], dtype="<u4").tobytes()
        )
        merges = np.empty(
            len(model.merge_tree),
            dtype=np.dtype([("left", "<u4"), ("right", "<u4"), ("height", "<f8")]),
        )
        merges["left"] = model.merge_tree[:, 0].astype(np.uint32)
        merges["right"] = model.merge_tree[:, 1].astype(np.uint32)
        merges["height"] = model.merge_tree[:, 2]
        fh.write(merges.tobytes())
        fh.write(model.centroids.astype("<f8").tobytes())


def load_model(path) -> ClusterModel:
    raw = Path(path).read_bytes()
    if raw[:4] != CLM_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    n_points, n_clusters, dim = (
        int(v) for v in np.frombuffer(raw, dtype="<u4", count=3, offset=4)
    )
    corpus_hash = raw[16:48].hex()
    offset = 48
    ids = []
    for _ in range(n_points):
        length = int(np.frombuffer(raw, dtype="<u2", count=1, offset=offset)[0])
        offset += 2
        ids.append(raw[offset : offset + length].decode("utf-8"))
        offset += length
    labels = np.frombuffer(raw, dtype="<u4", count=n_points, offset=offset)
    offset += 4 * n_points
    merge_dtype = np.dtype([("left", "<u4"), ("right", "<u4"), ("height", "<f8")])
    merges = np.frombuffer(raw, dtype=merge_dtype, count=n_points - 1, offset=offset)
    offset += merge_dtype.itemsize * (n_points - 1)
    centroids = np.frombuffer(raw, dtype="<f8", offset=offset)
    if centroids.size != n_clusters * dim:
        raise FormatError(f"{path}: truncated centroid payload")
    tree = np.column_stack(
        [
            merges["left"].astype(np.float64),
            merges["right"].astype(np.float64),
            merges["height"],
        ]
    )
    return ClusterModel(
        n_clusters=n_clusters,
        merge_tree=tree,
        assignments={i: int(c) for i, c in zip(ids, labels)},
        centroids=centroids.reshape(n_clusters, dim).copy(),
        source_corpus_hash=corpus_hash,
    )
