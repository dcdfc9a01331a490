"""Graph-based approximate nearest neighbors over BoVW vectors.

The index is built with NN-descent: start from a random K-neighbor graph
and repeatedly local-join neighbors-of-neighbors until the update rate
falls below `delta`. Similarity is cosine on the L2-normalized TF-IDF
vectors (so it lives in [0, 1]); queries run a best-first graph walk.
An exhaustive-scan oracle ships alongside for testing, and a scalar
colorfulness lookup covers the 1-D neighborhood tool.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .bovw import SparseVector, cosine
from .errors import FormatError, ValidationError

DEFAULT_K = 20
DEFAULT_SAMPLE_RATE = 0.5
DEFAULT_DELTA = 0.001
DEFAULT_MAX_ITERS = 12
QUERY_ENTRY_POINTS = 8
QUERY_POOL_MIN = 32

# dense fast path for pairwise similarity when the materialized matrix
# stays small; beyond this we stream through scipy.sparse
_DENSE_LIMIT = 64_000_000


@dataclass
class KnnGraph:
    ids: list[str]
    neighbors: np.ndarray  # (N, K) int64 node indices, sorted by similarity
    similarities: np.ndarray  # (N, K) float64, descending per row
    build_seed: int

    def __post_init__(self):
        self.neighbors = np.asarray(self.neighbors, dtype=np.int64)
        self.similarities = np.asarray(self.similarities, dtype=np.float64)
        n, k = self.neighbors.shape
        if len(self.ids) != n or self.similarities.shape != (n, k):
            raise ValidationError("graph arrays are inconsistent")
        self._index_of = {image_id: i for i, image_id in enumerate(self.ids)}
        if len(self._index_of) != n:
            raise ValidationError("duplicate ids in graph")

    @property
    def degree(self) -> int:
        return self.neighbors.shape[1]

    def node(self, image_id: str) -> int:
        try:
            return self._index_of[image_id]
        except KeyError:
            raise KeyError(f"unknown image id {image_id!r}") from None


class _SimilarityTable:
    """Batched cosine evaluation over a fixed vector set."""

    def __init__(self, vectors: list[SparseVector]):
        if not vectors:
            raise ValidationError("no vectors to index")
        k = vectors[0].k
        rows, cols, vals = [], [], []
        for i, vec in enumerate(vectors):
            if vec.k != k:
                raise ValidationError("vectors come from different codebooks")
            rows.extend([i] * len(vec))
            cols.extend(vec.indices.tolist())
            vals.extend(vec.values.tolist())
        self.csr = sp.csr_matrix(
            (vals, (rows, cols)), shape=(len(vectors), k), dtype=np.float64
        )
        self.dense = (
            np.asarray(self.csr.todense())
            if len(vectors) * k <= _DENSE_LIMIT
            else None
        )

    def pair(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        if self.dense is not None:
            return np.einsum("ij,ij->i", self.dense[us], self.dense[vs])
        out = np.empty(len(us))
        chunk = 100_000
        for start in range(0, len(us), chunk):
            a = self.csr[us[start : start + chunk]]
            b = self.csr[vs[start : start + chunk]]
            out[start : start + chunk] = np.asarray(a.multiply(b).sum(axis=1)).ravel()
        return out

    def against_all(self, vec: SparseVector) -> np.ndarray:
        dense = vec.densify()
        return self.csr @ dense


def build_index(
    vectors: list[SparseVector],
    K: int = DEFAULT_K,
    seed: int = 0,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    max_iters: int = DEFAULT_MAX_ITERS,
    delta: float = DEFAULT_DELTA,
    ids: list[str] | None = None,
) -> KnnGraph:
    """NN-descent graph construction (single-worker, deterministic)."""
    n = len(vectors)
    if K < 1:
        raise ValidationError("K must be >= 1")
    if n < K + 1:
        raise ValidationError(f"need at least K+1={K + 1} vectors, got {n}")
    if ids is None:
        ids = [str(i) for i in range(n)]
    if len(ids) != n:
        raise ValidationError("ids/vector count mismatch")
    table = _SimilarityTable(vectors)
    rng = np.random.default_rng(seed)
    rho_k = max(1, int(round(sample_rate * K)))

    # seed each node with K distinct random neighbors
    sims_list: list[np.ndarray] = []
    nbrs_list: list[np.ndarray] = []
    init_us, init_vs = [], []
    for v in range(n):
        others = rng.choice(n - 1, size=K, replace=False)
        others = np.where(others >= v, others + 1, others)
        nbrs_list.append(others.astype(np.int64))
        init_us.extend([v] * K)
        init_vs.extend(others.tolist())
    init_sims = table.pair(np.asarray(init_us), np.asarray(init_vs))
    neighbors = [
        [
            [float(init_sims[v * K + j]), int(nbrs_list[v][j]), True]
            for j in range(K)
        ]
        for v in range(n)
    ]
    members = [set(nbrs_list[v].tolist()) for v in range(n)]

    def try_insert(host: int, cand: int, sim: float) -> int:
        if cand == host or cand in members[host]:
            return 0
        row = neighbors[host]
        worst = min(range(K), key=lambda j: (row[j][0], -row[j][1]))
        if sim <= row[worst][0]:
            return 0
        members[host].discard(row[worst][1])
        members[host].add(cand)
        row[worst] = [sim, cand, True]
        return 1

    for _ in range(max_iters):
        fwd_new: list[list[int]] = [[] for _ in range(n)]
        fwd_old: list[list[int]] = [[] for _ in range(n)]
        rev_new: list[list[int]] = [[] for _ in range(n)]
        rev_old: list[list[int]] = [[] for _ in range(n)]
        for v in range(n):
            fresh = [entry for entry in neighbors[v] if entry[2]]
            stale = [entry[1] for entry in neighbors[v] if not entry[2]]
            if len(fresh) > rho_k:
                picked = rng.choice(len(fresh), size=rho_k, replace=False)
                picked = sorted(int(i) for i in picked)
                sampled = [fresh[i] for i in picked]
            else:
                sampled = fresh
            for entry in sampled:
                entry[2] = False  # consumed: counts as old next round
                fwd_new[v].append(entry[1])
                rev_new[entry[1]].append(v)
            fwd_old[v].extend(stale)
            for u in stale:
                rev_old[u].append(v)

        pair_us, pair_vs = [], []
        seen_pairs = set()

        def push_pair(a: int, b: int) -> None:
            key = (a, b) if a < b else (b, a)
            if a != b and key not in seen_pairs:
                seen_pairs.add(key)
                pair_us.append(key[0])
                pair_vs.append(key[1])

        for v in range(n):
            rnew, rold = rev_new[v], rev_old[v]
            if len(rnew) > rho_k:
                picked = rng.choice(len(rnew), size=rho_k, replace=False)
                rnew = [rnew[int(i)] for i in sorted(picked.tolist())]
            if len(rold) > rho_k:
                picked = rng.choice(len(rold), size=rho_k, replace=False)
                rold = [rold[int(i)] for i in sorted(picked.tolist())]
            cand_new = list(dict.fromkeys(fwd_new[v] + rnew))
            cand_old = list(dict.fromkeys(fwd_old[v] + rold))
            for i, a in enumerate(cand_new):
                for b in cand_new[i + 1 :]:
                    push_pair(a, b)
                for b in cand_old:
                    push_pair(a, b)

        if not pair_us:
            break
        sims = table.pair(np.asarray(pair_us), np.asarray(pair_vs))
        updates = 0
        for a, b, s in zip(pair_us, pair_vs, sims):
            s = float(min(max(s, 0.0), 1.0))
            updates += try_insert(a, b, s)
            updates += try_insert(b, a, s)
        if updates < delta * n * K:
            break

    nbr = np.empty((n, K), dtype=np.int64)
    sim = np.empty((n, K), dtype=np.float64)
    for v in range(n):
        row = sorted(neighbors[v], key=lambda e: (-e[0], e[1]))
        nbr[v] = [e[1] for e in row]
        sim[v] = [min(max(e[0], 0.0), 1.0) for e in row]
    return KnnGraph(ids=list(ids), neighbors=nbr, similarities=sim, build_seed=seed)


def query(
    index: KnnGraph,
    vectors: list[SparseVector],
    probe: str | SparseVector,
    k: int,
) -> list[tuple[str, float]]:
    """Best-first graph walk from the probe's node (or seeded entry points
    for external vectors); stops once no frontier candidate can improve
    the current top-k."""
    n = len(index.ids)
    if k > n - 1:
        raise ValidationError(f"k={k} too large for {n} indexed vectors")
    if len(vectors) != n:
        raise ValidationError("vector list does not match the index")

    if isinstance(probe, str):
        probe_node = index.node(probe)
        probe_vec = vectors[probe_node]
        entry_nodes = [int(u) for u in index.neighbors[probe_node]]
    else:
        probe_node = -1
        probe_vec = probe
        rng = np.random.default_rng(np.random.SeedSequence((index.build_seed, 0x9E3779)))
        entry_nodes = sorted(
            int(u) for u in rng.choice(n, size=min(QUERY_ENTRY_POINTS, n), replace=False)
        )

    # candidate pool wider than k keeps the walk from stalling in a local
    # neighborhood before it reaches the probe's true cluster
    ef = max(k, QUERY_POOL_MIN)
    visited = {probe_node}
    pool: list[tuple[float, int]] = []  # every scored node
    best: list[float] = []  # min-heap of the current top-ef similarities
    frontier: list[tuple[float, int]] = []  # min-heap on (-sim, node)

    def consider(node: int) -> None:
        if node in visited:
            return
        visited.add(node)
        sim = cosine(probe_vec, vectors[node])
        heapq.heappush(frontier, (-sim, node))
        pool.append((sim, node))
        if len(best) < ef:
            heapq.heappush(best, sim)
        elif sim > best[0]:
            heapq.heapreplace(best, sim)

    for node in entry_nodes:
        consider(node)

    while frontier:
        neg_sim, node = heapq.heappop(frontier)
        if len(best) >= ef and -neg_sim < best[0]:
            break
        for nb in index.neighbors[node]:
            consider(int(nb))

    ranked = sorted(pool, key=lambda e: (-e[0], e[1]))[:k]
    return [(index.ids[node], float(sim)) for sim, node in ranked]


def graph_neighbors(index: KnnGraph, probe_id: str, k: int) -> list[tuple[str, float]]:
    """The probe's stored neighbor row truncated to k (no re-expansion);
    this is the shared lookup behind the CLI and HTTP knn surfaces."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > index.degree:
        raise ValidationError(f"k={k} exceeds graph degree {index.degree}")
    node = index.node(probe_id)
    return [
        (index.ids[int(nb)], float(sim))
        for nb, sim in zip(index.neighbors[node][:k], index.similarities[node][:k])
    ]


def brute_force_knn(
    vectors: list[SparseVector],
    ids: list[str],
    probe: str | SparseVector,
    k: int,
) -> list[tuple[str, float]]:
    """Exact top-k by cosine; ties break on id order. Test oracle."""
    n = len(vectors)
    if len(ids) != n:
        raise ValidationError("ids/vector count mismatch")
    if isinstance(probe, str):
        if probe not in ids:
            raise KeyError(f"unknown image id {probe!r}")
        probe_idx = ids.index(probe)
        probe_vec = vectors[probe_idx]
    else:
        probe_idx = -1
        probe_vec = probe
    if k > n - (1 if probe_idx >= 0 else 0):
        raise ValidationError(f"k={k} too large for {n} vectors")
    sims = [cosine(probe_vec, v) for v in vectors]
    order = sorted(
        (i for i in range(n) if i != probe_idx),
        key=lambda i: (-sims[i], ids[i]),
    )
    return [(ids[i], float(sims[i])) for i in order[:k]]


def colorfulness_neighbors(
    scores: dict[str, float], probe_id: str, k: int
) -> list[str]:
    """The k ids whose colorfulness is closest to the probe's."""
    if probe_id not in scores:
        raise KeyError(f"unknown image id {probe_id!r}")
    target = scores[probe_id]
    order = sorted(
        (i for i in scores if i != probe_id),
        key=lambda i: (abs(scores[i] - target), i),
    )
    return order[:k]


# -- KNN1 index file format ---------------------------------------------------

KNN_MAGIC = b"KNN1"
_EDGE_DTYPE = np.dtype([("idx", "<u4"), ("sim", "<f4")])


def save_index(graph: KnnGraph, path) -> None:
    """KNN1 layout: magic, u32 N, u32 K, u64 seed, N ids (u16 length +
    UTF-8), then N*K (u32 node, f32 similarity) edges in row order."""
    n, k = graph.neighbors.shape
    with open(path, "wb") as fh:
        fh.write(KNN_MAGIC)
        fh.write(np.array([n, k], dtype="<u4").tobytes())
        fh.write(np.array([graph.build_seed], dtype="<u8").tobytes())
        for image_id in graph.ids:
            blob = image_id.encode("utf-8")
            fh.write(np.array([len(blob)], dtype="<u2").tobytes())
            fh.write(blob)
        edges = np.empty(n * k, dtype=_EDGE_DTYPE)
        edges["idx"] = graph.neighbors.ravel()
        edges["sim"] = graph.similarities.ravel()
        fh.write(edges.tobytes())


def load_index(path) -> KnnGraph:
    raw = Path(path).read_bytes()
    if raw[:4] != KNN_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    n, k = (int(v) for v in np.frombuffer(raw, dtype="<u4", count=2, offset=4))
    seed = int(np.frombuffer(raw, dtype="<u8", count=1, offset=12)[0])
    offset = 20
    ids = []
    for _ in range(n):
        if offset + 2 > len(raw):
            raise FormatError(f"{path}: truncated id table")
        length = int(np.frombuffer(raw, dtype="<u2", count=1, offset=offset)[0])
        offset += 2
        ids.append(raw[offset : offset + length].decode("utf-8"))
        offset += length
    edges = np.frombuffer(raw, dtype=_EDGE_DTYPE, offset=offset)
    if edges.size != n * k:
        raise FormatError(f"{path}: expected {n * k} edges, found {edges.size}")
    sims = edges["sim"].astype(np.float64)
    if not np.isfinite(sims).all():
        raise FormatError(f"{path}: non-finite similarities")
    return KnnGraph(
        ids=ids,
        neighbors=edges["idx"].astype(np.int64).reshape(n, k),
        similarities=sims.reshape(n, k),
        build_seed=seed,
    )
