"""Graph containers and graph-level operations.

Holds the immutable graph representation (dense features, sparse binary
adjacency, labels), symmetric degree normalization with self-loops,
edge corruption, a stochastic-block-model generator for synthetic
benchmarks, node splits, and the neutral on-disk dataset format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DimensionError


@dataclass(frozen=True)
class SplitMasks:
    """Boolean node masks for train/val/test. Pairwise disjoint, non-empty."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        n = self.train.shape[0]
        if self.val.shape[0] != n or self.test.shape[0] != n:
            raise DimensionError("split masks must have equal length")
        if (self.train & self.val).any() or (self.train & self.test).any() or (
            self.val & self.test
        ).any():
            raise ConfigError("split masks must be pairwise disjoint")
        for name, mask in (("train", self.train), ("val", self.val), ("test", self.test)):
            if not mask.any():
                raise ConfigError(f"{name} mask selects no nodes")


@dataclass(frozen=True)
class Graph:
    """A symmetric, self-loop-free binary graph with node features and labels.

    Treat instances as immutable; operations return new graphs.
    """

    features: np.ndarray        # N x F, float64
    adjacency: sp.csr_matrix    # N x N, binary, symmetric, zero diagonal
    labels: np.ndarray          # length N, ints in [0, n_classes)
    n_classes: int
    fixed_split: SplitMasks | None = None

    def __post_init__(self):
        n = self.features.shape[0]
        if self.adjacency.shape != (n, n):
            raise DimensionError(
                f"adjacency shape {self.adjacency.shape} does not match {n} nodes"
            )
        if self.labels.shape[0] != n:
            raise DimensionError("labels length does not match node count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ConfigError("labels out of range [0, n_classes)")
        if self.adjacency.diagonal().any():
            raise ConfigError("adjacency must not contain self-loops")
        if (self.adjacency != self.adjacency.T).nnz != 0:
            raise ConfigError("adjacency must be symmetric")

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return self.adjacency.nnz // 2


@dataclass
class WeightedAdjacency:
    """Nonnegative real adjacency, dense or sparse, optionally normalized."""

    values: np.ndarray | sp.csr_matrix
    is_normalized: bool = False

    @property
    def shape(self):
        return self.values.shape

    def dense(self) -> np.ndarray:
        if sp.issparse(self.values):
            return np.asarray(self.values.todense(), dtype=np.float64)
        return self.values


def _edges_to_csr(n: int, edges: np.ndarray) -> sp.csr_matrix:
    """Build a symmetric binary CSR matrix from undirected edge pairs."""
    if edges.size == 0:
        return sp.csr_matrix((n, n), dtype=np.float64)
    i, j = edges[:, 0], edges[:, 1]
    keep = i != j
    i, j = i[keep], j[keep]
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    data = np.ones(rows.shape[0], dtype=np.float64)
    a = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    a.data[:] = 1.0  # collapse duplicate entries back to binary
    a.sort_indices()
    return a


def graph_from_edges(
    features: np.ndarray,
    edges: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    fixed_split: SplitMasks | None = None,
) -> Graph:
    """Construct a Graph from an M x 2 array of undirected edge pairs."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    adjacency = _edges_to_csr(features.shape[0], edges)
    return Graph(features, adjacency, labels, n_classes, fixed_split)


def undirected_edges(adjacency: sp.csr_matrix) -> np.ndarray:
    """Return the M x 2 array of undirected edges (i < j), sorted."""
    coo = adjacency.tocoo()
    mask = coo.row < coo.col
    pairs = np.stack([coo.row[mask], coo.col[mask]], axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def normalize_adjacency(adj: WeightedAdjacency | np.ndarray | sp.spmatrix) -> WeightedAdjacency:
    """Symmetrically normalize an adjacency with self-loops added.

    Computes S = D^{-1/2} (A + I) D^{-1/2} where D is the diagonal degree
    matrix of A + I. Diagonal degrees are >= 1, so no division by zero.
    """
    values = adj.values if isinstance(adj, WeightedAdjacency) else adj
    if values.shape[0] != values.shape[1]:
        raise DimensionError(f"adjacency must be square, got {values.shape}")
    n = values.shape[0]
    if sp.issparse(values):
        b = (values + sp.identity(n, format="csr", dtype=np.float64)).tocsr()
        deg = np.asarray(b.sum(axis=1)).ravel()
        s = 1.0 / np.sqrt(deg)
        out = sp.diags(s).dot(b).dot(sp.diags(s)).tocsr()
        out.sort_indices()
    else:
        b = np.array(values, dtype=np.float64)
        idx = np.arange(n)
        b[idx, idx] += 1.0
        deg = b.sum(axis=1)
        s = 1.0 / np.sqrt(deg)
        out = b * s[:, None] * s[None, :]
    return WeightedAdjacency(out, is_normalized=True)


def drop_edges(graph: Graph, ratio: float, seed: int) -> Graph:
    """Remove floor(ratio * M) undirected edges uniformly at random."""
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError(f"drop ratio must be in [0, 1], got {ratio}")
    edges = undirected_edges(graph.adjacency)
    m = edges.shape[0]
    n_drop = int(np.floor(ratio * m))
    if n_drop == 0:
        kept = edges
    else:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(m)
        kept = edges[np.sort(perm[n_drop:])]
    adjacency = _edges_to_csr(graph.n_nodes, kept)
    return Graph(graph.features, adjacency, graph.labels, graph.n_classes, graph.fixed_split)


def generate_sbm(
    n_per_block: int,
    n_blocks: int,
    p_in: float,
    p_out: float,
    feat_dim: int,
    feat_noise: float,
    seed: int,
) -> Graph:
    """Sample a stochastic-block-model graph with block labels.

    Features are the one-hot block centroid (in the first n_blocks of
    feat_dim dimensions) plus zero-mean Gaussian noise of scale feat_noise.
    """
    if feat_dim < n_blocks:
        raise ConfigError(f"feat_dim {feat_dim} must be >= n_blocks {n_blocks}")
    if not 0.0 <= p_out <= p_in <= 1.0:
        raise ConfigError("require 0 <= p_out <= p_in <= 1")
    n = n_per_block * n_blocks
    labels = np.repeat(np.arange(n_blocks), n_per_block)
    rng = np.random.default_rng(seed)

    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    draw = rng.random((n, n))
    upper = np.triu(draw < prob, k=1)
    rows, cols = np.nonzero(upper)
    edges = np.stack([rows, cols], axis=1)

    centroids = np.zeros((n_blocks, feat_dim))
    centroids[np.arange(n_blocks), np.arange(n_blocks)] = 1.0
    features = centroids[labels] + rng.normal(0.0, feat_noise, size=(n, feat_dim))
    return graph_from_edges(features, edges, labels, n_blocks)


def make_splits(
    graph: Graph,
    per_class_train: int,
    per_class_val: int,
    mode: str,
    seed: int,
) -> SplitMasks:
    """Select per-class train/val nodes; every remaining node is test.

    "fixed" returns the dataset's pre-supplied split when one exists,
    otherwise takes the lowest-index nodes of each class deterministically.
    "random" resamples with the same per-class counts, seeded.
    """
    if mode not in ("fixed", "random"):
        raise ConfigError(f"unknown split mode {mode!r}")
    if mode == "fixed" and graph.fixed_split is not None:
        return graph.fixed_split
    n = graph.n_nodes
    rng = np.random.default_rng(seed)
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    need = per_class_train + per_class_val
    for c in range(graph.n_classes):
        idx = np.flatnonzero(graph.labels == c)
        if idx.shape[0] < need:
            raise ConfigError(
                f"class {c} has {idx.shape[0]} nodes, needs {need} for train+val"
            )
        if mode == "random":
            idx = rng.permutation(idx)
        train[idx[:per_class_train]] = True
        val[idx[per_class_train:need]] = True
    test = ~(train | val)
    if not test.any():
        raise ConfigError("no nodes left for the test set")
    return SplitMasks(train, val, test)


def subsample_nodes(
    graph: Graph,
    masks: SplitMasks,
    ratio: float,
    seed: int,
) -> tuple[Graph, np.ndarray]:
    """Keep ceil(ratio * N) nodes, always retaining all train/val nodes.

    Returns the induced subgraph and the retained original indices
    (position k of the map is the original index of new node k). Split
    masks for the subgraph are the originals indexed by the map.
    """
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"node ratio must be in (0, 1], got {ratio}")
    n = graph.n_nodes
    target = int(np.ceil(ratio * n))
    protected = masks.train | masks.val
    n_protected = int(protected.sum())
    if target < n_protected:
        raise ConfigError(
            f"ratio {ratio} keeps {target} nodes but {n_protected} train/val nodes must stay"
        )
    others = np.flatnonzero(~protected)
    rng = np.random.default_rng(seed)
    extra = rng.choice(others, size=target - n_protected, replace=False)
    retained = np.sort(np.concatenate([np.flatnonzero(protected), extra]))
    sub_adj = graph.adjacency[retained][:, retained].tocsr()
    sub_adj.sort_indices()
    sub = Graph(
        graph.features[retained],
        sub_adj,
        graph.labels[retained],
        graph.n_classes,
    )
    return sub, retained


# --- neutral dataset format -------------------------------------------------
#
# A dataset directory contains:
#   meta.json      n_nodes / n_features / n_classes and bookkeeping
#   features.bin   N*F little-endian float32, row-major
#   edges.bin      one (u32, u32) little-endian pair per undirected edge, i < j
#   labels.bin     N little-endian uint32
#   split_fixed.json  optional {"train": [...], "val": [...], "test": [...]}


def load_dataset(path: str | Path) -> Graph:
    """Load a Graph from a neutral-format dataset directory."""
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        raise ConfigError(f"missing {meta_path}")
    meta = json.loads(meta_path.read_text())
    n = int(meta["n_nodes"])
    f = int(meta["n_features"])
    k = int(meta["n_classes"])

    features = np.fromfile(path / "features.bin", dtype="<f4")
    if features.size != n * f:
        raise ConfigError(
            f"features.bin holds {features.size} floats, expected {n * f}"
        )
    features = features.reshape(n, f).astype(np.float64)

    raw_edges = np.fromfile(path / "edges.bin", dtype="<u4")
    if raw_edges.size % 2 != 0:
        raise ConfigError("edges.bin length is not a whole number of pairs")
    edges = raw_edges.reshape(-1, 2).astype(np.int64)

    labels = np.fromfile(path / "labels.bin", dtype="<u4")
    if labels.size != n:
        raise ConfigError(f"labels.bin holds {labels.size} labels, expected {n}")

    fixed_split = None
    split_path = path / "split_fixed.json"
    if split_path.is_file():
        idx = json.loads(split_path.read_text())
        fixed_split = SplitMasks(
            _index_mask(idx["train"], n),
            _index_mask(idx["val"], n),
            _index_mask(idx["test"], n),
        )
    return graph_from_edges(features, edges, labels.astype(np.int64), k, fixed_split)


def _index_mask(indices, n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[np.asarray(indices, dtype=np.int64)] = True
    return mask


def validate_dataset_dir(path: str | Path) -> list[str]:
    """Check a neutral-format directory against its meta.json. Returns problems."""
    path = Path(path)
    problems: list[str] = []
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        return [f"missing {meta_path}"]
    meta = json.loads(meta_path.read_text())
    n = int(meta["n_nodes"])
    f = int(meta["n_features"])
    k = int(meta["n_classes"])

    feat_path = path / "features.bin"
    if not feat_path.is_file():
        problems.append("missing features.bin")
    elif feat_path.stat().st_size != n * f * 4:
        problems.append(
            f"features.bin is {feat_path.stat().st_size} bytes, expected {n * f * 4}"
        )

    lab_path = path / "labels.bin"
    if not lab_path.is_file():
        problems.append("missing labels.bin")
    elif lab_path.stat().st_size != n * 4:
        problems.append(f"labels.bin is {lab_path.stat().st_size} bytes, expected {n * 4}")
    else:
        labels = np.fromfile(lab_path, dtype="<u4")
        bad = np.flatnonzero(labels >= k)
        if bad.size:
            problems.append(f"labels out of range at indices {bad[:10].tolist()}")

    edge_path = path / "edges.bin"
    if not edge_path.is_file():
        problems.append("missing edges.bin")
    else:
        raw = np.fromfile(edge_path, dtype="<u4")
        if raw.size % 2 != 0:
            problems.append("edges.bin length is not a whole number of pairs")
        else:
            edges = raw.reshape(-1, 2)
            if "n_edges" in meta and edges.shape[0] != int(meta["n_edges"]):
                problems.append(
                    f"edges.bin holds {edges.shape[0]} pairs, meta says {meta['n_edges']}"
                )
            if edges.size and edges.max() >= n:
                problems.append("edge endpoint out of range")
            if np.any(edges[:, 0] >= edges[:, 1]):
                problems.append("edge pairs must satisfy i < j")
            keys = edges[:, 0].astype(np.int64) * n + edges[:, 1]
            if np.unique(keys).size != keys.size:
                problems.append("duplicate edges present")

    split_path = path / "split_fixed.json"
    if split_path.is_file():
        idx = json.loads(split_path.read_text())
        seen = np.zeros(n, dtype=np.int64)
        for part in ("train", "val", "test"):
            arr = np.asarray(idx.get(part, []), dtype=np.int64)
            if arr.size == 0:
                problems.append(f"split part {part} is empty")
                continue
            if arr.min() < 0 or arr.max() >= n:
                problems.append(f"split part {part} has out-of-range indices")
            seen[arr] += 1
        if (seen > 1).any():
            problems.append("split parts overlap")
    return problems
