import json
import struct
from pathlib import Path

import numpy as np
import pytest

from gpn import graphcore


def write_neutral_dataset(
    root: Path,
    features: np.ndarray,
    edges: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    split: dict | None = None,
    name: str = "toy",
) -> Path:
    """Write a neutral-format dataset directory byte by byte."""
    root.mkdir(parents=True, exist_ok=True)
    n, f = features.shape
    meta = {
        "name": name,
        "n_nodes": n,
        "n_features": f,
        "n_classes": n_classes,
        "n_edges": int(edges.shape[0]),
        "has_fixed_split": split is not None,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    (root / "features.bin").write_bytes(
        features.astype("<f4").tobytes()
    )
    edge_bytes = b"".join(struct.pack("<II", int(i), int(j)) for i, j in edges)
    (root / "edges.bin").write_bytes(edge_bytes)
    (root / "labels.bin").write_bytes(labels.astype("<u4").tobytes())
    if split is not None:
        (root / "split_fixed.json").write_text(json.dumps(split))
    return root


@pytest.fixture
def toy_dataset_dir(tmp_path):
    rng = np.random.default_rng(0)
    features = rng.normal(size=(6, 3))
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [0, 5]])
    labels = np.array([0, 0, 0, 1, 1, 1])
    split = {"train": [0, 3], "val": [1, 4], "test": [2, 5]}
    return write_neutral_dataset(tmp_path / "toy", features, edges, labels, 2, split)


@pytest.fixture
def small_sbm():
    return graphcore.generate_sbm(
        n_per_block=20, n_blocks=2, p_in=0.3, p_out=0.05,
        feat_dim=4, feat_noise=0.5, seed=42,
    )
