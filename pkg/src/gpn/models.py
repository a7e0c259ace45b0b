"""GCN stacks, the softmax classifier, and the kernel-based structure generator.

The generator embeds nodes with its own GCN over the fixed prior graph,
turns embeddings into a pairwise similarity matrix, and adds the clamped
off-diagonal similarities to the prior adjacency as a residual. Multiple
independent heads can each propose a structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import diff
from .diff import Tape, Var
from .errors import ConfigError, DimensionError
from .graphcore import Graph, WeightedAdjacency

KERNELS = ("dot", "cosine", "euclidean")

_OFF_DIAG_CACHE: dict[int, np.ndarray] = {}


def _off_diag_mask(n: int) -> np.ndarray:
    """Read-only (1 - I) mask, cached; these are large at graph scale."""
    mask = _OFF_DIAG_CACHE.get(n)
    if mask is None:
        mask = 1.0 - np.eye(n)
        mask.setflags(write=False)
        if len(_OFF_DIAG_CACHE) > 4:
            _OFF_DIAG_CACHE.clear()
        _OFF_DIAG_CACHE[n] = mask
    return mask


@dataclass
class GcnParams:
    """Layer weights W_l of shape (F_l, F_{l+1}); dimensions must chain."""

    layers: list[np.ndarray]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.shape[1] != b.shape[0]:
                raise DimensionError(
                    f"layer dims do not chain: {a.shape} then {b.shape}"
                )

    def copy(self) -> "GcnParams":
        return GcnParams([w.copy() for w in self.layers])


@dataclass
class PredictorParams:
    gcn: GcnParams

    def copy(self) -> "PredictorParams":
        return PredictorParams(self.gcn.copy())


@dataclass
class GeneratorParams:
    heads: list[GcnParams]
    kernel: str = "dot"
    top_k: int | None = None
    residual_clamp: bool = True

    def __post_init__(self):
        if not self.heads:
            raise ConfigError("generator needs at least one head")
        if self.kernel not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel!r}, expected one of {KERNELS}")
        first = self.heads[0].layers[0].shape[0]
        for h in self.heads:
            if h.layers[0].shape[0] != first:
                raise DimensionError("all generator heads must share the input dimension")

    def copy(self) -> "GeneratorParams":
        return GeneratorParams(
            [h.copy() for h in self.heads], self.kernel, self.top_k, self.residual_clamp
        )


@dataclass
class ResidualAdjacency:
    """A generated structure: nonnegative residual and prior + residual."""

    residual: np.ndarray
    combined: WeightedAdjacency
    head_index: int


def init_gcn_params(rng: np.random.Generator, dims: list[int], output_scale: float | None = None) -> GcnParams:
    """Uniform fan-in initialization U(-1/sqrt(F_in), 1/sqrt(F_in)) per layer.

    output_scale, when given, rescales the final layer (0 makes it exactly
    zero, which makes a generator head's residual exactly zero).
    """
    layers = []
    for i, (fin, fout) in enumerate(zip(dims, dims[1:])):
        bound = 1.0 / np.sqrt(fin)
        w = rng.uniform(-bound, bound, size=(fin, fout))
        if output_scale is not None and i == len(dims) - 2:
            w = w * output_scale
        layers.append(w)
    return GcnParams(layers)


def params_to_vars(tape: Tape, params: GcnParams, requires_grad: bool = True) -> list[Var]:
    return [tape.leaf(w, requires_grad=requires_grad) for w in params.layers]


def gcn_forward_var(tape: Tape, layer_vars: list[Var], x: Var, adj) -> Var:
    """Propagate H <- sigma(S (H W)) through the layer stack.

    adj may be a constant sparse matrix, a constant dense matrix, or a Var
    (a differentiable normalized adjacency). ReLU between layers, identity
    after the last.
    """
    adj_var = None
    if isinstance(adj, Var):
        adj_var = adj
    elif not sp.issparse(adj):
        adj_var = tape.leaf(np.asarray(adj, dtype=np.float64))
    h = x
    last = len(layer_vars) - 1
    for i, w in enumerate(layer_vars):
        hw = diff.matmul(h, w)
        if adj_var is None:
            h = diff.sparse_dense_matmul(adj, hw)
        else:
            h = diff.matmul(adj_var, hw)
        if i < last:
            h = diff.relu(h)
    return h


def kernel_gram_var(tape: Tape, h: Var, kind: str) -> Var:
    if kind == "dot":
        return diff.gram(h)
    if kind == "cosine":
        return diff.cosine_gram(h)
    if kind == "euclidean":
        return diff.neg_sq_euclid_gram(h)
    raise ConfigError(f"unknown kernel {kind!r}, expected one of {KERNELS}")


def structure_var(
    tape: Tape,
    head_vars: list[Var],
    x: Var,
    gen_adj,
    prior_dense: np.ndarray,
    kernel: str,
    residual_clamp: bool,
    top_k: int | None,
) -> tuple[Var, Var]:
    """Build (residual, combined) for one head as tape Vars.

    gen_adj is the adjacency the generator's own GCN propagates over (the
    fixed normalized prior); prior_dense is the raw binary prior added back
    by the residual link.
    """
    n = prior_dense.shape[0]
    h = gcn_forward_var(tape, head_vars, x, gen_adj)
    sim = kernel_gram_var(tape, h, kernel)
    if residual_clamp:
        sim = diff.relu(sim)
    off_diag = tape.leaf(_off_diag_mask(n))
    residual = diff.elementwise_mul(sim, off_diag)
    if top_k is not None:
        residual = diff.topk_mask(residual, top_k)
    combined = diff.add_const(residual, prior_dense)
    return residual, combined


# --- numeric wrappers (forward-only) -----------------------------------------


def gcn_forward(params: GcnParams, features: np.ndarray, norm_adj: WeightedAdjacency) -> np.ndarray:
    """Forward the GCN stack over a normalized adjacency; returns H^(L)."""
    if not norm_adj.is_normalized:
        raise ConfigError("gcn_forward expects a normalized adjacency")
    tape = Tape()
    x = tape.leaf(features)
    layer_vars = params_to_vars(tape, params, requires_grad=False)
    return gcn_forward_var(tape, layer_vars, x, norm_adj.values).value


def predict(pred: PredictorParams, graph: Graph, adj: WeightedAdjacency) -> np.ndarray:
    """Class probabilities, rows summing to one; argmax is the prediction."""
    if not adj.is_normalized:
        raise ConfigError("predict expects a normalized adjacency")
    tape = Tape()
    x = tape.leaf(graph.features)
    layer_vars = params_to_vars(tape, pred.gcn, requires_grad=False)
    logits = gcn_forward_var(tape, layer_vars, x, adj.values)
    return diff.row_softmax(logits).value


def kernel_gram(h: np.ndarray, kind: str) -> np.ndarray:
    tape = Tape()
    return kernel_gram_var(tape, tape.leaf(h), kind).value


def generate_structure(
    gen: GeneratorParams,
    head: int,
    graph: Graph,
    prior_norm_adj: WeightedAdjacency,
) -> ResidualAdjacency:
    """Run one head and return its residual and combined adjacency."""
    if not 0 <= head < len(gen.heads):
        raise ConfigError(f"head {head} out of range for {len(gen.heads)} heads")
    if not prior_norm_adj.is_normalized:
        raise ConfigError("generate_structure expects the normalized prior")
    tape = Tape()
    x = tape.leaf(graph.features)
    head_vars = params_to_vars(tape, gen.heads[head], requires_grad=False)
    prior_dense = np.asarray(graph.adjacency.todense(), dtype=np.float64)
    residual, combined = structure_var(
        tape, head_vars, x, prior_norm_adj.values, prior_dense,
        gen.kernel, gen.residual_clamp, gen.top_k,
    )
    return ResidualAdjacency(
        residual=residual.value,
        combined=WeightedAdjacency(combined.value, is_normalized=False),
        head_index=head,
    )


def multi_head_generate(
    gen: GeneratorParams,
    graph: Graph,
    prior_norm_adj: WeightedAdjacency,
) -> list[ResidualAdjacency]:
    return [generate_structure(gen, h, graph, prior_norm_adj) for h in range(len(gen.heads))]


# --- checkpoint IO ------------------------------------------------------------
#
# weights.bin holds every weight matrix back to back as little-endian float64;
# manifest.json records names, shapes, order, kernel kind, and head count.


def save_checkpoint(path: str | Path, pred: PredictorParams,
                    gen: GeneratorParams | None, selected_head: int = 0) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    for i, w in enumerate(pred.gcn.layers):
        entries.append({"name": f"predictor.layer{i}", "shape": list(w.shape)})
        blobs.append(w)
    heads = gen.heads if gen is not None else []
    for h, head in enumerate(heads):
        for i, w in enumerate(head.layers):
            entries.append({"name": f"generator.head{h}.layer{i}", "shape": list(w.shape)})
            blobs.append(w)
    manifest = {
        "kernel": gen.kernel if gen is not None else None,
        "heads": len(heads),
        "top_k": gen.top_k if gen is not None else None,
        "residual_clamp": gen.residual_clamp if gen is not None else True,
        "selected_head": selected_head,
        "predictor_layers": len(pred.gcn.layers),
        "matrices": entries,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    with open(path / "weights.bin", "wb") as fh:
        for w in blobs:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[PredictorParams, GeneratorParams | None, int]:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    raw = np.fromfile(path / "weights.bin", dtype="<f8")
    mats: dict[str, np.ndarray] = {}
    offset = 0
    for entry in manifest["matrices"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape))
        if offset + size > raw.size:
            raise ConfigError("weights.bin shorter than manifest describes")
        mats[entry["name"]] = raw[offset : offset + size].reshape(shape).astype(np.float64)
        offset += size
    if offset != raw.size:
        raise ConfigError("weights.bin longer than manifest describes")

    pred_layers = [mats[f"predictor.layer{i}"] for i in range(manifest["predictor_layers"])]
    pred = PredictorParams(GcnParams(pred_layers))
    if manifest["heads"] == 0:
        return pred, None, int(manifest.get("selected_head", 0))
    heads = []
    for h in range(manifest["heads"]):
        layers = []
        i = 0
        while f"generator.head{h}.layer{i}" in mats:
            layers.append(mats[f"generator.head{h}.layer{i}"])
            i += 1
        heads.append(GcnParams(layers))
    gen = GeneratorParams(
        heads,
        kernel=manifest["kernel"],
        top_k=manifest["top_k"],
        residual_clamp=manifest["residual_clamp"],
    )
    return pred, gen, int(manifest.get("selected_head", 0))
