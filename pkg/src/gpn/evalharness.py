"""Experiment protocols and result aggregation.

Runs seed-replicated training over edge-drop grids and inductive
partial-node grids, aggregates accuracy into rows of mean/std, and
serializes tables as JSON/CSV (plus plot-ready CSV).
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bilevel, graphcore
from .bilevel import TrainConfig
from .errors import ConfigError
from .graphcore import Graph, SplitMasks

METHODS = ("gcn", "gpn-foa", "gpn-fda")


def canonical_hash(obj) -> str:
    """Stable sha256 over a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class ExperimentSpec:
    dataset: dict
    method: str = "gcn"
    split_mode: str = "random"
    per_class_train: int = 20
    per_class_val: int = 30
    drop_ratios: list[float] = field(default_factory=lambda: [0.0])
    node_ratios: list[float] = field(default_factory=lambda: [1.0])
    heads: int | None = None        # None defers to the train config
    kernel: str | None = None
    n_seeds: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        for r in list(self.drop_ratios) + list(self.node_ratios):
            if not 0.0 <= r <= 1.0:
                raise ConfigError(f"ratio {r} outside [0, 1]")

    def resolved_train_config(self, seed: int) -> TrainConfig:
        cfg = self.train
        updates: dict = {"seed": seed}
        if self.method == "gpn-foa":
            updates["approx"] = "FOA"
        elif self.method == "gpn-fda":
            updates["approx"] = "FDA"
        if self.heads is not None:
            updates["heads"] = self.heads
        if self.kernel is not None:
            updates["kernel"] = self.kernel
        return replace(cfg, **updates)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def config_hash(self) -> str:
        return canonical_hash(self.to_dict())


@dataclass
class ResultRow:
    setting: dict
    mean: float
    std: float
    n_seeds: int
    accuracies: list[float]


@dataclass
class ResultTable:
    rows: list[ResultRow]
    config_hash: str

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "rows": [asdict(r) for r in self.rows]}


def accuracy(probs: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Percent of masked nodes whose argmax matches the label.

    Argmax ties break to the lowest class index.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ConfigError("accuracy needs a non-empty mask")
    picked = np.argmax(probs[mask], axis=1)
    return 100.0 * float(np.mean(picked == np.asarray(labels)[mask]))


def build_dataset(dataset: dict, seed: int) -> Graph:
    """Materialize the dataset described by a spec for one seed.

    Synthetic graphs are regenerated per seed; stored datasets load as-is.
    """
    kind = dataset.get("kind")
    if kind == "sbm":
        return graphcore.generate_sbm(
            n_per_block=int(dataset["n_per_block"]),
            n_blocks=int(dataset["n_blocks"]),
            p_in=float(dataset["p_in"]),
            p_out=float(dataset["p_out"]),
            feat_dim=int(dataset["feat_dim"]),
            feat_noise=float(dataset["feat_noise"]),
            seed=seed,
        )
    if kind == "neutral":
        return graphcore.load_dataset(dataset["path"])
    raise ConfigError(f"unknown dataset kind {kind!r}")


def _train_once(spec: ExperimentSpec, drop_ratio: float, node_ratio: float,
                seed: int) -> float:
    """One fully seeded run: build, corrupt, split, train, test accuracy."""
    graph = build_dataset(spec.dataset, seed)
    if drop_ratio > 0.0:
        graph = graphcore.drop_edges(graph, drop_ratio, seed)
    masks = graphcore.make_splits(
        graph, spec.per_class_train, spec.per_class_val, spec.split_mode, seed
    )
    cfg = spec.resolved_train_config(seed)

    if node_ratio < 1.0:
        sub, retained = graphcore.subsample_nodes(graph, masks, node_ratio, seed)
        sub_masks = SplitMasks(
            masks.train[retained], masks.val[retained], masks.test[retained]
        )
        if spec.method == "gcn":
            pred, _ = bilevel.train_gcn_baseline(sub, sub_masks, cfg)
            return bilevel.evaluate_model(pred, None, 0, graph, masks)
        pred, gen, report = bilevel.train_gpn(sub, sub_masks, cfg)
        return bilevel.evaluate_model(pred, gen, report.selected_head, graph, masks)

    if spec.method == "gcn":
        _, report = bilevel.train_gcn_baseline(graph, masks, cfg)
        return report.test_accuracy
    _, _, report = bilevel.train_gpn(graph, masks, cfg)
    return report.test_accuracy


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Every (drop, node ratio) setting across n_seeds seeded runs."""
    tasks = []
    for drop in spec.drop_ratios:
        for node_ratio in spec.node_ratios:
            for s in range(spec.n_seeds):
                tasks.append((drop, node_ratio, spec.train.seed + s))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_train_once, spec, d, r, s) for d, r, s in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_train_once(spec, d, r, s) for d, r, s in tasks]

    rows = []
    i = 0
    for drop in spec.drop_ratios:
        for node_ratio in spec.node_ratios:
            accs = results[i : i + spec.n_seeds]
            i += spec.n_seeds
            std = 0.0 if len(accs) == 1 else float(np.std(accs, ddof=1))
            rows.append(ResultRow(
                setting={
                    "method": spec.method,
                    "drop_ratio": drop,
                    "node_ratio": node_ratio,
                },
                mean=float(np.mean(accs)),
                std=std,
                n_seeds=spec.n_seeds,
                accuracies=[float(a) for a in accs],
            ))
    return ResultTable(rows=rows, config_hash=spec.config_hash)


def compare_methods(table_a: ResultTable, table_b: ResultTable) -> list[dict]:
    """Per-setting accuracy gaps (a minus b) with the pooled standard deviation.

    Settings must align one-to-one after ignoring the method name.
    """
    def key(row: ResultRow):
        return tuple(sorted((k, v) for k, v in row.setting.items() if k != "method"))

    b_by_key = {key(r): r for r in table_b.rows}
    if len(b_by_key) != len(table_b.rows):
        raise ConfigError("duplicate settings in comparison table")
    gaps = []
    for ra in table_a.rows:
        rb = b_by_key.pop(key(ra), None)
        if rb is None:
            raise ConfigError(f"setting {ra.setting} missing from second table")
        na, nb = ra.n_seeds, rb.n_seeds
        dof = na + nb - 2
        pooled = 0.0 if dof <= 0 else float(
            np.sqrt(((na - 1) * ra.std ** 2 + (nb - 1) * rb.std ** 2) / dof)
        )
        setting = {k: v for k, v in ra.setting.items() if k != "method"}
        gaps.append({
            "setting": setting,
            "methods": [ra.setting.get("method"), rb.setting.get("method")],
            "gap": ra.mean - rb.mean,
            "pooled_std": pooled,
        })
    if b_by_key:
        raise ConfigError("second table has settings missing from the first")
    return gaps


# --- serialization ------------------------------------------------------------


def write_results_json(table: ResultTable, path: str | Path) -> None:
    Path(path).write_text(json.dumps(table.to_dict(), indent=2, sort_keys=True))


def write_results_csv(table: ResultTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "method", "mean", "std", "seeds", "config_hash"])
        for row in table.rows:
            setting = {k: v for k, v in row.setting.items() if k != "method"}
            writer.writerow([
                json.dumps(setting, sort_keys=True),
                row.setting.get("method", ""),
                repr(row.mean),
                repr(row.std),
                row.n_seeds,
                table.config_hash,
            ])


def write_plot_csv(table: ResultTable, path: str | Path, x_key: str = "drop_ratio") -> None:
    """x/y/yerr rows for external plotting over one swept ratio."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "yerr"])
        for row in table.rows:
            writer.writerow([row.setting[x_key], repr(row.mean), repr(row.std)])
