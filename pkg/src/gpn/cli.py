"""Command-line entry point.

Commands: train, eval, sweep, inductive, gradcheck, convert-check.
A run is described by one JSON config document; --set overrides use dotted
paths and unknown keys are hard errors so every result is reproducible from
the effective config, whose hash is recorded in the outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import bilevel, diff, evalharness, graphcore, models
from .bilevel import TrainConfig
from .errors import ConfigError
from .evalharness import ExperimentSpec, canonical_hash

_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}
_SCHEMA = {
    "dataset": {"kind", "path", "n_per_block", "n_blocks", "p_in", "p_out",
                "feat_dim", "feat_noise"},
    "method": None,
    "split": {"mode", "per_class_train", "per_class_val"},
    "drop_edges": None,
    "train": _TRAIN_KEYS,
    "experiment": {"drop_ratios", "node_ratios", "n_seeds"},
}

_DEFAULT_CONFIG = {
    "dataset": {"kind": "sbm", "n_per_block": 100, "n_blocks": 2, "p_in": 0.1,
                "p_out": 0.01, "feat_dim": 8, "feat_noise": 1.0},
    "method": "gcn",
    "split": {"mode": "random", "per_class_train": 20, "per_class_val": 30},
    "drop_edges": 0.0,
    "train": {},
    "experiment": {"drop_ratios": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
                   "node_ratios": [0.2, 0.4, 0.6, 0.8, 1.0],
                   "n_seeds": 5},
}


def _validate_config(cfg: dict) -> None:
    for key, value in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config field {key!r}")
        allowed = _SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"config field {key!r} must be an object")
        for sub in value:
            if sub not in allowed:
                raise ConfigError(f"unknown config field {key}.{sub}")


def _load_config(path: str | None) -> dict:
    cfg = json.loads(json.dumps(_DEFAULT_CONFIG))  # deep copy
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        user = json.loads(p.read_text())
        _validate_config(user)
        for key, value in user.items():
            if isinstance(value, dict) and key != "dataset":
                cfg[key].update(value)
            else:
                cfg[key] = value
    return cfg


def _apply_overrides(cfg: dict, sets: list[str], seed: int | None) -> dict:
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        parts = dotted.split(".")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if len(parts) == 1:
            key = parts[0]
            if key not in _SCHEMA:
                raise ConfigError(f"unknown override field {key!r}")
            cfg[key] = value
        elif len(parts) == 2:
            top, sub = parts
            allowed = _SCHEMA.get(top)
            if top not in _SCHEMA or allowed is None:
                raise ConfigError(f"unknown override field {dotted!r}")
            if sub not in allowed:
                raise ConfigError(f"unknown override field {dotted!r}")
            cfg.setdefault(top, {})[sub] = value
        else:
            raise ConfigError(f"override path {dotted!r} is too deep")
    if seed is not None:
        cfg.setdefault("train", {})["seed"] = int(seed)
    _validate_config(cfg)
    return cfg


def _train_config(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig(**cfg.get("train", {}))
    except TypeError as exc:
        raise ConfigError(f"train config: {exc}") from exc


def _resolve_dataset(cfg: dict) -> dict:
    dataset = dict(cfg.get("dataset", {}))
    if dataset.get("kind") == "neutral":
        path = Path(dataset.get("path", ""))
        if not path.is_absolute():
            root = os.environ.get("GPN_DATA_DIR")
            if root:
                path = Path(root) / path
        dataset["path"] = str(path)
    return dataset


def _build_graph_and_masks(cfg: dict, seed: int):
    dataset = _resolve_dataset(cfg)
    graph = evalharness.build_dataset(dataset, seed)
    drop = float(cfg.get("drop_edges", 0.0) or 0.0)
    if drop > 0.0:
        graph = graphcore.drop_edges(graph, drop, seed)
    split = cfg.get("split", {})
    masks = graphcore.make_splits(
        graph,
        int(split.get("per_class_train", 20)),
        int(split.get("per_class_val", 30)),
        split.get("mode", "random"),
        seed,
    )
    return graph, masks


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _cmd_train(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args.set, args.seed)
    train_cfg = _train_config(cfg)
    graph, masks = _build_graph_and_masks(cfg, train_cfg.seed)
    method = cfg.get("method", "gcn")
    out = Path(args.out)

    if method == "gcn":
        pred, report = bilevel.train_gcn_baseline(graph, masks, train_cfg)
        gen, head = None, 0
    elif method in ("gpn-foa", "gpn-fda"):
        spec_cfg = train_cfg
        if method == "gpn-fda" and train_cfg.approx != "FDA":
            spec_cfg = TrainConfig(**{**train_cfg.to_dict(), "approx": "FDA"})
        elif method == "gpn-foa" and train_cfg.approx != "FOA":
            spec_cfg = TrainConfig(**{**train_cfg.to_dict(), "approx": "FOA"})
        pred, gen, report = bilevel.train_gpn(graph, masks, spec_cfg)
        head = report.selected_head
    else:
        raise ConfigError(f"unknown method {method!r}")

    payload = report.to_dict()
    payload["config_hash"] = canonical_hash(cfg)
    payload["effective_config"] = cfg
    _write_json(out / "report.json", payload)
    models.save_checkpoint(out / "checkpoint", pred, gen, selected_head=head)
    print(f"{method}: test accuracy {report.test_accuracy:.2f}% "
          f"-> {out / 'report.json'}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args.set, args.seed)
    train_cfg = _train_config(cfg)
    graph, masks = _build_graph_and_masks(cfg, train_cfg.seed)
    pred, gen, head = models.load_checkpoint(args.checkpoint)
    acc = bilevel.evaluate_model(pred, gen, head, graph, masks)
    payload = {
        "test_accuracy": acc,
        "checkpoint": str(args.checkpoint),
        "config_hash": canonical_hash(cfg),
    }
    if args.out:
        _write_json(Path(args.out) / "eval.json", payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def _experiment_spec(cfg: dict, node_grid: bool) -> ExperimentSpec:
    exp = cfg.get("experiment", {})
    split = cfg.get("split", {})
    return ExperimentSpec(
        dataset=_resolve_dataset(cfg),
        method=cfg.get("method", "gcn"),
        split_mode=split.get("mode", "random"),
        per_class_train=int(split.get("per_class_train", 20)),
        per_class_val=int(split.get("per_class_val", 30)),
        drop_ratios=[0.0] if node_grid else list(exp.get("drop_ratios", [0.0])),
        node_ratios=list(exp.get("node_ratios", [1.0])) if node_grid else [1.0],
        n_seeds=int(exp.get("n_seeds", 5)),
        train=_train_config(cfg),
    )


def _cmd_sweep(args, node_grid: bool = False) -> int:
    cfg = _apply_overrides(_load_config(args.config), args.set, args.seed)
    spec = _experiment_spec(cfg, node_grid)
    table = evalharness.run_experiment(spec, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evalharness.write_results_json(table, out / "results.json")
    evalharness.write_results_csv(table, out / "results.csv")
    x_key = "node_ratio" if node_grid else "drop_ratio"
    evalharness.write_plot_csv(table, out / "plot.csv", x_key=x_key)
    for row in table.rows:
        print(f"{row.setting}: {row.mean:.2f} +- {row.std:.2f} ({row.n_seeds} seeds)")
    return 0


def _kink_free(rng: np.random.Generator, shape) -> np.ndarray:
    """Random values kept away from the ReLU kink for finite differencing."""
    x = rng.uniform(-1.5, 1.5, size=shape)
    return x + np.sign(x) * 0.1


def gradcheck_suite(seed: int = 0) -> list[tuple[str, float]]:
    """Finite-difference checks for every op plus both composite losses."""
    rng = np.random.default_rng(seed)
    labels3 = np.array([0, 1, 2])
    mask3 = np.ones(3, dtype=bool)
    results: list[tuple[str, float]] = []

    def check(name, build, leaves):
        results.append((name, diff.grad_check(build, leaves)))

    a34 = _kink_free(rng, (3, 4))
    b43 = _kink_free(rng, (4, 3))
    check("matmul", lambda t, vs: diff.frobenius_sq(diff.matmul(vs[0], vs[1])), [a34, b43])
    import scipy.sparse as sp
    s = sp.csr_matrix(np.abs(_kink_free(rng, (3, 3))) * (rng.random((3, 3)) < 0.7))
    check("sparse_dense_matmul",
          lambda t, vs: diff.frobenius_sq(diff.sparse_dense_matmul(s, vs[0])),
          [_kink_free(rng, (3, 4))])
    check("add", lambda t, vs: diff.frobenius_sq(diff.add(vs[0], vs[1])),
          [_kink_free(rng, (3, 4)), _kink_free(rng, (3, 4))])
    check("scale", lambda t, vs: diff.frobenius_sq(diff.scale(vs[0], 0.37)),
          [_kink_free(rng, (3, 4))])
    check("relu", lambda t, vs: diff.frobenius_sq(diff.relu(vs[0])), [_kink_free(rng, (3, 4))])
    check("transpose", lambda t, vs: diff.frobenius_sq(diff.transpose(vs[0])),
          [_kink_free(rng, (3, 4))])
    check("row_softmax", lambda t, vs: diff.frobenius_sq(diff.row_softmax(vs[0])),
          [_kink_free(rng, (3, 4))])
    check("masked_cross_entropy",
          lambda t, vs: diff.masked_cross_entropy(vs[0], labels3, mask3),
          [_kink_free(rng, (3, 4))])
    check("frobenius_sq", lambda t, vs: diff.frobenius_sq(vs[0]), [_kink_free(rng, (3, 4))])
    check("gram", lambda t, vs: diff.frobenius_sq(diff.gram(vs[0])), [_kink_free(rng, (3, 4))])
    check("elementwise_mul",
          lambda t, vs: diff.frobenius_sq(diff.elementwise_mul(vs[0], vs[1])),
          [_kink_free(rng, (3, 4)), _kink_free(rng, (3, 4))])
    check("cosine_gram", lambda t, vs: diff.frobenius_sq(diff.cosine_gram(vs[0])),
          [_kink_free(rng, (3, 4))])
    check("neg_sq_euclid_gram",
          lambda t, vs: diff.frobenius_sq(diff.neg_sq_euclid_gram(vs[0])),
          [_kink_free(rng, (3, 4))])
    check("sym_normalize",
          lambda t, vs: diff.frobenius_sq(diff.sym_normalize(diff.relu(vs[0]))),
          [np.abs(_kink_free(rng, (4, 4)))])
    check("topk_mask", lambda t, vs: diff.frobenius_sq(diff.topk_mask(vs[0], 2)),
          [np.abs(_kink_free(rng, (4, 4)))])

    graph = graphcore.generate_sbm(3, 2, 0.8, 0.3, 3, 0.4, seed=seed + 1)
    norm_prior = graphcore.normalize_adjacency(graph.adjacency).values
    prior_dense = np.asarray(graph.adjacency.todense(), dtype=np.float64)
    labels = graph.labels
    train_mask = np.array([True, False, True, False, True, False])
    val_mask = ~train_mask

    def lower(t, vs):
        x = t.leaf(graph.features)
        logits = models.gcn_forward_var(t, vs, x, norm_prior)
        return diff.masked_cross_entropy(logits, labels, train_mask)

    w1 = _kink_free(rng, (3, 4))
    w2 = _kink_free(rng, (4, 2))
    check("lower_loss", lower, [w1, w2])

    def upper(t, vs):
        x = t.leaf(graph.features)
        _, combined = models.structure_var(
            t, vs[2:], x, norm_prior, prior_dense, "dot", True, None
        )
        norm = diff.sym_normalize(combined)
        logits = models.gcn_forward_var(t, vs[:2], x, norm)
        return diff.masked_cross_entropy(logits, labels, val_mask)

    t1 = _kink_free(rng, (3, 4))
    t2 = _kink_free(rng, (4, 4))
    check("upper_loss", upper, [w1, w2, t1, t2])
    return results


def _cmd_gradcheck(args) -> int:
    results = gradcheck_suite(seed=args.seed if args.seed is not None else 0)
    worst = 0.0
    for name, err in results:
        print(f"{name}: max rel error {err:.3e}")
        worst = max(worst, err)
    print(f"overall max rel error {worst:.3e}")
    return 0 if worst < 1e-5 else 1


def _cmd_convert_check(args) -> int:
    problems = graphcore.validate_dataset_dir(args.path)
    if problems:
        for p in problems:
            print(f"FAIL: {p}", file=sys.stderr)
        return 1
    graph = graphcore.load_dataset(args.path)
    print(f"ok: {graph.n_nodes} nodes, {graph.n_edges} edges, "
          f"{graph.n_features} features, {graph.n_classes} classes")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpn")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default="out" if needs_out else None, help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="dotted config override, repeatable")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)

    common(sub.add_parser("train", help="train one model, write report + checkpoint"))
    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    common(p_eval, needs_out=False)
    p_eval.add_argument("--checkpoint", required=True)
    common(sub.add_parser("sweep", help="edge-drop grid over seeds"))
    common(sub.add_parser("inductive", help="partial-node grid over seeds"))
    p_grad = sub.add_parser("gradcheck", help="finite-difference check of every op")
    p_grad.add_argument("--seed", type=int, default=None)
    p_conv = sub.add_parser("convert-check", help="validate a neutral dataset directory")
    p_conv.add_argument("path")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "sweep":
            return _cmd_sweep(args, node_grid=False)
        if args.command == "inductive":
            return _cmd_sweep(args, node_grid=True)
        if args.command == "gradcheck":
            return _cmd_gradcheck(args)
        if args.command == "convert-check":
            return _cmd_convert_check(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
