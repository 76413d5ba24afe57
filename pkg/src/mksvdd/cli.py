"""Command line entry point for reproducible one-class experiments.

Subcommands: fit, eval, experiment, gen2d, gram, graph-gram. Runs are
driven by JSON config files (flags override file values); every file is
written atomically and all randomness flows from seeds recorded in the
outputs, so re-running a logged config reproduces its files byte for
byte.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data import SampleMatrix, gen_2d_target, load_csv, split
from .evaluation import _select_kernels, grid_search, precision_recall
from .evaluation import auc as auc_metric
from .graphs import PathKernelConfig, build_graph_gram, collection_from_json
from .kernels import (
    KernelDictionary,
    KernelSpec,
    load_manifest,
    write_manifest,
)
from .mkl import METHOD_FAMILIES, fit_method
from .models import model_from_dict, model_to_dict, score, score_ids

WORKERS_ENV = "MKSVDD_WORKERS"


class ConfigError(ValueError):
    pass


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _csv_text(header, rows, config_hash: str) -> str:
    lines = [f"# mksvdd {__version__} config {config_hash}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def _load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def _build_dataset(dcfg: dict) -> SampleMatrix:
    kind = dcfg.get("kind")
    if kind == "gen2d":
        return gen_2d_target(
            int(dcfg.get("seed", 0)),
            int(dcfg.get("n_areas", 1)),
            int(dcfg.get("n_points", 50)),
        )
    if kind == "csv":
        return load_csv(
            dcfg["path"],
            label_column=dcfg.get("label_column"),
            standardize=bool(dcfg.get("standardize", False)),
        )
    raise ConfigError(f"unknown dataset kind: {kind!r}")


def _kernel_setup(kcfg: dict):
    """Either a list of KernelSpec or a mapping of precomputed matrices."""
    if "manifest" in kcfg:
        return load_manifest(kcfg["manifest"])
    specs: list[KernelSpec] = []
    for bw in kcfg.get("rbf", []):
        specs.append(KernelSpec.rbf(float(bw)))
    for deg in kcfg.get("poly", []):
        specs.append(KernelSpec.poly(int(deg)))
    if not specs:
        raise ConfigError("kernel config names no kernels")
    return specs


def _split_plan(matrix: SampleMatrix, scfg: dict | None, seed=None):
    scfg = dict(scfg or {"mode": "unsupervised"})
    mode = scfg.get("mode", "unsupervised")
    use_seed = int(scfg.get("seed", 0) if seed is None else seed)
    if mode == "unsupervised":
        return split(matrix, "unsupervised", use_seed)
    return split(
        matrix,
        "supervised",
        use_seed,
        train_count=scfg.get("train_count"),
        train_fraction=scfg.get("train_fraction"),
        validation_count=int(scfg.get("validation_count", 0)),
    )


def _dictionary_for(kernels, matrix: SampleMatrix, train_ids) -> KernelDictionary:
    if isinstance(kernels, dict):
        return KernelDictionary.from_matrices(
            kernels, train_ids=matrix.rows_for(train_ids)
        )
    return KernelDictionary.from_data(kernels, matrix.subset(train_ids))


def _mkl_options(cfg: dict) -> dict:
    raw = dict(cfg.get("mkl", {}))
    allowed = {"gap_tol", "max_outer_iters", "kkt_tol", "ls_shrink", "ls_max_probes"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown mkl options: {sorted(unknown)}")
    return raw


def cmd_gen2d(args) -> int:
    matrix = gen_2d_target(args.seed, args.n_areas, args.n_points)
    config = {
        "command": "gen2d",
        "seed": args.seed,
        "n_areas": args.n_areas,
        "n_points": args.n_points,
    }
    rows = [
        (float(x[0]), float(x[1]), int(lab))
        for x, lab in zip(matrix.features, matrix.labels)
    ]
    _atomic_write(
        Path(args.out), _csv_text(["x1", "x2", "label"], rows, _config_hash(config))
    )
    return 0


def cmd_fit(args) -> int:
    config = _load_config(args.config)
    if args.method:
        config["method"] = args.method
    if args.c_value is not None:
        config["C"] = args.c_value
    if args.lam is not None:
        config["lambda"] = args.lam
    out_dir = Path(args.out_dir or config.get("output_dir", "."))

    method = config.get("method")
    if method not in METHOD_FAMILIES:
        raise ConfigError(f"method must be one of {sorted(METHOD_FAMILIES)}")
    matrix = _build_dataset(config.get("dataset", {}))
    plan = _split_plan(matrix, config.get("split"))
    kernels = _kernel_setup(config.get("kernels", {}))
    dictionary = _dictionary_for(kernels, matrix, plan.train_ids)
    model, trace = fit_method(
        method,
        dictionary,
        float(config.get("C", 0.1)),
        float(config.get("lambda", 0.0)),
        **_mkl_options(config),
    )

    payload = {
        "method": method,
        "lambda": float(config.get("lambda", 0.0)) if METHOD_FAMILIES[method][2] else 0.0,
        "model": model_to_dict(model),
        "train_source": {
            "dataset": config.get("dataset", {}),
            "split": plan.to_json(),
        },
        "version": __version__,
    }
    _atomic_write(out_dir / "model.json", json.dumps(payload, indent=2, sort_keys=True))
    if trace is not None:
        rows = [
            [s.iteration, s.objective, s.gap, s.card, s.step_size]
            + [float(w) for w in s.weights]
            for s in trace.steps
        ]
        header = ["iteration", "objective", "gap", "card", "step_size"] + [
            f"d{m}" for m in range(dictionary.nk)
        ]
        _atomic_write(
            out_dir / "trace.csv", _csv_text(header, rows, _config_hash(config))
        )
    return 0


def _load_model(path):
    raw = json.loads(Path(path).read_text())
    source = raw["train_source"]
    plan_raw = json.loads(source["split"])
    kernels_cfg = raw["model"]["kernels"]
    precomputed = all(k["kind"] == "precomputed" for k in kernels_cfg)
    if precomputed:
        raise ConfigError(
            "eval of precomputed-kernel models needs --manifest (see README)"
        )
    matrix = _build_dataset(source["dataset"])
    specs = [KernelSpec.from_dict(k) for k in kernels_cfg]
    dictionary = KernelDictionary.from_data(
        specs, matrix.subset(np.asarray(plan_raw["train_ids"]))
    )
    return raw, model_from_dict(raw["model"], dictionary)


def _load_precomputed_model(path, manifest_path):
    raw = json.loads(Path(path).read_text())
    matrices = load_manifest(manifest_path)
    plan_raw = json.loads(raw["train_source"]["split"])
    ordered = {
        k["matrix_id"]: matrices[k["matrix_id"]] for k in raw["model"]["kernels"]
    }
    dictionary = KernelDictionary.from_matrices(
        ordered, train_ids=np.asarray(plan_raw["train_ids"])
    )
    return raw, model_from_dict(raw["model"], dictionary)


def cmd_eval(args) -> int:
    if args.manifest:
        raw, model = _load_precomputed_model(args.model, args.manifest)
        if args.test_ids == "all":
            n = model.dictionary.full_matrices[0].shape[0]
            test_ids = np.arange(n)
        else:
            test_ids = np.array([int(t) for t in args.test_ids.split(",")])
        scores = score_ids(model, test_ids)
        ids = test_ids
        labels = None
    else:
        raw, model = _load_model(args.model)
        test = load_csv(args.data, label_column=args.label_column)
        scores = score(model, test.features)
        ids = test.ids
        labels = test.labels

    config = {"command": "eval", "model": raw["method"], "data": str(args.data)}
    chash = _config_hash(config)
    out_dir = Path(args.out_dir)
    score_rows = [
        (int(i), float(s)) + ((int(l),) if labels is not None else ())
        for i, s, l in zip(
            ids, scores, labels if labels is not None else itertools.repeat(None)
        )
    ]
    headers = ["id", "outlier_score"] + (["label"] if labels is not None else [])
    _atomic_write(out_dir / "scores.csv", _csv_text(headers, score_rows, chash))

    both_classes = labels is not None and len(np.unique(labels)) == 2
    if both_classes:
        value = auc_metric(scores, labels)
        curve = precision_recall(scores, labels)
        text = _csv_text(
            ["recall", "precision"], [tuple(map(float, r)) for r in curve], chash
        )
        text = text.replace("\n", f"\n# auc {value!r}\n", 1)
        _atomic_write(out_dir / "report.csv", text)
    elif labels is not None:
        print("note: single-class labels; skipping report.csv (AUC undefined)")
    return 0


def _resolve_seeds(config: dict) -> list[int]:
    reps = int(config.get("repetitions", 1))
    if reps < 1:
        raise ConfigError("repetitions must be >= 1")
    seeds = config.get("seeds")
    if seeds is None:
        base = int(config.get("seed", 0))
        seeds = [base + i for i in range(reps)]
    if len(seeds) != reps:
        raise ConfigError("seeds list must match repetitions")
    return [int(s) for s in seeds]


def _experiment_cell(payload: dict) -> dict:
    """One (repetition, train-size) cell; top-level for process pools."""
    config = payload["config"]
    seed = payload["seed"]
    train_size = payload["train_size"]
    dcfg = dict(config.get("dataset", {}))
    if dcfg.get("kind") == "gen2d":
        dcfg["seed"] = seed
    matrix = _build_dataset(dcfg)

    scfg = dict(config.get("split") or {"mode": "unsupervised"})
    if train_size is not None:
        scfg["train_count"] = train_size
        scfg.pop("train_fraction", None)
    plan = _split_plan(matrix, scfg, seed=seed)

    kernels = _kernel_setup(config.get("kernels", {}))
    methods = config.get("methods") or [config.get("method")]
    grids = config.get("grids", {})
    c_grid = grids.get("C", [config.get("C", 0.1)])
    lambda_grid = grids.get("lambda", [config.get("lambda", 0.0)])
    policy = config.get("policy", "auc")

    result = grid_search(
        matrix,
        kernels,
        methods,
        c_grid,
        lambda_grid,
        policy=policy,
        plan=plan,
        mkl_options=_mkl_options(config),
    )
    rows = []
    for method in methods:
        best = result.best.get(method)
        if best is None:
            errors = {c.error for c in result.table if c.method == method}
            rows.append(
                {"method": method, "error": "; ".join(sorted(filter(None, errors)))}
            )
            continue
        if policy == "auc":
            value = best.score
        else:
            # refit the selected cell and report test AUC; a test set
            # without both classes is a recorded failure, not a crash
            try:
                dictionary = _dictionary_for(kernels, matrix, plan.train_ids)
                sub = dictionary
                if best.kernel_index is not None:
                    sub = _select_kernels(dictionary, best.kernel_index)
                model, _ = fit_method(
                    method, sub, best.C, best.lam, **_mkl_options(config)
                )
                if isinstance(kernels, dict):
                    test_scores = score_ids(model, matrix.rows_for(plan.test_ids))
                else:
                    test_scores = score(model, matrix.subset(plan.test_ids).features)
                value = auc_metric(test_scores, matrix.subset(plan.test_ids).labels)
            except Exception as exc:
                rows.append({"method": method, "error": str(exc)})
                continue
        rows.append(
            {
                "method": method,
                "C": best.C,
                "lambda": best.lam,
                "kernel_index": best.kernel_index,
                "auc": value,
            }
        )
    return {"seed": seed, "train_size": train_size, "methods": rows}


def cmd_experiment(args) -> int:
    config = _load_config(args.config)
    out_dir = Path(args.out_dir or config.get("output_dir", "."))
    seeds = _resolve_seeds(config)
    train_sizes = config.get("train_sizes") or [None]
    methods = config.get("methods") or [config.get("method")]
    for m in methods:
        if m not in METHOD_FAMILIES:
            raise ConfigError(f"method must be one of {sorted(METHOD_FAMILIES)}")

    payloads = [
        {"config": config, "seed": seed, "train_size": size}
        for size in train_sizes
        for seed in seeds
    ]
    workers = _resolve_workers(args.workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_experiment_cell, payloads))
    else:
        outcomes = [_experiment_cell(p) for p in payloads]

    header = [
        "row", "train_size", "repetition", "seed",
        "method", "C", "lambda", "kernel_index", "auc", "error",
    ]
    rows = []
    failed = False
    by_group: dict = {}
    for idx, outcome in enumerate(outcomes):
        rep = idx % len(seeds)
        for m in outcome["methods"]:
            if "error" in m:
                failed = True
                rows.append(
                    ("rep", outcome["train_size"], rep, outcome["seed"],
                     m["method"], None, None, None, None, m["error"])
                )
                continue
            rows.append(
                ("rep", outcome["train_size"], rep, outcome["seed"],
                 m["method"], m["C"], m["lambda"], m["kernel_index"],
                 m["auc"], None)
            )
            by_group.setdefault((outcome["train_size"], m["method"]), []).append(
                m["auc"]
            )
    for (size, method), values in sorted(
        by_group.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])
    ):
        arr = np.asarray(values)
        rows.append(("mean", size, None, None, method, None, None, None,
                     float(arr.mean()), None))
        rows.append(("std", size, None, None, method, None, None, None,
                     float(arr.std()), None))

    _atomic_write(
        out_dir / "results.csv", _csv_text(header, rows, _config_hash(config))
    )
    return 1 if failed else 0


def cmd_gram(args) -> int:
    matrix = load_csv(args.data, label_column=args.label_column)
    specs = []
    for bw in args.rbf or []:
        specs.append(KernelSpec.rbf(bw))
    for deg in args.poly or []:
        specs.append(KernelSpec.poly(deg))
    if not specs:
        raise ConfigError("give at least one --rbf or --poly kernel")
    from .kernels import gram as compute_gram

    entries = []
    for spec in specs:
        matrix_id = (
            f"rbf_{spec.bandwidth:g}" if spec.kind == "rbf" else f"poly_{spec.degree}"
        )
        entries.append(
            {
                "id": matrix_id,
                "matrix": compute_gram(spec, matrix).values,
                **spec.to_dict(),
            }
        )
    write_manifest(args.out_dir, entries)
    return 0


def cmd_graph_gram(args) -> int:
    config = _load_config(args.config)
    collections = collection_from_json(args.graphs)
    grid_cfg = config.get("grid", {})
    base = {
        "bag_size": int(config.get("bag_size", 20)),
        "seed": int(config.get("seed", 0)),
        "distance_mode": config.get("distance_mode", "product"),
    }
    axes = [
        [("max_length", int(v)) for v in grid_cfg.get("max_lengths", [3])],
        [("sigma", float(v)) for v in grid_cfg.get("sigmas", [1.0])],
        [("vertex_bandwidth", float(v)) for v in grid_cfg.get("vertex_bandwidths", [1.0])],
        [("edge_bandwidth", float(v)) for v in grid_cfg.get("edge_bandwidths", [1.0])],
    ]
    configs = [
        PathKernelConfig(**dict(combo), **base)
        for combo in itertools.product(*axes)
    ]
    entries = []
    for name in sorted(collections):
        _, function_entries = build_graph_gram(
            collections[name], configs, id_prefix=name
        )
        for e in function_entries:
            e["function"] = name
        entries.extend(function_entries)
    write_manifest(args.out_dir, entries)
    return 0


def _resolve_workers(flag_value: int | None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, flag_value or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mksvdd",
        description="One-class learning with multiple kernels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen2d", help="generate a synthetic 2D target class CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-areas", type=int, default=1)
    p.add_argument("--n-points", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen2d)

    p = sub.add_parser("fit", help="fit one model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--method", choices=sorted(METHOD_FAMILIES))
    p.add_argument("--c-value", type=float, dest="c_value")
    p.add_argument("--lambda", type=float, dest="lam")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score test data with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="test CSV (feature-kernel models)")
    p.add_argument("--label-column")
    p.add_argument("--manifest", help="kernel manifest (precomputed models)")
    p.add_argument("--test-ids", default="all",
                   help="comma-separated ids for precomputed models")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a repeated grid experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gram", help="precompute kernel matrices from a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--label-column")
    p.add_argument("--rbf", type=float, action="append")
    p.add_argument("--poly", type=int, action="append")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("graph-gram", help="bag-of-paths Grams for labeled graphs")
    p.add_argument("--graphs", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_graph_gram)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
