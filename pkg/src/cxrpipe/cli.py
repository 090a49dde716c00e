"""Command-line front end: every pipeline stage as a subcommand, plus a
`pipeline` orchestrator that chains them over a run directory.

Exit codes: 0 success, 1 usage or configuration error, 2 data/contract
error. The orchestrator records each stage in `run.json` (schema v1)
with a cache key and artifact digests; a stage whose key and artifacts
are unchanged is skipped, so re-running an untouched pipeline is a
no-op. One run directory is owned by one process at a time (lock file).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .classifiers import (
    CnnConfig,
    ForestParams,
    KernelSpec,
    cnn_train,
    load_model,
    save_model,
    train_forest,
    train_svm,
)
from .config import (
    MODEL_KINDS,
    UNSUPPORTED_MODELS,
    ConfigError,
    RunConfig,
    load_config,
    stage_seed,
)
from .dataset import (
    ClassLabel,
    filter_split,
    ingest,
    load_manifest,
    save_manifest,
    sha256_file,
    split,
)
from .errors import DataError, PipelineError
from .explain import LimeParams, explain_all, render_overlay, segment
from .features import (
    HogParams,
    hog,
    load_features,
    load_labels,
    parse_descriptor,
    pixel_descriptor_id,
    save_features,
    save_labels,
)
from .imageio import quantize, read_grayscale, write_png
from .imaging import enhance, resize
from .metrics import confusion, format_table, report, report_to_dict
from .resampling import (
    SmoteParams,
    fit_resample,
    parse_strategy_spec,
    preset_targets,
)

logger = logging.getLogger(__name__)

RUN_SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _side(text: str):
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected an integer or 'auto', got {text!r}"
        ) from None


def _ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected three comma-separated ratios, got {text!r}"
        )
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric ratio in {text!r}") from None


# ---------------------------------------------------------------- stages


def run_preprocess(
    manifest_path, out_dir, out_manifest, gamma: float, side: int
):
    """Resize + enhance every image; write PNGs and a rewritten manifest."""
    manifest = load_manifest(manifest_path)
    out_dir = Path(out_dir)
    new_records = []
    for i, rec in enumerate(manifest.records):
        img = read_grayscale(rec.path)
        enhanced, _ = enhance(resize(img, side, side), gamma=gamma)
        class_dir = out_dir / ClassLabel(rec.label).name
        class_dir.mkdir(parents=True, exist_ok=True)
        dest = class_dir / f"{i:05d}_{Path(rec.path).stem}.png"
        write_png(dest, quantize(enhanced))
        new_records.append(
            replace(rec, path=dest.resolve(), sha256=sha256_file(dest))
        )
    save_manifest(replace(manifest, records=tuple(new_records)), out_manifest)


def _image_matrix(records, kind: str, side: int, hog_params: HogParams):
    """Stack one descriptor row per record."""
    rows = []
    for rec in records:
        img = read_grayscale(rec.path)
        if img.shape != (side, side):
            img = resize(img, side, side)
        if kind == "hog":
            rows.append(hog(img, hog_params))
        else:
            rows.append((img / 255.0).reshape(-1))
    return np.stack(rows)


def run_features(manifest_path, out_dir, kind: str, side: int, hog_params):
    """Write per-split FEAT1 matrices + label sidecars; returns the paths."""
    manifest = load_manifest(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    descriptor = (
        hog_params.descriptor_id(side) if kind == "hog" else pixel_descriptor_id(side)
    )
    produced = {}
    for split_name in ("train", "val", "test"):
        records = filter_split(manifest, split_name)
        if not records:
            continue
        X = _image_matrix(records, kind, side, hog_params)
        feat = out_dir / f"{split_name}.feat"
        labels = out_dir / f"{split_name}.labels.csv"
        save_features(feat, X, descriptor)
        save_labels(labels, [rec.label for rec in records])
        produced[split_name] = (feat, labels)
    if "train" not in produced:
        raise DataError(f"{manifest_path}: no records assigned to the train split")
    return produced


def run_resample(
    feat_path, labels_path, strategy_text: str, absolute: bool,
    k_neighbors: int, seed: int, out_feat, out_labels,
):
    X, descriptor = load_features(feat_path)
    y = load_labels(labels_path)
    if X.shape[0] != y.shape[0]:
        raise DataError(
            f"{feat_path}: {X.shape[0]} rows but {y.shape[0]} labels"
        )
    counts = {
        label: int((y == label).sum())
        for label in ClassLabel
        if (y == label).any()
    }
    if strategy_text in ("smote1", "smote2"):
        strategy = preset_targets(strategy_text, counts, absolute=absolute)
    else:
        strategy = parse_strategy_spec(strategy_text, counts)
    Xr, yr = fit_resample(
        X.astype(np.float64), y, strategy, SmoteParams(k_neighbors, seed)
    )
    save_features(out_feat, Xr.astype(np.float32), descriptor)
    save_labels(out_labels, yr)


def run_train(feat_path, labels_path, model_kind: str, opts: dict, seed: int, out_model):
    X, descriptor = load_features(feat_path)
    y = load_labels(labels_path)
    if X.shape[0] != y.shape[0]:
        raise DataError(f"{feat_path}: {X.shape[0]} rows but {y.shape[0]} labels")
    feature_kind, _, side = parse_descriptor(descriptor)
    X = X.astype(np.float64)
    if model_kind == "svm":
        model = train_svm(
            X,
            y,
            C=opts["svm_c"],
            kernel=KernelSpec(kind=opts["kernel"], gamma=opts["gamma"]),
            tol=opts["tol"],
            seed=seed,
        )
    elif model_kind == "forest":
        params = ForestParams(
            n_trees=opts["n_trees"],
            max_depth=opts["max_depth"],
            min_leaf=opts["min_leaf"],
            max_features=opts["max_features"],
            seed=seed,
        )
        model = train_forest(X, y, params)
    elif model_kind == "cnn":
        if feature_kind != "pixels":
            raise DataError(
                f"cnn training needs pixel tensors; {feat_path} holds "
                f"{descriptor!r} (set [features] kind = pixels)"
            )
        config = CnnConfig(
            input_side=side,
            channels=opts["channels"],
            hidden=opts["hidden"],
            n_classes=len(ClassLabel),
            learning_rate=opts["learning_rate"],
            epochs=opts["epochs"],
            batch_size=opts["batch_size"],
            seed=seed,
        )
        model = cnn_train(X.reshape(-1, side, side), y, config)
    else:
        raise ConfigError(f"unknown model kind {model_kind!r}")
    meta = {
        "model": model_kind,
        "descriptor": descriptor,
        "classes": [c.name for c in ClassLabel],
        "seed": seed,
    }
    save_model(model, out_model, meta=meta)


def _batch_scores(model, model_kind: str, X: np.ndarray, side: int) -> np.ndarray:
    if model_kind == "cnn":
        return model.predict_proba(X.reshape(-1, side, side))
    return model.predict_proba(X)


def run_evaluate(model_path, split_inputs: dict, out_json, out_table) -> dict:
    """split_inputs: {split_name: (features_path, labels_path)}."""
    model, meta = load_model(model_path, with_meta=True)
    model_kind = meta["model"]
    descriptor = meta["descriptor"]
    _, _, side = parse_descriptor(descriptor)
    splits = {}
    rows = []
    for split_name, (feat_path, labels_path) in split_inputs.items():
        X, found = load_features(feat_path)
        if found != descriptor:
            raise DataError(
                f"{feat_path}: descriptor {found!r} does not match the "
                f"model's {descriptor!r}"
            )
        y = load_labels(labels_path)
        scores = _batch_scores(model, model_kind, X.astype(np.float64), side)
        y_pred = np.argmax(scores, axis=1)
        rep = report(confusion(y, y_pred, len(ClassLabel)))
        splits[split_name] = report_to_dict(rep)
        rows.append((f"{model_kind} [{split_name}]", rep))
    payload = {"model": model_kind, "descriptor": descriptor, "splits": splits}
    Path(out_json).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    table = format_table(rows)
    Path(out_table).write_text(table)
    return payload


def _make_predict_fn(model, model_kind, feature_kind, hog_params, side):
    if model_kind == "cnn":
        return lambda stack: model.predict_proba(np.asarray(stack) / 255.0)
    if feature_kind == "hog":
        def fn(stack):
            X = np.stack([hog(s, hog_params) for s in stack])
            return model.predict_proba(X)
        return fn

    def fn(stack):
        X = (np.asarray(stack, dtype=np.float64) / 255.0).reshape(len(stack), -1)
        return model.predict_proba(X)
    return fn


def run_explain(
    model_path, manifest_path, out_dir, params: LimeParams, count: int
) -> list[Path]:
    """Per-class overlays + a weight dump for the first `count` test images
    of each class. Returns the written paths (stable order)."""
    model, meta = load_model(model_path, with_meta=True)
    model_kind = meta["model"]
    feature_kind, hog_params, side = parse_descriptor(meta["descriptor"])
    manifest = load_manifest(manifest_path)
    test_records = filter_split(manifest, "test")
    chosen = []
    taken = {label: 0 for label in ClassLabel}
    for rec in test_records:
        if taken[rec.label] < count:
            taken[rec.label] += 1
            chosen.append(rec)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    predict_fn = _make_predict_fn(model, model_kind, feature_kind, hog_params, side)
    written = []
    for rec in chosen:
        img = read_grayscale(rec.path)
        if img.shape != (side, side):
            img = resize(img, side, side)
        seg_map = segment(img, params.grid)
        explanations = explain_all(img, predict_fn, params)
        stem = Path(rec.path).stem
        dump = {
            "image": str(rec.path),
            "true_label": ClassLabel(rec.label).name,
            "params": asdict(params),
            "classes": {},
        }
        for e in explanations:
            name = ClassLabel(e.class_id).name
            overlay = render_overlay(img, seg_map, e, params.top_k)
            png = out_dir / f"{stem}.explain.{name}.png"
            write_png(png, overlay)
            written.append(png)
            dump["classes"][name] = {
                "segment_weights": [float(w) for w in e.segment_weights],
                "intercept": e.intercept,
                "fidelity_r2": e.fidelity_r2,
                "num_samples": e.num_samples,
            }
        sidecar = out_dir / f"{stem}.explain.json"
        sidecar.write_text(json.dumps(dump, sort_keys=True, indent=2) + "\n")
        written.append(sidecar)
    return written


# ---------------------------------------------------------- orchestration


def _key(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _tree_signature(root: Path) -> str:
    """Cheap change detector for the input corpus: paths, sizes, mtimes."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus root is not a directory: {root}")
    lines = []
    for p in sorted(root.rglob("*")):
        if p.is_file():
            st = p.stat()
            lines.append(f"{p.relative_to(root)}|{st.st_size}|{st.st_mtime_ns}")
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def _stage(run: dict, out_dir: Path, name: str, key: str, artifacts, builder):
    """Run `builder` unless the recorded key and artifact digests still hold."""
    rel = [os.path.relpath(Path(p).resolve(), out_dir.resolve()) for p in artifacts]
    prev = run["stages"].get(name)
    if (
        prev is not None
        and prev["key"] == key
        and set(prev["artifacts"]) == set(rel)
        and all(
            (out_dir / r).is_file() and sha256_file(out_dir / r) == digest
            for r, digest in prev["artifacts"].items()
        )
    ):
        logger.info("stage %s: cached", name)
        return
    logger.info("stage %s: running", name)
    t0 = time.perf_counter()
    builder()
    seconds = time.perf_counter() - t0
    recorded = {}
    for r in rel:
        path = out_dir / r
        if not path.is_file():
            raise DataError(f"stage {name} did not produce {path}")
        recorded[r] = sha256_file(path)
    run["stages"][name] = {
        "key": key,
        "artifacts": recorded,
        "seconds": round(seconds, 3),
    }


@contextmanager
def _run_lock(out_dir: Path):
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError(
            f"run directory is locked: {lock} (remove the file if stale)"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _load_run(out_dir: Path, config: RunConfig) -> dict:
    path = out_dir / "run.json"
    digest = config.digest()
    condition = config.smote_strategy
    if config.smote_absolute and condition in ("smote1", "smote2"):
        condition += "/absolute"
    fresh = {
        "schema": RUN_SCHEMA,
        "config_digest": digest,
        "seed": config.seed,
        "labels": {"condition": condition, "model": config.model_kind},
        "stages": {},
    }
    if not path.is_file():
        return fresh
    try:
        run = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: corrupt run report ({exc})") from None
    if run.get("schema") != RUN_SCHEMA:
        raise DataError(
            f"{path}: unsupported run.json schema {run.get('schema')!r}, "
            f"expected {RUN_SCHEMA}"
        )
    if run.get("config_digest") != digest:
        logger.info("config changed; starting a fresh run record")
        return fresh
    return run


def _save_run(out_dir: Path, run: dict) -> None:
    (out_dir / "run.json").write_text(
        json.dumps(run, sort_keys=True, indent=2) + "\n"
    )


def _pipeline(config: RunConfig) -> None:
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with _run_lock(out):
        run = _load_run(out, config)
        digests: dict[str, str] = {}

        def done(name: str) -> None:
            digests.update(run["stages"][name]["artifacts"])
            _save_run(out, run)

        def dg(path) -> str:
            return digests[os.path.relpath(Path(path).resolve(), out.resolve())]

        ingest_csv = out / "manifest.ingest.csv"
        _stage(
            run, out, "ingest",
            _key({
                "root": str(config.dataset_root.resolve()),
                "tree": _tree_signature(config.dataset_root),
            }),
            [ingest_csv],
            lambda: save_manifest(ingest(config.dataset_root), ingest_csv),
        )
        done("ingest")

        split_csv = out / "manifest.csv"
        split_seed = stage_seed(config.seed, "split")
        _stage(
            run, out, "split",
            _key({
                "manifest": dg(ingest_csv),
                "ratios": list(config.ratios),
                "seed": split_seed,
            }),
            [split_csv],
            lambda: save_manifest(
                split(load_manifest(ingest_csv), config.ratios, split_seed),
                split_csv,
            ),
        )
        done("split")

        enhanced_csv = out / "manifest.enhanced.csv"
        _stage(
            run, out, "preprocess",
            _key({
                "manifest": dg(split_csv),
                "gamma": config.gamma,
                "side": config.side,
            }),
            [enhanced_csv],
            lambda: run_preprocess(
                split_csv, out / "enhanced", enhanced_csv, config.gamma, config.side
            ),
        )
        done("preprocess")

        manifest = load_manifest(enhanced_csv)
        present = [
            s for s in ("train", "val", "test") if filter_split(manifest, s)
        ]
        feat_dir = out / "features"
        feat_paths = {
            s: (feat_dir / f"{s}.feat", feat_dir / f"{s}.labels.csv")
            for s in present
        }
        _stage(
            run, out, "features",
            _key({
                "manifest": dg(enhanced_csv),
                "kind": config.feature_kind,
                "hog": asdict(config.hog) if config.feature_kind == "hog" else None,
                "side": config.feature_side,
            }),
            [p for pair in feat_paths.values() for p in pair],
            lambda: run_features(
                enhanced_csv, feat_dir, config.feature_kind,
                config.feature_side, config.hog,
            ),
        )
        done("features")

        train_feat, train_labels = feat_paths["train"]
        if config.smote_strategy != "off":
            res_feat = feat_dir / "train.resampled.feat"
            res_labels = feat_dir / "train.resampled.labels.csv"
            smote_seed = stage_seed(config.seed, "resample")
            _stage(
                run, out, "resample",
                _key({
                    "features": dg(train_feat),
                    "labels": dg(train_labels),
                    "strategy": config.smote_strategy,
                    "absolute": config.smote_absolute,
                    "k": config.k_neighbors,
                    "seed": smote_seed,
                }),
                [res_feat, res_labels],
                lambda: run_resample(
                    train_feat, train_labels, config.smote_strategy,
                    config.smote_absolute, config.k_neighbors, smote_seed,
                    res_feat, res_labels,
                ),
            )
            done("resample")
            train_feat, train_labels = res_feat, res_labels

        model_bin = out / "model.bin"
        train_seed = stage_seed(config.seed, "train")
        opts = _train_opts_from_config(config)
        _stage(
            run, out, "train",
            _key({
                "features": dg(train_feat),
                "labels": dg(train_labels),
                "model": config.model_kind,
                "opts": _jsonable(opts),
                "seed": train_seed,
            }),
            [model_bin],
            lambda: run_train(
                train_feat, train_labels, config.model_kind, opts,
                train_seed, model_bin,
            ),
        )
        done("train")

        eval_inputs = {
            s: feat_paths[s] for s in ("val", "test") if s in feat_paths
        }
        if not eval_inputs:
            raise DataError("no val or test split present; nothing to evaluate")
        metrics_json = out / "metrics.json"
        metrics_txt = out / "metrics.txt"
        _stage(
            run, out, "evaluate",
            _key({
                "model": dg(model_bin),
                "inputs": {
                    s: [dg(f), dg(l)] for s, (f, l) in sorted(eval_inputs.items())
                },
            }),
            [metrics_json, metrics_txt],
            lambda: run_evaluate(model_bin, eval_inputs, metrics_json, metrics_txt),
        )
        done("evaluate")

        if config.explain_count > 0 and "test" in feat_paths:
            explain_dir = out / "explain"
            lime = replace(config.lime, seed=stage_seed(config.seed, "explain"))
            expected = _expected_explain_outputs(
                enhanced_csv, explain_dir, config.explain_count
            )
            _stage(
                run, out, "explain",
                _key({
                    "model": dg(model_bin),
                    "manifest": dg(enhanced_csv),
                    "lime": asdict(lime),
                    "count": config.explain_count,
                }),
                expected,
                lambda: run_explain(
                    model_bin, enhanced_csv, explain_dir, lime, config.explain_count
                ),
            )
            done("explain")

        print((out / "metrics.txt").read_text(), end="")


def _expected_explain_outputs(manifest_path, explain_dir, count: int) -> list[Path]:
    manifest = load_manifest(manifest_path)
    taken = {label: 0 for label in ClassLabel}
    outputs = []
    for rec in filter_split(manifest, "test"):
        if taken[rec.label] >= count:
            continue
        taken[rec.label] += 1
        stem = Path(rec.path).stem
        for label in ClassLabel:
            outputs.append(explain_dir / f"{stem}.explain.{label.name}.png")
        outputs.append(explain_dir / f"{stem}.explain.json")
    return outputs


def _train_opts_from_config(config: RunConfig) -> dict:
    return {
        "svm_c": config.svm_c,
        "kernel": config.svm_kernel.kind,
        "gamma": config.svm_kernel.gamma,
        "tol": config.svm_tol,
        "n_trees": config.forest.n_trees,
        "max_depth": config.forest.max_depth,
        "min_leaf": config.forest.min_leaf,
        "max_features": config.forest.max_features,
        "channels": config.cnn_channels,
        "hidden": config.cnn_hidden,
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
    }


def _jsonable(opts: dict) -> dict:
    out = dict(opts)
    out["channels"] = list(out["channels"])
    return out


# ------------------------------------------------------------- commands


def _cmd_ingest(args) -> int:
    save_manifest(ingest(args.root), args.out)
    return 0


def _cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    save_manifest(split(manifest, args.ratios, args.seed), args.out)
    return 0


def _cmd_preprocess(args) -> int:
    run_preprocess(args.manifest, args.out_dir, args.out, args.gamma, args.side)
    return 0


def _cmd_features(args) -> int:
    params = HogParams(
        cell_size=args.cell_size,
        block_size=args.block_size,
        block_stride=args.block_stride,
        orientations=args.orientations,
        signed_gradients=args.signed,
    )
    side = args.side
    if side == "auto":
        side = 128 if args.kind == "hog" else 64
    run_features(args.manifest, args.out_dir, args.kind, side, params)
    return 0


def _cmd_resample(args) -> int:
    run_resample(
        args.features, args.labels, args.strategy, args.absolute,
        args.k_neighbors, args.seed, args.out_features, args.out_labels,
    )
    return 0


def _cmd_train(args) -> int:
    if args.model in UNSUPPORTED_MODELS:
        print(
            f"error: unsupported model {args.model!r}: transfer-learning "
            "backbones are out of scope here, see README for the supported "
            f"models {MODEL_KINDS}",
            file=sys.stderr,
        )
        return 1
    raw_gamma = args.gamma
    opts = {
        "svm_c": args.svm_c,
        "kernel": args.kernel,
        "gamma": None if raw_gamma in (None, "auto") else float(raw_gamma),
        "tol": args.tol,
        "n_trees": args.n_trees,
        "max_depth": args.max_depth,
        "min_leaf": args.min_leaf,
        "max_features": args.max_features,
        "channels": tuple(int(c) for c in args.channels.split(",") if c.strip()),
        "hidden": args.hidden,
        "learning_rate": args.learning_rate,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
    }
    run_train(args.features, args.labels, args.model, opts, args.seed, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    payload = run_evaluate(
        args.model,
        {args.split_name: (args.features, args.labels)},
        args.out,
        args.table,
    )
    print(Path(args.table).read_text(), end="")
    del payload
    return 0


def _cmd_explain(args) -> int:
    params = LimeParams(
        grid=args.grid,
        num_samples=args.num_samples,
        kernel_width=args.kernel_width,
        ridge_lambda=args.ridge_lambda,
        top_k=args.top_k,
        seed=args.seed,
    )
    written = run_explain(args.model, args.manifest, args.out_dir, params, args.count)
    for path in written:
        print(path)
    return 0


def _cmd_pipeline(args) -> int:
    config = load_config(args.config, seed_override=args.seed)
    _pipeline(config)
    return 0


def _cmd_compare_runs(args) -> int:
    if len(args.reports) < 2:
        print("error: compare-runs needs at least two run.json paths", file=sys.stderr)
        return 1
    rows_by_split: dict[str, list] = {"test": [], "val": []}
    for report_path in args.reports:
        report_path = Path(report_path)
        try:
            run = json.loads(report_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{report_path}: unreadable run report ({exc})") from None
        if run.get("schema") != RUN_SCHEMA:
            raise DataError(f"{report_path}: not a schema v{RUN_SCHEMA} run report")
        evaluate = run.get("stages", {}).get("evaluate")
        if not evaluate:
            raise DataError(f"{report_path}: no evaluation metrics recorded")
        metrics_path = report_path.parent / "metrics.json"
        if "metrics.json" not in evaluate["artifacts"] or not metrics_path.is_file():
            raise DataError(f"{report_path}: metrics.json missing")
        metrics = json.loads(metrics_path.read_text())
        labels = run.get("labels", {})
        name = f"{labels.get('model', '?')} {labels.get('condition', '?')}"
        for split_name, rep in metrics["splits"].items():
            if split_name not in rows_by_split:
                continue
            rows_by_split[split_name].append((
                name,
                SimpleNamespace(
                    accuracy=rep["accuracy"],
                    macro_precision=rep["macro_precision"],
                    macro_recall=rep["macro_recall"],
                    macro_f1=rep["macro_f1"],
                ),
            ))
    for split_name in ("test", "val"):
        rows = rows_by_split[split_name]
        if rows:
            print(f"== {split_name} ==")
            print(format_table(rows), end="")
    return 0


# -------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cxrpipe", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("ingest", help="catalog a class-per-directory corpus")
    p.add_argument("--root", required=True, help="corpus root directory")
    p.add_argument("--out", required=True, help="manifest CSV to write")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("split", help="assign stratified train/val/test splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", type=_ratios, default=(0.8, 0.1, 0.1),
                   help="train,val,test fractions (default 0.8,0.1,0.1)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("preprocess", help="resize and enhance every image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out", required=True, help="rewritten manifest CSV")
    p.add_argument("--gamma", type=float, default=0.8)
    p.add_argument("--side", type=int, default=64)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("features", help="extract per-split feature matrices")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", choices=("hog", "pixels"), default="hog")
    p.add_argument("--side", type=_side, default="auto",
                   help="descriptor resolution (default: 128 hog, 64 pixels)")
    p.add_argument("--cell-size", type=int, default=8)
    p.add_argument("--block-size", type=int, default=2)
    p.add_argument("--block-stride", type=int, default=1)
    p.add_argument("--orientations", type=int, default=9)
    p.add_argument("--signed", action="store_true")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("resample", help="oversample minority classes")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--strategy", required=True,
                   help="smote1, smote2, or a map like all=1500")
    p.add_argument("--absolute", action="store_true",
                   help="use preset targets as absolute counts")
    p.add_argument("--k-neighbors", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-features", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=_cmd_resample)

    p = sub.add_parser("train", help="fit a classifier on a feature matrix")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True,
                   choices=MODEL_KINDS + UNSUPPORTED_MODELS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--gamma", default="auto", help="RBF width (default 1/dim)")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--max-features", default="sqrt")
    p.add_argument("--channels", default="8,16,32")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a model on one split")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split-name", default="test")
    p.add_argument("--out", required=True, help="metrics JSON to write")
    p.add_argument("--table", required=True, help="metrics text table to write")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("explain", help="render per-class overlays for test images")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=1, help="images per class")
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--num-samples", type=int, default=1000)
    p.add_argument("--kernel-width", type=float, default=0.25)
    p.add_argument("--ridge-lambda", type=float, default=1.0)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("pipeline", help="run every stage from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the configured master seed")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("compare-runs", help="tabulate metrics across runs")
    p.add_argument("reports", nargs="+", help="run.json paths (at least two)")
    p.set_defaults(func=_cmd_compare_runs)

    return parser


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=logging.INFO,
            stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
        )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PipelineError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())
