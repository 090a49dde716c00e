"""Run configuration: one INI file drives the whole pipeline.

Every knob has a materialized default, unknown sections or keys are hard
errors, and the canonical digest of the parsed config (output directory
excluded) keys the stage cache. Per-stage seeds are derived from the
master seed by hashing so stages stay decoupled but reproducible.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .classifiers import ForestParams, KernelSpec
from .explain import LimeParams
from .features import HogParams


class ConfigError(Exception):
    """Bad run configuration; the CLI reports it as a usage error."""


_SCHEMA: dict[str, dict[str, str]] = {
    "run": {"out_dir": "run", "seed": "0"},
    "dataset": {
        "root": "",
        "train_ratio": "0.8",
        "val_ratio": "0.1",
        "test_ratio": "0.1",
    },
    "imaging": {"gamma": "0.8", "side": "256"},
    "features": {
        "kind": "hog",
        "side": "auto",
        "cell_size": "8",
        "block_size": "2",
        "block_stride": "1",
        "orientations": "9",
        "signed_gradients": "false",
        "block_norm_clip": "0.2",
    },
    "smote": {"strategy": "off", "absolute": "false", "k_neighbors": "5"},
    "model": {
        "kind": "svm",
        "svm_c": "1.0",
        "kernel": "rbf",
        "gamma": "auto",
        "tol": "1e-3",
        "n_trees": "100",
        "max_depth": "none",
        "min_leaf": "1",
        "max_features": "sqrt",
        "channels": "8,16,32",
        "hidden": "64",
        "learning_rate": "0.01",
        "epochs": "20",
        "batch_size": "32",
    },
    "lime": {
        "grid": "8",
        "num_samples": "1000",
        "kernel_width": "0.25",
        "ridge_lambda": "1.0",
        "top_k": "10",
        "count": "1",
    },
}

MODEL_KINDS = ("svm", "forest", "cnn")
UNSUPPORTED_MODELS = ("vgg16", "vgg19", "bilstm")
FEATURE_KINDS = ("hog", "pixels")


@dataclass(frozen=True)
class RunConfig:
    out_dir: Path
    seed: int
    dataset_root: Path
    ratios: tuple[float, float, float]
    gamma: float
    side: int
    feature_kind: str
    feature_side: int
    hog: HogParams
    smote_strategy: str
    smote_absolute: bool
    k_neighbors: int
    model_kind: str
    svm_c: float
    svm_kernel: KernelSpec
    svm_tol: float
    forest: ForestParams
    cnn_channels: tuple[int, ...]
    cnn_hidden: int
    learning_rate: float
    epochs: int
    batch_size: int
    lime: LimeParams
    explain_count: int

    def digest(self) -> str:
        """Canonical config digest; out_dir does not participate."""
        payload = {
            "seed": self.seed,
            "dataset_root": str(self.dataset_root),
            "ratios": list(self.ratios),
            "gamma": self.gamma,
            "side": self.side,
            "feature_kind": self.feature_kind,
            "feature_side": self.feature_side,
            "hog": asdict(self.hog),
            "smote": {
                "strategy": self.smote_strategy,
                "absolute": self.smote_absolute,
                "k_neighbors": self.k_neighbors,
            },
            "model": {
                "kind": self.model_kind,
                "svm_c": self.svm_c,
                "kernel": asdict(self.svm_kernel),
                "tol": self.svm_tol,
                "forest": asdict(self.forest),
                "cnn": {
                    "channels": list(self.cnn_channels),
                    "hidden": self.cnn_hidden,
                    "learning_rate": self.learning_rate,
                    "epochs": self.epochs,
                    "batch_size": self.batch_size,
                },
            },
            "lime": asdict(self.lime),
            "explain_count": self.explain_count,
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def stage_seed(master_seed: int, stage: str) -> int:
    """Deterministic per-stage seed: low 63 bits of sha256(seed:stage)."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


def _merged(parser: configparser.ConfigParser, path) -> dict[str, dict[str, str]]:
    values = {section: dict(defaults) for section, defaults in _SCHEMA.items()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[section][key] = raw
    return values


def _as_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected integer, got {raw!r}") from None


def _as_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected number, got {raw!r}") from None


def _as_bool(raw: str, where: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected boolean, got {raw!r}")


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    v = _merged(parser, path)

    root = v["dataset"]["root"]
    if not root:
        raise ConfigError(f"{path}: [dataset] root is required")
    ratios = tuple(
        _as_float(v["dataset"][k], f"[dataset] {k}")
        for k in ("train_ratio", "val_ratio", "test_ratio")
    )
    if any(r < 0 for r in ratios):
        raise ConfigError(f"[dataset] split ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(
            f"[dataset] split ratios must sum to 1, got {ratios} (sum {sum(ratios)})"
        )

    feature_kind = v["features"]["kind"].strip().lower()
    if feature_kind not in FEATURE_KINDS:
        raise ConfigError(f"[features] kind must be one of {FEATURE_KINDS}")
    # descriptor resolution defaults: 128 for HOG, 64 for pixel tensors
    raw_side = v["features"]["side"].strip().lower()
    if raw_side in ("auto", ""):
        feature_side = 128 if feature_kind == "hog" else 64
    else:
        feature_side = _as_int(raw_side, "[features] side")
    try:
        hog = HogParams(
            cell_size=_as_int(v["features"]["cell_size"], "[features] cell_size"),
            block_size=_as_int(v["features"]["block_size"], "[features] block_size"),
            block_stride=_as_int(
                v["features"]["block_stride"], "[features] block_stride"
            ),
            orientations=_as_int(
                v["features"]["orientations"], "[features] orientations"
            ),
            signed_gradients=_as_bool(
                v["features"]["signed_gradients"], "[features] signed_gradients"
            ),
            block_norm_clip=_as_float(
                v["features"]["block_norm_clip"], "[features] block_norm_clip"
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"[features]: {exc}") from None

    strategy = v["smote"]["strategy"].strip().lower()
    if strategy not in ("off", "smote1", "smote2") and "=" not in strategy:
        raise ConfigError(
            "[smote] strategy must be off, smote1, smote2, or a target map "
            "like 'all=1500' or 'normal=1200,covid=1200'"
        )

    model_kind = v["model"]["kind"].strip().lower()
    if model_kind in UNSUPPORTED_MODELS:
        raise ConfigError(
            f"unsupported model {model_kind!r}: transfer-learning backbones are "
            "out of scope, see README"
        )
    if model_kind not in MODEL_KINDS:
        raise ConfigError(f"[model] kind must be one of {MODEL_KINDS}")
    raw_gamma = v["model"]["gamma"].strip().lower()
    svm_gamma = None if raw_gamma in ("auto", "") else _as_float(
        raw_gamma, "[model] gamma"
    )
    try:
        kernel = KernelSpec(kind=v["model"]["kernel"].strip().lower(), gamma=svm_gamma)
    except ValueError as exc:
        raise ConfigError(f"[model]: {exc}") from None

    raw_depth = v["model"]["max_depth"].strip().lower()
    max_depth = None if raw_depth in ("none", "") else _as_int(
        raw_depth, "[model] max_depth"
    )
    raw_mf = v["model"]["max_features"].strip().lower()
    max_features = raw_mf if raw_mf in ("sqrt", "all") else _as_int(
        raw_mf, "[model] max_features"
    )
    try:
        forest = ForestParams(
            n_trees=_as_int(v["model"]["n_trees"], "[model] n_trees"),
            max_depth=max_depth,
            min_leaf=_as_int(v["model"]["min_leaf"], "[model] min_leaf"),
            max_features=max_features,
            bootstrap=True,
            seed=0,
        )
    except ValueError as exc:
        raise ConfigError(f"[model]: {exc}") from None

    try:
        channels = tuple(
            int(c) for c in v["model"]["channels"].split(",") if c.strip()
        )
    except ValueError:
        raise ConfigError(
            f"[model] channels: expected comma-separated integers, "
            f"got {v['model']['channels']!r}"
        ) from None
    if not channels:
        raise ConfigError("[model] channels must name at least one conv block")

    try:
        lime = LimeParams(
            grid=_as_int(v["lime"]["grid"], "[lime] grid"),
            num_samples=_as_int(v["lime"]["num_samples"], "[lime] num_samples"),
            kernel_width=_as_float(v["lime"]["kernel_width"], "[lime] kernel_width"),
            ridge_lambda=_as_float(v["lime"]["ridge_lambda"], "[lime] ridge_lambda"),
            top_k=_as_int(v["lime"]["top_k"], "[lime] top_k"),
            seed=0,
        )
    except ValueError as exc:
        raise ConfigError(f"[lime]: {exc}") from None

    seed = _as_int(v["run"]["seed"], "[run] seed")
    if seed_override is not None:
        seed = seed_override

    config = RunConfig(
        out_dir=Path(v["run"]["out_dir"]),
        seed=seed,
        dataset_root=Path(root),
        ratios=ratios,
        gamma=_as_float(v["imaging"]["gamma"], "[imaging] gamma"),
        side=_as_int(v["imaging"]["side"], "[imaging] side"),
        feature_kind=feature_kind,
        feature_side=feature_side,
        hog=hog,
        smote_strategy=strategy,
        smote_absolute=_as_bool(v["smote"]["absolute"], "[smote] absolute"),
        k_neighbors=_as_int(v["smote"]["k_neighbors"], "[smote] k_neighbors"),
        model_kind=model_kind,
        svm_c=_as_float(v["model"]["svm_c"], "[model] svm_c"),
        svm_kernel=kernel,
        svm_tol=_as_float(v["model"]["tol"], "[model] tol"),
        forest=forest,
        cnn_channels=channels,
        cnn_hidden=_as_int(v["model"]["hidden"], "[model] hidden"),
        learning_rate=_as_float(v["model"]["learning_rate"], "[model] learning_rate"),
        epochs=_as_int(v["model"]["epochs"], "[model] epochs"),
        batch_size=_as_int(v["model"]["batch_size"], "[model] batch_size"),
        lime=lime,
        explain_count=_as_int(v["lime"]["count"], "[lime] count"),
    )
    if config.side < 8:
        raise ConfigError(f"[imaging] side must be >= 8, got {config.side}")
    if config.feature_side < 8:
        raise ConfigError(f"[features] side must be >= 8, got {config.feature_side}")
    if config.gamma <= 0:
        raise ConfigError(f"[imaging] gamma must be > 0, got {config.gamma}")
    if config.explain_count < 0:
        raise ConfigError("[lime] count must be >= 0")
    return config
