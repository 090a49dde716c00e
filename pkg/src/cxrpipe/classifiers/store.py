"""Single-file binary persistence for trained models.

Layout: magic ``MODL1``, a 4-byte model type tag, a u32 little-endian
header length, a JSON header (hyperparameters, optional caller metadata,
and an ordered array manifest), the arrays as little-endian float64 in
manifest order, then a trailing sha256 digest of everything before it.
Integer arrays ride as float64; indices stay exact well past 2**52.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .cnn import CnnConfig, CnnModel
from .forest import ForestModel, ForestParams, Tree
from .svm import BinarySvm, KernelSpec, SvmModel

_MAGIC = b"MODL1"
_TAG_OF = {"svm": b"SVM ", "forest": b"FRST", "cnn": b"CNN "}
_KIND_OF = {tag: kind for kind, tag in _TAG_OF.items()}
_DIGEST_BYTES = 32


def _flatten(model) -> tuple[str, dict, list[tuple[str, np.ndarray]]]:
    """Split a model into (kind, JSON-safe params, named arrays)."""
    if isinstance(model, SvmModel):
        params = {
            "classes": [int(c) for c in model.classes],
            "kernel": {"kind": model.kernel.kind, "gamma": model.kernel.gamma},
            "C": model.C,
            "n_features": model.n_features,
            "n_machines": len(model.machines),
        }
        arrays = [("biases", np.array([m.bias for m in model.machines]))]
        for i, m in enumerate(model.machines):
            arrays.append((f"machine{i}_sv", m.support_vectors))
            arrays.append((f"machine{i}_coef", m.dual_coef))
        return "svm", params, arrays
    if isinstance(model, ForestModel):
        params = {
            "classes": [int(c) for c in model.classes],
            "n_features": model.n_features,
            "forest": asdict(model.params),
        }
        arrays = []
        for i, t in enumerate(model.trees):
            arrays.append((f"tree{i}_feature", t.feature))
            arrays.append((f"tree{i}_threshold", t.threshold))
            arrays.append((f"tree{i}_left", t.left))
            arrays.append((f"tree{i}_right", t.right))
            arrays.append((f"tree{i}_counts", t.counts))
        params["n_trees_stored"] = len(model.trees)
        return "forest", params, arrays
    if isinstance(model, CnnModel):
        config = asdict(model.config)
        config["channels"] = list(config["channels"])
        params = {"config": config, "loss_history": list(model.loss_history)}
        arrays = [(name, model.params[name]) for name in sorted(model.params)]
        return "cnn", params, arrays
    raise TypeError(f"cannot serialize {type(model).__name__}")


def save_model(model, path, meta: dict | None = None) -> None:
    """Write a model (plus optional JSON-safe metadata) to ``path``."""
    kind, params, arrays = _flatten(model)
    header = {
        "params": params,
        "meta": meta or {},
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += _MAGIC
    blob += _TAG_OF[kind]
    blob += struct.pack("<I", len(header_bytes))
    blob += header_bytes
    for _, a in arrays:
        blob += np.ascontiguousarray(a, dtype="<f8").tobytes()
    blob += hashlib.sha256(bytes(blob)).digest()
    Path(path).write_bytes(bytes(blob))


def _rebuild_svm(params: dict, arrays: dict[str, np.ndarray]) -> SvmModel:
    kernel = KernelSpec(**params["kernel"])
    biases = arrays["biases"]
    machines = []
    for i in range(params["n_machines"]):
        machines.append(
            BinarySvm(
                support_vectors=arrays[f"machine{i}_sv"],
                dual_coef=arrays[f"machine{i}_coef"],
                bias=float(biases[i]),
            )
        )
    return SvmModel(
        classes=np.array(params["classes"], dtype=np.int64),
        machines=tuple(machines),
        kernel=kernel,
        C=params["C"],
        n_features=params["n_features"],
    )


def _rebuild_forest(params: dict, arrays: dict[str, np.ndarray]) -> ForestModel:
    trees = []
    for i in range(params["n_trees_stored"]):
        trees.append(
            Tree(
                feature=arrays[f"tree{i}_feature"].astype(np.int64),
                threshold=arrays[f"tree{i}_threshold"],
                left=arrays[f"tree{i}_left"].astype(np.int64),
                right=arrays[f"tree{i}_right"].astype(np.int64),
                counts=arrays[f"tree{i}_counts"],
            )
        )
    return ForestModel(
        classes=np.array(params["classes"], dtype=np.int64),
        trees=tuple(trees),
        params=ForestParams(**params["forest"]),
        n_features=params["n_features"],
    )


def _rebuild_cnn(params: dict, arrays: dict[str, np.ndarray]) -> CnnModel:
    raw = dict(params["config"])
    raw["channels"] = tuple(raw["channels"])
    return CnnModel(
        config=CnnConfig(**raw),
        params=arrays,
        loss_history=list(params["loss_history"]),
    )


_REBUILD = {"svm": _rebuild_svm, "forest": _rebuild_forest, "cnn": _rebuild_cnn}


def load_model(path, expect: str | None = None, with_meta: bool = False):
    """Read a model back; ``expect`` pins the model kind, raising TypeError
    on a tag mismatch. ``with_meta=True`` returns (model, meta_dict)."""
    data = Path(path).read_bytes()
    min_len = len(_MAGIC) + 4 + 4 + _DIGEST_BYTES
    if len(data) < min_len:
        raise FormatError(f"{path}: truncated model file ({len(data)} bytes)")
    if data[: len(_MAGIC)] != _MAGIC:
        raise FormatError(
            f"{path}: bad magic {data[:len(_MAGIC)]!r}, expected MODL1"
        )
    body, digest = data[:-_DIGEST_BYTES], data[-_DIGEST_BYTES:]
    if hashlib.sha256(body).digest() != digest:
        raise FormatError(f"{path}: content digest mismatch (truncated or corrupt)")
    tag = data[5:9]
    kind = _KIND_OF.get(tag)
    if kind is None:
        raise FormatError(f"{path}: unknown model type tag {tag!r}")
    if expect is not None and kind != expect:
        raise TypeError(f"{path}: holds a {kind} model, expected {expect}")
    (header_len,) = struct.unpack_from("<I", data, 9)
    offset = 13 + header_len
    if offset > len(body):
        raise FormatError(f"{path}: truncated model header")
    header = json.loads(data[13:offset].decode("utf-8"))
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * 8
        if end > len(body):
            raise FormatError(f"{path}: truncated array block at {entry['name']}")
        arrays[entry["name"]] = (
            np.frombuffer(data, dtype="<f8", count=count, offset=offset)
            .reshape(shape)
            .astype(np.float64)
        )
        offset = end
    if offset != len(body):
        raise FormatError(f"{path}: {len(body) - offset} stray bytes after arrays")
    model = _REBUILD[kind](header["params"], arrays)
    if with_meta:
        return model, header["meta"]
    return model
