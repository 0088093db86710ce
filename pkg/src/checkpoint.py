#!/usr/bin/env python3
"""
Checkpoint Format

One file per checkpoint (integers little-endian):

    magic          4 bytes  b"SPDC"
    version        1 byte   (1)
    manifest_len   uint64
    manifest       manifest_len bytes of UTF-8 JSON (sorted keys)
    tensors        one SPDT tensor record per name in manifest["tensors"], in order

Array-valued state (parameters, optimizer moments, per-domain means) is
stored as tensor records; scalars live in the manifest. Loading rebuilds the
model through the ModelFactory and restores every value exactly.
"""

import io
import json
import os
import struct
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from common.exceptions import FormatError, MissingFileError
from models.base import NetworkModel
from models.config import NormSection, TsmNetConfig
from models.factory import ModelFactory
from optim.riemannian_adam import RiemannianAdam
from synthdata.tensor_io import encode_tensor, read_tensor_from
from utils.output_dir import atomic_write_bytes


CHECKPOINT_MAGIC = b"SPDC"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    """A restored model with the metadata it was saved with"""
    model: NetworkModel
    net: TsmNetConfig
    norm: NormSection
    seed: int
    config_hash: str
    optimizer_state: Optional[Dict[str, Any]] = None
    log_summary: Dict[str, Any] = field(default_factory=dict)
    resolved_config: Dict[str, Any] = field(default_factory=dict)

    def restore_optimizer(self) -> RiemannianAdam:
        """Optimizer over the model's parameters with the saved moments"""
        hp = (self.optimizer_state or {}).get("hyperparameters", {})
        optimizer = RiemannianAdam(self.model.parameters().values(), lr=hp.get("lr", 1e-3),
                                   betas=(hp.get("beta1", 0.9), hp.get("beta2", 0.999)),
                                   weight_decay=hp.get("weight_decay", 1e-4), eps=hp.get("eps", 1e-8))
        if self.optimizer_state is not None:
            optimizer.load_state_dict(self.optimizer_state)
        return optimizer


def _split_state(prefix: str, state: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> Dict[str, Any]:
    """Move ndarray values into tensors (returning tensor references) and keep scalars"""
    scalars = {}
    for key, value in state.items():
        if isinstance(value, np.ndarray):
            name = f"{prefix}/{key}"
            tensors[name] = value
            scalars[key] = {"tensor": name}
        else:
            scalars[key] = value
    return scalars


def _join_state(scalars: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> Dict[str, Any]:
    return {key: tensors[value["tensor"]] if isinstance(value, dict) and "tensor" in value else value
            for key, value in scalars.items()}


def encode_checkpoint(model: NetworkModel, norm: NormSection, seed: int, config_hash: str = "",
                      optimizer: Optional[RiemannianAdam] = None, log_summary: Optional[Dict[str, Any]] = None,
                      resolved_config: Optional[Dict[str, Any]] = None) -> bytes:
    state = model.state_dict()
    tensors: Dict[str, np.ndarray] = {}
    for name, value in state["params"].items():
        tensors[f"param/{name}"] = value
    domains = {str(key): _split_state(f"domain/{key}", stats, tensors)
               for key, stats in sorted(state["domains"].items())}

    optimizer_meta = None
    if optimizer is not None:
        opt_state = optimizer.state_dict()
        for name, value in opt_state["tensors"].items():
            tensors[f"optim/{name}"] = value
        optimizer_meta = {"step": opt_state["step"], "hyperparameters": opt_state["hyperparameters"]}

    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "arm": model.arm,
        "seed": seed,
        "config_hash": config_hash,
        "net": model.config.model_dump(mode="json"),
        "norm": norm.model_dump(mode="json"),
        "params": list(state["params"]),
        "domains": domains,
        "optimizer": optimizer_meta,
        "log_summary": log_summary or {},
        "resolved_config": resolved_config or {},
        "tensors": list(tensors),
    }
    body = json.dumps(manifest, sort_keys=True, ensure_ascii=False).encode("utf-8")
    out = io.BytesIO()
    out.write(CHECKPOINT_MAGIC + struct.pack("<BQ", CHECKPOINT_VERSION, len(body)))
    out.write(body)
    for name in manifest["tensors"]:
        out.write(encode_tensor(tensors[name]))
    return out.getvalue()


def save_checkpoint(path: str, model: NetworkModel, norm: NormSection, seed: int, config_hash: str = "",
                    optimizer: Optional[RiemannianAdam] = None, log_summary: Optional[Dict[str, Any]] = None,
                    resolved_config: Optional[Dict[str, Any]] = None) -> str:
    """Write the model (and optionally its optimizer) to path"""
    atomic_write_bytes(path, encode_checkpoint(model, norm, seed, config_hash, optimizer,
                                               log_summary, resolved_config))
    return path


def _read_manifest(fh, path: str) -> Dict[str, Any]:
    header = fh.read(13)
    if len(header) != 13 or header[:4] != CHECKPOINT_MAGIC:
        raise FormatError(path, "magic", f"not a checkpoint file (expected {CHECKPOINT_MAGIC!r})")
    version, length = struct.unpack("<BQ", header[4:])
    if version != CHECKPOINT_VERSION:
        raise FormatError(path, "version", f"unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})")
    body = fh.read(length)
    if len(body) != length:
        raise FormatError(path, "manifest", "unexpected end of file")
    try:
        return json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(path, "manifest", str(e))


def load_checkpoint(path: str) -> Checkpoint:
    """Read a checkpoint and rebuild its model"""
    if not os.path.isfile(path):
        raise MissingFileError(path, "checkpoint")
    with open(path, "rb") as fh:
        manifest = _read_manifest(fh, path)
        names: List[str] = manifest.get("tensors", [])
        tensors = {name: read_tensor_from(fh, path) for name in names}
        if fh.read(1):
            raise FormatError(path, "tensors", "trailing bytes after the last tensor record")

    try:
        net = TsmNetConfig.model_validate(manifest["net"])
        norm = NormSection.model_validate(manifest["norm"])
    except (KeyError, ValidationError) as e:
        raise FormatError(path, "net/norm", str(e))

    model = ModelFactory.create_model(manifest["arm"], net, norm, manifest["seed"])
    missing = [name for name in manifest["params"] if f"param/{name}" not in tensors]
    if missing:
        raise FormatError(path, "params", f"missing tensors for {missing}")
    model.load_state_dict({
        "params": {name: tensors[f"param/{name}"] for name in manifest["params"]},
        "domains": {int(key): _join_state(stats, tensors) for key, stats in manifest["domains"].items()},
    })

    optimizer_state = None
    if manifest.get("optimizer") is not None:
        optimizer_state = dict(manifest["optimizer"])
        optimizer_state["tensors"] = {name[len("optim/"):]: value for name, value in tensors.items()
                                      if name.startswith("optim/")}

    return Checkpoint(model=model, net=net, norm=norm, seed=manifest["seed"], config_hash=manifest["config_hash"],
                      optimizer_state=optimizer_state, log_summary=manifest.get("log_summary", {}),
                      resolved_config=manifest.get("resolved_config", {}))
