"""Single-file checkpoints.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON header
(config, tensor registry, seeds), then every tensor as little-endian float64
in registry order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

MAGIC = b"NSSICKP1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, modules: dict[str, torch.nn.Module], config: dict,
                    seeds: dict | None = None) -> Path:
    path = Path(path)
    registry, blobs = [], []
    for prefix, module in modules.items():
        for name, t in module.state_dict().items():
            # integer buffers (BatchNorm's batch counter) are stored as float64 too
            arr = t.detach().cpu().numpy().astype("<f8")
            registry.append({"name": f"{prefix}.{name}", "shape": list(t.shape),
                             "dtype": str(t.dtype).replace("torch.", "")})
            blobs.append(arr.tobytes(order="C"))
    header = json.dumps({"config": config, "tensors": registry, "seeds": seeds or {}},
                        sort_keys=True).encode()
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)
    return path


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint")
    (n,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + n])
    offset = 16 + n
    tensors = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(entry["shape"])
        offset += 8 * count
    if offset != len(raw):
        raise CheckpointError("trailing bytes after the declared tensors")
    return header, tensors


def load_into(modules: dict[str, torch.nn.Module], tensors: dict[str, np.ndarray]) -> None:
    for prefix, module in modules.items():
        state = {}
        for name, t in module.state_dict().items():
            key = f"{prefix}.{name}"
            if key not in tensors:
                raise CheckpointError(f"checkpoint lacks tensor {key!r}")
            state[name] = torch.from_numpy(tensors[key].copy()).to(t.dtype)
        module.load_state_dict(state)
