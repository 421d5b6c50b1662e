"""Binary checkpoint container.

Layout of a checkpoint file:

    bytes 0..7    magic b"KGCTNSR1"
    bytes 8..15   little-endian u64: length of the JSON manifest in bytes
    manifest      UTF-8 JSON object:
                    format_version  int (currently 1)
                    meta            free-form dict; pipeline stages store
                                    seed, config hash, and input hashes here
                    params          list of {"name": str, "shape": [int,...]}
    payload       the parameter arrays, concatenated in manifest order,
                  each as raw little-endian float64 in row-major order

Loading validates the magic, the format version, and that the payload length
matches the declared shapes exactly, so truncated or mismatched files fail
loudly instead of producing garbage tensors.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"KGCTNSR1"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Checkpoint file is malformed, truncated, or incompatible."""


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    entries = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.astype("<f8").tobytes())
    manifest = {
        "format_version": FORMAT_VERSION,
        "meta": meta,
        "params": entries,
    }
    header = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8:
        raise CheckpointError(f"checkpoint truncated (only {len(raw)} bytes): {path}")
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad magic in checkpoint {path}")
    (header_len,) = struct.unpack("<Q", raw[len(MAGIC) : len(MAGIC) + 8])
    header_end = len(MAGIC) + 8 + header_len
    if len(raw) < header_end:
        raise CheckpointError(f"checkpoint manifest truncated: {path}")
    try:
        manifest = json.loads(raw[len(MAGIC) + 8 : header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint manifest in {path}: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version mismatch in {path}: file has {version}, reader expects {FORMAT_VERSION}"
        )
    arrays: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
        if offset + nbytes > len(raw):
            raise CheckpointError(
                f"checkpoint payload truncated at parameter {entry['name']!r}: {path}"
            )
        arr = np.frombuffer(raw, dtype="<f8", count=nbytes // 8, offset=offset)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(
            f"checkpoint has {len(raw) - offset} trailing bytes beyond declared payload: {path}"
        )
    return manifest.get("meta", {}), arrays
