"""Versioned, byte-stable artifact container.

Layout: a magic line, an 8-byte little-endian header length, a JSON header
(sorted keys, so equal inputs serialize identically), then the raw array
blobs. The header records each array's dtype, shape, and offset plus a
digest of the blob section, so any tampering is detected at load.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import IntegrityError, MissingArtifactError

MAGIC = b"SKILLARENA-CKPT-1\n"
FORMAT_VERSION = 1

_ALLOWED_DTYPES = {"float64", "int64", "bool"}


def save_checkpoint(path: str | Path, meta: dict, arrays: dict[str, np.ndarray]) -> str:
    """Write the container and return its file digest."""
    records = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.name not in _ALLOWED_DTYPES:
            arr = arr.astype(np.float64)
        blob = arr.tobytes()
        records.append(
            {
                "name": name,
                "dtype": arr.dtype.name,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)
    blob_section = b"".join(blobs)
    header = {
        "format_version": FORMAT_VERSION,
        "meta": meta,
        "arrays": records,
        "blob_sha256": hashlib.sha256(blob_section).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        fh.write(blob_section)
    return file_digest(path)


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise IntegrityError(f"{path} is not a checkpoint container")
    pos = len(MAGIC)
    header_len = int.from_bytes(data[pos : pos + 8], "little")
    pos += 8
    try:
        header = json.loads(data[pos : pos + header_len])
    except ValueError as exc:
        raise IntegrityError(f"{path} has a corrupt header: {exc}") from None
    pos += header_len
    blob_section = data[pos:]
    if hashlib.sha256(blob_section).hexdigest() != header.get("blob_sha256"):
        raise IntegrityError(f"{path} failed its content digest check")
    if header.get("format_version") != FORMAT_VERSION:
        raise IntegrityError(
            f"{path} has unsupported format version {header.get('format_version')}"
        )
    arrays: dict[str, np.ndarray] = {}
    for rec in header["arrays"]:
        start, n = rec["offset"], rec["nbytes"]
        arr = np.frombuffer(blob_section[start : start + n], dtype=rec["dtype"])
        arrays[rec["name"]] = arr.reshape(rec["shape"]).copy()
    return header["meta"], arrays


def file_digest(path: str | Path) -> str:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"artifact not found: {path}")
    return hashlib.sha256(path.read_bytes()).hexdigest()
