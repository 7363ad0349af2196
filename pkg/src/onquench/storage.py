"""Checkpoint files, tables and atomic writes.

Checkpoint binary layout (little endian throughout):

    magic   4 bytes  "ONQ1"
    version u32      currently 1
    n_k     u64
    t       float64
    r_eff   float64
    Re f, Im f, Re fdot, Im fdot   four float64 arrays of length n_k

A sidecar JSON manifest (same path + ".json") records the config and the
SHA-256 of the binary payload, so loads can verify integrity.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .evolve import ModeState
from .model import ModelConfig

CHECKPOINT_MAGIC = b"ONQ1"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIQdd")


def checkpoint_bytes(state: ModeState) -> bytes:
    header = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
                          state.n_k, state.t, state.r_eff)
    parts = [header]
    for arr in (state.f.real, state.f.imag, state.fdot.real, state.fdot.imag):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def parse_checkpoint(blob: bytes) -> ModeState:
    if len(blob) < _HEADER.size:
        raise ConfigError("checkpoint truncated")
    magic, version, n_k, t, r_eff = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise ConfigError(f"bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    expect = _HEADER.size + 4 * 8 * n_k
    if len(blob) != expect:
        raise ConfigError(f"checkpoint length {len(blob)} != expected {expect}")
    arrs = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(4, n_k)
    f = arrs[0] + 1j * arrs[1]
    fdot = arrs[2] + 1j * arrs[3]
    return ModeState(t=t, f=f, fdot=fdot, r_eff=r_eff)


def atomic_write_bytes(path: Path, blob: bytes):
    """Write via a temp file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str):
    atomic_write_bytes(path, text.encode())


def write_checkpoint(path: Path, state: ModeState, cfg: ModelConfig) -> str:
    """Write the binary checkpoint plus its sidecar manifest; returns the
    content hash."""
    blob = checkpoint_bytes(state)
    digest = hashlib.sha256(blob).hexdigest()
    atomic_write_bytes(path, blob)
    manifest = {"config": cfg.to_json_dict(), "sha256": digest, "t": state.t}
    atomic_write_text(Path(str(path) + ".json"), json.dumps(manifest, indent=2))
    return digest


def read_checkpoint(path: Path, verify: bool = True) -> ModeState:
    blob = Path(path).read_bytes()
    if verify:
        sidecar = Path(str(path) + ".json")
        if sidecar.exists():
            manifest = json.loads(sidecar.read_text())
            if hashlib.sha256(blob).hexdigest() != manifest.get("sha256"):
                raise ConfigError(f"checkpoint {path} does not match its manifest hash")
    return parse_checkpoint(blob)


def _fmt(value) -> str:
    """Full round-trip precision for floats, plain text otherwise."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, columns: list[str], rows, header_comment: str | None = None):
    lines = []
    if header_comment:
        lines.append("# " + header_comment)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def read_csv(path: Path):
    """Read a CSV written by write_csv; returns (columns, dict of float arrays)."""
    text = Path(path).read_text().strip().splitlines()
    rows = [ln for ln in text if not ln.startswith("#")]
    if not rows:
        raise ConfigError(f"{path} is empty")
    columns = rows[0].split(",")
    data = [r.split(",") for r in rows[1:]]
    if not data:
        return columns, {c: np.empty(0) for c in columns}
    arr = np.array(data, dtype=float)
    return columns, {c: arr[:, i] for i, c in enumerate(columns)}
