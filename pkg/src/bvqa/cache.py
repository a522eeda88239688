"""Persistent on-disk feature cache (BVQF files).

Layout: ``<cache_dir>/<kind>/<sanitized video_id>.bvqf``. Entries carry
the feature format version; a version bump invalidates every cached
vector so stale features can never leak into an SVR run. Writes go
through a temp file + rename so concurrent extractors never expose a
partial entry.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .fusion import FeatureKind, FeatureVector

CACHE_MAGIC = b"BVQF"
# Bump when any feature catalogue changes; doubles as the extractor version hash.
FEATURE_VERSION = 1


class CacheError(ValueError):
    pass


def _entry_path(cache_dir: Path, kind: FeatureKind, video_id: str) -> Path:
    safe_id = video_id.replace("/", "__")
    return cache_dir / kind.name / f"{safe_id}.bvqf"


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def write_entry(cache_dir: str | Path, fv: FeatureVector) -> Path:
    path = _entry_path(Path(cache_dir), fv.kind, fv.video_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", FEATURE_VERSION))
        fh.write(_pack_str(fv.kind.name))
        fh.write(_pack_str(fv.video_id))
        fh.write(struct.pack("<I", fv.values.shape[0]))
        fh.write(np.ascontiguousarray(fv.values, dtype="<f4").tobytes())
    os.replace(tmp, path)
    return path


def read_entry(cache_dir: str | Path, kind: FeatureKind, video_id: str) -> FeatureVector:
    path = _entry_path(Path(cache_dir), kind, video_id)
    try:
        with open(path, "rb") as fh:
            if fh.read(4) != CACHE_MAGIC:
                raise CacheError(f"{path}: bad magic")
            (version,) = struct.unpack("<I", fh.read(4))
            if version != FEATURE_VERSION:
                raise CacheError(f"{path}: stale feature version {version}")
            kind_name = _read_str(fh)
            stored_id = _read_str(fh)
            (dim,) = struct.unpack("<I", fh.read(4))
            values = np.frombuffer(fh.read(4 * dim), dtype="<f4").astype(np.float64)
    except (OSError, struct.error) as exc:
        raise CacheError(f"{path}: unreadable cache entry: {exc}") from exc
    if kind_name != kind.name or stored_id != video_id:
        raise CacheError(f"{path}: entry is for ({kind_name}, {stored_id})")
    if dim != kind.dim or values.shape[0] != dim:
        raise CacheError(f"{path}: dim {dim} does not match {kind.name} contract {kind.dim}")
    return FeatureVector(kind=kind, video_id=video_id, values=values)


def has_valid_entry(cache_dir: str | Path, kind: FeatureKind, video_id: str) -> bool:
    try:
        read_entry(cache_dir, kind, video_id)
        return True
    except (CacheError, ValueError):
        return False


def load_all(cache_dir: str | Path, kind: FeatureKind, video_ids) -> dict[str, np.ndarray]:
    """Load every requested entry; raises listing the missing/invalid ids."""
    out = {}
    missing = []
    for vid in video_ids:
        try:
            out[vid] = read_entry(cache_dir, kind, vid).values
        except (CacheError, ValueError):
            missing.append(vid)
    if missing:
        raise CacheError(f"cache incomplete for {kind.name}: {', '.join(missing)}")
    return out
