"""Dataset manifests, frame extraction, and frame normalization.

Video decoding is delegated either to a directory of pre-extracted image
files or to an external decoder subprocess that emits raw RGB24 frames on
stdout. The decoder contract is ``<decoder> <input> <width> <height> rgb24``;
``bvqa-decode`` (an ffmpeg wrapper installed with this package) implements
it, and ``BVQA_DECODER`` can point at any drop-in replacement.
"""

from __future__ import annotations

import csv
import math
import os
import shutil
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from PIL import Image

from .kernels import resize_bilinear

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


class DatasetError(ValueError):
    """Raised for malformed manifests or undecodable videos."""


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    path: Path
    mos: float
    width: int
    height: int
    fps: float
    duration_s: float | None = None

    def __post_init__(self):
        if not (1.0 <= self.mos <= 5.0):
            raise DatasetError(f"{self.video_id}: mos {self.mos} outside [1, 5]")
        if self.fps <= 0:
            raise DatasetError(f"{self.video_id}: fps must be positive")
        if self.width <= 0 or self.height <= 0:
            raise DatasetError(f"{self.video_id}: non-positive frame dimensions")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    records: tuple[VideoRecord, ...]

    def __post_init__(self):
        if not self.records:
            raise DatasetError("empty manifest")
        seen = set()
        for rec in self.records:
            if rec.video_id in seen:
                raise DatasetError(f"duplicate video_id {rec.video_id!r}")
            seen.add(rec.video_id)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass(frozen=True)
class SamplingPolicy:
    """``every_frame`` or ``per_second(n)`` frame selection."""

    mode: str
    n: float = 0.0

    def __post_init__(self):
        if self.mode not in ("every_frame", "per_second"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.mode == "per_second" and self.n <= 0:
            raise ValueError("per_second rate must be positive")

    @classmethod
    def every_frame(cls) -> "SamplingPolicy":
        return cls("every_frame")

    @classmethod
    def per_second(cls, n: float) -> "SamplingPolicy":
        return cls("per_second", float(n))


@dataclass(frozen=True)
class Frame:
    data: np.ndarray  # (h, w, 3) float, values in [0, 1]
    source_index: int
    timestamp_s: float

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


MANIFEST_COLUMNS = ["video_id", "path", "mos", "width", "height", "fps"]


def load_manifest(path: str | Path, name: str | None = None) -> DatasetManifest:
    """Load a manifest CSV; ``path`` entries are relative to its directory."""
    path = Path(path)
    base = path.parent
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != MANIFEST_COLUMNS:
            raise DatasetError(
                f"{path}: expected header {','.join(MANIFEST_COLUMNS)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                rec = VideoRecord(
                    video_id=row["video_id"],
                    path=base / row["path"],
                    mos=float(row["mos"]),
                    width=int(row["width"]),
                    height=int(row["height"]),
                    fps=float(row["fps"]),
                )
            except (TypeError, KeyError, ValueError) as exc:
                raise DatasetError(f"{path} row {lineno}: {exc}") from exc
            records.append(rec)
    if not records:
        raise DatasetError(f"{path}: empty manifest")
    return DatasetManifest(name=name or path.stem, records=tuple(records))


def combine_manifests(manifests: Sequence[DatasetManifest], name: str = "COMBINED") -> DatasetManifest:
    """Concatenate manifests, tagging video ids with their dataset name."""
    records = []
    for m in manifests:
        for rec in m:
            records.append(
                VideoRecord(
                    video_id=f"{m.name}/{rec.video_id}",
                    path=rec.path,
                    mos=rec.mos,
                    width=rec.width,
                    height=rec.height,
                    fps=rec.fps,
                    duration_s=rec.duration_s,
                )
            )
    return DatasetManifest(name=name, records=tuple(records))


def _selected_index(i: int, fps: float, n: float) -> bool:
    # i is selected iff i == floor(k * fps / n) for some integer k >= 0
    k = math.ceil(i * n / fps)
    return math.floor(k * fps / n) == i


def _iter_image_dir(path: Path) -> Iterator[np.ndarray]:
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise DatasetError(f"{path}: no image files found")
    for f in files:
        with Image.open(f) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        yield rgb


def _decoder_command(path: Path, width: int, height: int) -> list[str]:
    decoder = os.environ.get("BVQA_DECODER")
    if decoder is None:
        decoder = shutil.which("bvqa-decode") or "bvqa-decode"
    return [decoder, str(path), str(width), str(height), "rgb24"]


def _iter_raw_pipe(path: Path, width: int, height: int) -> Iterator[np.ndarray]:
    cmd = _decoder_command(path, width, height)
    frame_bytes = width * height * 3
    try:
        proc = subprocess.Popen(cmd, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL)
    except OSError as exc:
        raise DatasetError(f"cannot launch decoder {cmd[0]!r}: {exc}") from exc
    assert proc.stdout is not None
    try:
        while True:
            buf = proc.stdout.read(frame_bytes)
            if not buf:
                break
            if len(buf) != frame_bytes:
                raise DatasetError(f"{path}: truncated frame from decoder")
            yield np.frombuffer(buf, dtype=np.uint8).reshape(height, width, 3).astype(np.float64) / 255.0
    finally:
        proc.stdout.close()
        proc.wait()


def iter_frames(video: VideoRecord) -> Iterator[Frame]:
    """Decode every frame of ``video`` in order."""
    if video.path.is_dir():
        source = _iter_image_dir(video.path)
    else:
        source = _iter_raw_pipe(video.path, video.width, video.height)
    for idx, rgb in enumerate(source):
        yield Frame(data=rgb, source_index=idx, timestamp_s=idx / video.fps)


def sample_frames(video: VideoRecord, policy: SamplingPolicy) -> list[Frame]:
    """Deterministically select frames per the sampling policy.

    ``per_second(n)`` keeps frame indices floor(k*fps/n); at least one
    frame is always returned for a decodable video.
    """
    frames = []
    count = 0
    for frame in iter_frames(video):
        count += 1
        if policy.mode == "every_frame" or _selected_index(frame.source_index, video.fps, policy.n):
            frames.append(frame)
    if count == 0:
        raise DatasetError(f"{video.video_id}: zero decodable frames")
    return frames


def resize_normalize(frame: Frame, target_w: int, target_h: int) -> Frame:
    """Bilinear resize; output clamped to [0, 1]."""
    if target_w <= 0 or target_h <= 0:
        raise ValueError("target dimensions must be positive")
    if frame.width == target_w and frame.height == target_h:
        return frame
    out = np.empty((target_h, target_w, 3), dtype=np.float64)
    for c in range(3):
        out[:, :, c] = resize_bilinear(frame.data[:, :, c], target_h, target_w)
    np.clip(out, 0.0, 1.0, out=out)
    return Frame(data=out, source_index=frame.source_index, timestamp_s=frame.timestamp_s)


# BT.601 analysis matrix on the [0, 255] scale; chroma kept zero-centered.
_BT601 = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)


def frame_ycbcr(frame: Frame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (luma, cb, cr) planes; luma in [0, 255], chroma centered at 0."""
    rgb = frame.data * 255.0
    y = rgb @ _BT601[0]
    cb = rgb @ _BT601[1]
    cr = rgb @ _BT601[2]
    return y, cb, cr


def decode_cli() -> None:
    """Entry point implementing the raw-RGB decoder contract via ffmpeg."""
    if len(sys.argv) != 5 or sys.argv[4] != "rgb24":
        print("usage: bvqa-decode <input> <width> <height> rgb24", file=sys.stderr)
        raise SystemExit(2)
    inp, width, height = sys.argv[1], int(sys.argv[2]), int(sys.argv[3])
    ffmpeg = shutil.which("ffmpeg")
    if ffmpeg is None:
        print("bvqa-decode: ffmpeg not found on PATH", file=sys.stderr)
        raise SystemExit(1)
    cmd = [
        ffmpeg, "-nostdin", "-v", "error", "-i", inp,
        "-vf", f"scale={width}:{height}",
        "-f", "rawvideo", "-pix_fmt", "rgb24", "-",
    ]
    raise SystemExit(subprocess.call(cmd))
