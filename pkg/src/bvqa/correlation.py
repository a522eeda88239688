"""Window-shifted cosine similarity between deep and saliency features."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import SamplingPolicy, VideoRecord, resize_normalize, sample_frames
from .features import deep_feature
from .fusion import GraphSet
from .kernels import resize_bilinear
from .saliency import SaliencyMap, score_cam

REDUCED_SIZE = 45
WINDOW_SIZE = REDUCED_SIZE * REDUCED_SIZE  # 2025
DEEP_DIM = 2048
WINDOW_COUNT = DEEP_DIM - WINDOW_SIZE + 1  # 24
HIST_BIN_WIDTH = 0.01


class CorrelationError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationRecord:
    video_id: str
    frame_index: int
    windows: int
    avg_cosine: float


def cosine(v1, v2) -> float:
    v1 = np.asarray(v1, dtype=np.float64).ravel()
    v2 = np.asarray(v2, dtype=np.float64).ravel()
    if v1.shape != v2.shape:
        raise CorrelationError("dimension mismatch")
    n1 = float(np.linalg.norm(v1))
    n2 = float(np.linalg.norm(v2))
    if n1 == 0.0 or n2 == 0.0:
        raise CorrelationError("cosine undefined for a zero vector")
    return float(np.clip(np.dot(v1, v2) / (n1 * n2), -1.0, 1.0))


def reduce_saliency(smap: SaliencyMap) -> np.ndarray:
    """Bilinear 224x224 -> 45x45 downsample, flattened row-major to 2025."""
    return resize_bilinear(smap.values, REDUCED_SIZE, REDUCED_SIZE).ravel()


def windowed_cosine(df: np.ndarray, s: np.ndarray) -> tuple[int, float]:
    """Mean cosine over all stride-1 windows of the deep feature.

    Zero windows are skipped (flagged via the returned window count);
    an all-skipped frame is an error.
    """
    df = np.asarray(df, dtype=np.float64).ravel()
    s = np.asarray(s, dtype=np.float64).ravel()
    if df.size != DEEP_DIM or s.size != WINDOW_SIZE:
        raise CorrelationError(
            f"expected dims ({DEEP_DIM}, {WINDOW_SIZE}), got ({df.size}, {s.size})"
        )
    if np.linalg.norm(s) == 0.0:
        raise CorrelationError("zero saliency vector")
    values = []
    for offset in range(WINDOW_COUNT):
        window = df[offset:offset + WINDOW_SIZE]
        if np.linalg.norm(window) == 0.0:
            continue
        values.append(cosine(window, s))
    if not values:
        raise CorrelationError("all windows were zero")
    return len(values), float(np.mean(values))


def histogram(values, bin_width: float = HIST_BIN_WIDTH):
    edges = np.round(np.arange(-1.0, 1.0 + bin_width / 2, bin_width), 10)
    counts, _ = np.histogram(values, bins=edges)
    return edges, counts


def dataset_correlation(manifest, graphs: GraphSet):
    """Per-frame windowed cosine over a dataset at 1 fps sampling.

    Returns (records, failures); per-video failures are collected and the
    batch continues.
    """
    if graphs.cnn is None or graphs.saliency is None:
        raise CorrelationError("correlation analysis needs both inference graphs")
    records: list[CorrelationRecord] = []
    failures: list[tuple[str, str]] = []
    for video in manifest:
        try:
            records.extend(video_correlation(video, graphs))
        except Exception as exc:
            failures.append((video.video_id, str(exc)))
    return records, failures


def video_correlation(video: VideoRecord, graphs: GraphSet) -> list[CorrelationRecord]:
    frames = sample_frames(video, SamplingPolicy.per_second(1))
    records = []
    for frame in frames:
        resized = resize_normalize(frame, 224, 224)
        df = deep_feature(resized, graphs.cnn).values
        smap = score_cam(resized, graphs.saliency)
        windows, avg = windowed_cosine(df, reduce_saliency(smap))
        records.append(
            CorrelationRecord(
                video_id=video.video_id,
                frame_index=frame.source_index,
                windows=windows,
                avg_cosine=avg,
            )
        )
    return records


def write_outputs(records: list[CorrelationRecord], out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "correlation.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "frame_index", "avg_cosine"])
        for rec in records:
            writer.writerow([rec.video_id, rec.frame_index, repr(rec.avg_cosine)])
    edges, counts = histogram([rec.avg_cosine for rec in records])
    payload = {
        "bin_width": HIST_BIN_WIDTH,
        "bin_edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
        "total": int(counts.sum()),
    }
    with open(out_dir / "correlation_histogram.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
