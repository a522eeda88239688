"""Pooled deep CNN features and activation dumps."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import Frame
from .inference import GraphError, InferenceGraph

CNN_DIM = 2048
VSFA_DIM = 4096

MAX_DUMP_CHANNELS = 64


@dataclass(frozen=True)
class DeepFeature:
    kind: str  # cnn2048 | vsfa4096
    values: np.ndarray

    def __post_init__(self):
        expected = {"cnn2048": CNN_DIM, "vsfa4096": VSFA_DIM}[self.kind]
        if self.values.shape != (expected,):
            raise GraphError(f"{self.kind}: expected {expected} dims, got {self.values.shape}")


def _frame_batch(frame: Frame, graph: InferenceGraph) -> np.ndarray:
    c, h, w = graph.input_shape
    if frame.data.shape != (h, w, c):
        raise GraphError(
            f"frame shape {frame.data.shape} does not match graph input {(h, w, c)}"
        )
    return frame.data.transpose(2, 0, 1)[None].astype(np.float32)


def conv_maps(frame: Frame, graph: InferenceGraph) -> np.ndarray:
    """Final convolutional maps (C, H, W) for one frame."""
    return graph.run(_frame_batch(frame, graph), ["conv_final"])["conv_final"][0]


def deep_feature(frame: Frame, graph: InferenceGraph) -> DeepFeature:
    """Spatial average pooling of the final conv maps: 2048 dims."""
    maps = conv_maps(frame, graph)
    if maps.shape[0] != CNN_DIM:
        raise GraphError(f"{graph.graph_id}: conv_final has {maps.shape[0]} channels, need {CNN_DIM}")
    return DeepFeature(kind="cnn2048", values=maps.mean(axis=(1, 2)).astype(np.float64))


def pool_maps_mean_std(maps: np.ndarray) -> np.ndarray:
    """Concatenated spatial mean and std pooling of (C, H, W) maps."""
    mean = maps.mean(axis=(1, 2))
    std = maps.std(axis=(1, 2))
    return np.concatenate([mean, std]).astype(np.float64)


def vsfa_content_feature(frame: Frame, graph: InferenceGraph) -> DeepFeature:
    """Content-aware feature: mean pooling (2048) + std pooling (2048)."""
    maps = conv_maps(frame, graph)
    if maps.shape[0] != CNN_DIM:
        raise GraphError(f"{graph.graph_id}: conv_final has {maps.shape[0]} channels, need {CNN_DIM}")
    return DeepFeature(kind="vsfa4096", values=pool_maps_mean_std(maps))


def pool_video(per_frame: list[DeepFeature]) -> DeepFeature:
    """Element-wise mean of per-frame features; kind is preserved."""
    if not per_frame:
        raise ValueError("empty feature list")
    kinds = {f.kind for f in per_frame}
    if len(kinds) != 1:
        raise ValueError(f"mixed feature kinds: {sorted(kinds)}")
    stacked = np.stack([f.values for f in per_frame])
    return DeepFeature(kind=per_frame[0].kind, values=stacked.mean(axis=0))


def _to_image(channel: np.ndarray) -> Image.Image:
    lo = float(channel.min())
    hi = float(channel.max())
    if hi > lo:
        norm = (channel - lo) / (hi - lo)
    else:
        norm = np.full_like(channel, 0.5)  # uniform gray for flat activations
    return Image.fromarray((norm * 255.0).round().astype(np.uint8), mode="L")


def dump_activations(frame: Frame, graph: InferenceGraph, layer: str, out_dir: str | Path) -> dict:
    """Write per-channel activation images and the max-activation channel.

    Deep layers are truncated to their first 64 channels; the max channel
    is selected over all channels by peak activation.
    """
    if layer not in graph.taps and layer not in graph.outputs:
        raise GraphError(f"{graph.graph_id}: unknown layer {layer!r}")
    maps = graph.run(_frame_batch(frame, graph), [layer])[layer][0]
    if maps.ndim != 3:
        raise GraphError(f"{layer!r} is not a spatial activation ({maps.shape})")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_channels = min(maps.shape[0], MAX_DUMP_CHANNELS)
    written = []
    for ch in range(n_channels):
        path = out_dir / f"{layer}_ch{ch:04d}.png"
        _to_image(maps[ch]).save(path)
        written.append(path)
    max_channel = int(np.argmax(maps.max(axis=(1, 2))))
    max_path = out_dir / f"{layer}_max_ch{max_channel:04d}.png"
    _to_image(maps[max_channel]).save(max_path)
    return {"channels": written, "max_channel": max_channel, "max_image": max_path}
