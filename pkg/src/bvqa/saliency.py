"""Score-CAM saliency maps and map-level fusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Frame
from .inference import InferenceGraph
from .kernels import resize_bilinear

MAP_SIZE = 224
VECTOR_DIM = 224
MASK_BATCH = 32


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray  # (224, 224) in [0, 1]
    degenerate: bool = False


@dataclass(frozen=True)
class SaliencyVector:
    values: np.ndarray  # (224,)


def _minmax(m: np.ndarray) -> np.ndarray:
    lo = float(m.min())
    hi = float(m.max())
    if hi > lo:
        return (m - lo) / (hi - lo)
    return np.zeros_like(m)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def score_cam(frame: Frame, graph: InferenceGraph, mask_batch: int = MASK_BATCH) -> SaliencyMap:
    """Score-CAM saliency of a 224x224 normalized frame.

    Steps: (1) forward pass for activation maps and the argmax class;
    (2) bilinear upsample each map to 224x224, min-max normalize as a
    mask; (3) forward the masked inputs, take the target-class softmax
    score; (4) softmax the scores into channel weights and min-max
    normalize the ReLU of the weighted sum of upsampled maps.
    """
    if frame.data.shape != (MAP_SIZE, MAP_SIZE, 3):
        raise ValueError(f"score_cam expects a {MAP_SIZE}x{MAP_SIZE} RGB frame")
    x = frame.data.transpose(2, 0, 1)[None].astype(np.float32)
    out = graph.run(x, ["conv_final", "logits"])
    acts = out["conv_final"][0].astype(np.float64)  # (K, h, w)
    target = int(np.argmax(out["logits"][0]))

    k = acts.shape[0]
    upsampled = np.stack([resize_bilinear(acts[ch], MAP_SIZE, MAP_SIZE) for ch in range(k)])
    masks = np.stack([_minmax(upsampled[ch]) for ch in range(k)])

    scores = np.empty(k)
    for start in range(0, k, mask_batch):
        chunk = masks[start:start + mask_batch]
        masked = frame.data[None] * chunk[:, :, :, None]  # (B, H, W, 3)
        logits = graph.run(
            masked.transpose(0, 3, 1, 2).astype(np.float32), ["logits"]
        )["logits"]
        for b in range(chunk.shape[0]):
            scores[start + b] = _softmax(logits[b].astype(np.float64))[target]

    weights = _softmax(scores)
    combined = np.tensordot(weights, upsampled, axes=1)
    relu = np.maximum(combined, 0.0)
    if relu.max() <= 0.0:
        return SaliencyMap(values=np.zeros((MAP_SIZE, MAP_SIZE)), degenerate=True)
    return SaliencyMap(values=_minmax(relu))


def saliency_vector(smap: SaliencyMap) -> SaliencyVector:
    """Column-wise mean reduction of a 224x224 map to 224 values."""
    return SaliencyVector(values=smap.values.mean(axis=0))


def fuse_map_sum(conv_maps: np.ndarray, smap: SaliencyMap) -> np.ndarray:
    """Broadcast-add the saliency map (resized to H x W) to every channel."""
    if conv_maps.ndim != 3:
        raise ValueError(f"expected (C, H, W) maps, got {conv_maps.shape}")
    h, w = conv_maps.shape[1], conv_maps.shape[2]
    resized = resize_bilinear(smap.values, h, w)
    return conv_maps.astype(np.float64) + resized[None, :, :]
