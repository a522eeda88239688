"""Assembly of the eleven feature sets with exact dimensional contracts."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import features, nss, saliency
from .dataset import Frame, SamplingPolicy, VideoRecord, resize_normalize, sample_frames
from .inference import InferenceGraph

INPUT_SIZE = 224


_KIND_DIMS = {
    "SALIENCY": 224,
    "NSS": 1836,
    "NSS_SALIENCY": 2060,
    "NSS_CNN": 3884,
    "NSS_CNN_SALIENCY": 4108,
    "NSS_VSFACNN": 5932,
    "NSS_VSFACNN_SALIENCY": 5932,
    "CNN": 2048,
    "CNN_SALIENCY": 2272,
    "VSFACNN": 4096,
    "VSFACNN_SALIENCY": 4096,
}


class FeatureKind(Enum):
    SALIENCY = "SALIENCY"
    NSS = "NSS"
    NSS_SALIENCY = "NSS_SALIENCY"
    NSS_CNN = "NSS_CNN"
    NSS_CNN_SALIENCY = "NSS_CNN_SALIENCY"
    NSS_VSFACNN = "NSS_VSFACNN"
    NSS_VSFACNN_SALIENCY = "NSS_VSFACNN_SALIENCY"
    CNN = "CNN"
    CNN_SALIENCY = "CNN_SALIENCY"
    VSFACNN = "VSFACNN"
    VSFACNN_SALIENCY = "VSFACNN_SALIENCY"

    @property
    def dim(self) -> int:
        return _KIND_DIMS[self.name]

    @property
    def needs_nss(self) -> bool:
        return self.name.startswith("NSS")

    @property
    def needs_cnn_graph(self) -> bool:
        return "CNN" in self.name

    @property
    def needs_saliency_graph(self) -> bool:
        return self.name.endswith("SALIENCY") or self.name == "SALIENCY"


ALL_KINDS = tuple(FeatureKind)


@dataclass(frozen=True)
class FeatureVector:
    kind: FeatureKind
    video_id: str
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.kind.dim,):
            raise ValueError(
                f"{self.video_id}: {self.kind.name} expects {self.kind.dim} dims, "
                f"got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.video_id}: non-finite entries in {self.kind.name}")


@dataclass(frozen=True)
class GraphSet:
    cnn: InferenceGraph | None = None  # resnet50-style, 2048-channel conv_final
    saliency: InferenceGraph | None = None  # vgg16-style Score-CAM backbone


def concat(parts: list[np.ndarray]) -> np.ndarray:
    if not parts:
        raise ValueError("nothing to concatenate")
    return np.concatenate(parts)


def _resized(frames: list[Frame]) -> list[Frame]:
    return [resize_normalize(f, INPUT_SIZE, INPUT_SIZE) for f in frames]


def _saliency_maps(video: VideoRecord, graph: InferenceGraph) -> list[saliency.SaliencyMap]:
    frames = _resized(sample_frames(video, SamplingPolicy.per_second(1)))
    return [saliency.score_cam(f, graph) for f in frames]


def _saliency_block(video: VideoRecord, graph: InferenceGraph) -> np.ndarray:
    vectors = [saliency.saliency_vector(m).values for m in _saliency_maps(video, graph)]
    return np.stack(vectors).mean(axis=0)


def _cnn_block(video: VideoRecord, graph: InferenceGraph) -> np.ndarray:
    frames = _resized(sample_frames(video, SamplingPolicy.per_second(1)))
    pooled = features.pool_video([features.deep_feature(f, graph) for f in frames])
    return pooled.values


def _vsfa_block(video: VideoRecord, graph: InferenceGraph) -> np.ndarray:
    frames = _resized(sample_frames(video, SamplingPolicy.every_frame()))
    pooled = features.pool_video([features.vsfa_content_feature(f, graph) for f in frames])
    return pooled.values


def _vsfa_saliency_block(video: VideoRecord, cnn_graph: InferenceGraph,
                         sal_graph: InferenceGraph) -> np.ndarray:
    """Sum-fused VSFA feature: saliency added to the conv maps, then pooled."""
    frames = _resized(sample_frames(video, SamplingPolicy.per_second(1)))
    pooled = []
    for frame in frames:
        maps = features.conv_maps(frame, cnn_graph)
        smap = saliency.score_cam(frame, sal_graph)
        fused = saliency.fuse_map_sum(maps, smap)
        pooled.append(features.DeepFeature(kind="vsfa4096",
                                           values=features.pool_maps_mean_std(fused)))
    return features.pool_video(pooled).values


def build_feature(video: VideoRecord, kind: FeatureKind, graphs: GraphSet) -> FeatureVector:
    """Compute one feature vector; concatenation order is NSS, deep, saliency."""
    if kind.needs_cnn_graph and graphs.cnn is None:
        raise ValueError(f"{kind.name} requires a CNN feature graph")
    if kind.needs_saliency_graph and graphs.saliency is None:
        raise ValueError(f"{kind.name} requires a saliency graph")
    try:
        parts: list[np.ndarray] = []
        if kind.needs_nss:
            parts.append(nss.nss_video_vector(video).values)
        if kind is FeatureKind.SALIENCY:
            parts.append(_saliency_block(video, graphs.saliency))
        elif kind in (FeatureKind.CNN, FeatureKind.NSS_CNN):
            parts.append(_cnn_block(video, graphs.cnn))
        elif kind in (FeatureKind.CNN_SALIENCY, FeatureKind.NSS_CNN_SALIENCY):
            parts.append(_cnn_block(video, graphs.cnn))
            parts.append(_saliency_block(video, graphs.saliency))
        elif kind in (FeatureKind.VSFACNN, FeatureKind.NSS_VSFACNN):
            parts.append(_vsfa_block(video, graphs.cnn))
        elif kind in (FeatureKind.VSFACNN_SALIENCY, FeatureKind.NSS_VSFACNN_SALIENCY):
            parts.append(_vsfa_saliency_block(video, graphs.cnn, graphs.saliency))
        elif kind is FeatureKind.NSS_SALIENCY:
            parts.append(_saliency_block(video, graphs.saliency))
        return FeatureVector(kind=kind, video_id=video.video_id, values=concat(parts))
    except Exception as exc:
        raise RuntimeError(f"feature extraction failed for {video.video_id}: {exc}") from exc
