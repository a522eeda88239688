"""Shared fixtures: checked-in tiny graphs and synthetic clip builders."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from PIL import Image
from scipy.ndimage import gaussian_filter

from bvqa.dataset import DatasetManifest, Frame, VideoRecord
from bvqa.inference import InferenceGraph

DATA_DIR = Path(__file__).parent / "data"
MODELS_DIR = DATA_DIR / "models"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def models_dir() -> Path:
    return MODELS_DIR


@pytest.fixture(scope="session")
def resnet_graph() -> InferenceGraph:
    return InferenceGraph.load(MODELS_DIR / "resnet50_features.onnx")


@pytest.fixture(scope="session")
def vgg_graph() -> InferenceGraph:
    return InferenceGraph.load(MODELS_DIR / "vgg16_features.onnx")


@pytest.fixture(scope="session")
def twomap_graph() -> InferenceGraph:
    return InferenceGraph.load(MODELS_DIR / "twomap.onnx")


@pytest.fixture(scope="session")
def onemap_graph() -> InferenceGraph:
    return InferenceGraph.load(MODELS_DIR / "onemap.onnx")


@pytest.fixture(scope="session")
def canonical_image() -> np.ndarray:
    return np.load(DATA_DIR / "canonical_image.npy").astype(np.float64)


@pytest.fixture(scope="session")
def canonical_frame(canonical_image) -> Frame:
    return Frame(data=canonical_image, source_index=0, timestamp_s=0.0)


def synth_frames(n_frames: int, size: int, seed: int, blur: float = 0.0,
                 noise: float = 0.0) -> np.ndarray:
    """Deterministic textured clip (n, h, w, 3) in [0, 1] with optional degradation."""
    rng = np.random.default_rng(seed)
    base = gaussian_filter(rng.random((size, size, 3)), sigma=(3, 3, 0))
    lo, hi = base.min(), base.max()
    base = (base - lo) / (hi - lo)
    texture = rng.random((size, size, 3)) * 0.25
    frames = np.empty((n_frames, size, size, 3))
    for t in range(n_frames):
        frame = np.roll(base, shift=t, axis=1) * 0.75 + np.roll(texture, shift=-t, axis=0)
        if blur > 0.0:
            frame = gaussian_filter(frame, sigma=(blur, blur, 0))
        if noise > 0.0:
            frame = frame + rng.normal(0.0, noise, frame.shape)
        frames[t] = np.clip(frame, 0.0, 1.0)
    return frames


def write_clip(dir_path: Path, frames: np.ndarray) -> None:
    dir_path.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        img = Image.fromarray((frame * 255.0).round().astype(np.uint8))
        img.save(dir_path / f"frame_{t:05d}.png")


def write_manifest(path: Path, rows: list[dict]) -> Path:
    lines = ["video_id,path,mos,width,height,fps"]
    for row in rows:
        lines.append(
            f"{row['video_id']},{row['path']},{row['mos']},"
            f"{row['width']},{row['height']},{row['fps']}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def build_mini_dataset(root: Path, n_videos: int = 5, n_frames: int = 16,
                       size: int = 64, fps: float = 8.0) -> Path:
    """n_videos image-dir clips with graded degradation; returns the manifest path."""
    rows = []
    for k in range(n_videos):
        clip_dir = root / f"clip{k:02d}"
        level = k / max(n_videos - 1, 1)
        frames = synth_frames(n_frames, size, seed=1000 + k,
                              blur=2.0 * level, noise=0.08 * level)
        write_clip(clip_dir, frames)
        rows.append({
            "video_id": f"clip{k:02d}", "path": clip_dir.name,
            "mos": round(5.0 - 4.0 * level, 3),
            "width": size, "height": size, "fps": fps,
        })
    return write_manifest(root / "manifest.csv", rows)


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory) -> Path:
    """Manifest path for a 5-clip synthetic dataset (16 frames, 64x64, 8 fps)."""
    root = tmp_path_factory.mktemp("mini_dataset")
    return build_mini_dataset(root)


def single_video(root: Path, n_frames: int = 16, size: int = 64, fps: float = 8.0,
                 seed: int = 7, mos: float = 3.0) -> VideoRecord:
    clip_dir = root / "clip"
    write_clip(clip_dir, synth_frames(n_frames, size, seed))
    return VideoRecord(video_id="clip", path=clip_dir, mos=mos,
                       width=size, height=size, fps=fps)


@pytest.fixture()
def video(tmp_path) -> VideoRecord:
    return single_video(tmp_path)


@pytest.fixture(scope="session")
def session_video(tmp_path_factory) -> VideoRecord:
    return single_video(tmp_path_factory.mktemp("session_video"))


def manifest_of(records: list[VideoRecord], name: str = "synthetic") -> DatasetManifest:
    return DatasetManifest(name=name, records=tuple(records))


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance pass/fail lines past pytest's output capture."""
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
