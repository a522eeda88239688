"""Fixtures: seeded exports shared across the parity tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from bvqa_export.exporters import build_model, export_graph

REPO_DATA = Path(__file__).resolve().parents[2] / "tests" / "data"


@pytest.fixture(scope="session")
def canonical_image() -> np.ndarray:
    return np.load(REPO_DATA / "canonical_image.npy").astype(np.float64)


@pytest.fixture(scope="session")
def export_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("exported")


@pytest.fixture(scope="session")
def resnet_export(export_dir):
    sidecar = export_graph("resnet50", export_dir, seed=0)
    model = build_model("resnet50", seed=0)
    return export_dir / "resnet50_features.onnx", sidecar, model


@pytest.fixture(scope="session")
def vgg_export(export_dir):
    sidecar = export_graph("vgg16", export_dir, seed=0)
    model = build_model("vgg16", seed=0)
    return export_dir / "vgg16_features.onnx", sidecar, model
