"""Windowed cosine similarity between deep and saliency features."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from bvqa.correlation import (
    DEEP_DIM,
    WINDOW_COUNT,
    WINDOW_SIZE,
    CorrelationError,
    CorrelationRecord,
    cosine,
    dataset_correlation,
    histogram,
    reduce_saliency,
    windowed_cosine,
    write_outputs,
)
from bvqa.fusion import GraphSet
from bvqa.kernels import resize_bilinear
from bvqa.saliency import SaliencyMap
from conftest import manifest_of, single_video


def oracle_windowed_cosine(df, s):
    """Double-loop cosine over every stride-1 window."""
    values = []
    for offset in range(DEEP_DIM - WINDOW_SIZE + 1):
        w = df[offset:offset + WINDOW_SIZE]
        nw = np.sqrt(sum(v * v for v in w))
        ns = np.sqrt(sum(v * v for v in s))
        if nw == 0.0:
            continue
        dot = sum(a * b for a, b in zip(w, s))
        values.append(min(max(dot / (nw * ns), -1.0), 1.0))
    return len(values), float(np.mean(values))


class TestCosine:
    def test_parallel_and_antiparallel(self):
        v = np.array([1.0, 2.0, 3.0])
        assert cosine(v, 2.0 * v) == pytest.approx(1.0, abs=1e-15)
        assert cosine(v, -v) == pytest.approx(-1.0, abs=1e-15)

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 5.0]) == pytest.approx(0.0, abs=1e-15)

    def test_zero_vector_rejected(self):
        with pytest.raises(CorrelationError):
            cosine([0.0, 0.0], [1.0, 1.0])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(CorrelationError):
            cosine([1.0], [1.0, 2.0])


class TestWindowedCosine:
    def test_window_count_is_24(self):
        rng = np.random.default_rng(0)
        df = rng.random(DEEP_DIM) + 0.1
        s = rng.random(WINDOW_SIZE) + 0.1
        count, _ = windowed_cosine(df, s)
        assert WINDOW_COUNT == 24
        assert count == 24

    def test_every_window_equal_gives_average_one(self):
        # construction: constant fill makes every stride-1 window a positive
        # multiple of the saliency vector, so each cosine is exactly 1
        df = np.full(DEEP_DIM, 0.5)
        s_const = np.full(WINDOW_SIZE, 0.3)
        count, avg = windowed_cosine(df, s_const)
        assert count == 24
        assert avg == pytest.approx(1.0, abs=1e-12)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(2)
        df = rng.standard_normal(DEEP_DIM)
        s = rng.standard_normal(WINDOW_SIZE)
        got = windowed_cosine(df, s)
        expected = oracle_windowed_cosine(df, s)
        assert got[0] == expected[0]
        assert abs(got[1] - expected[1]) < 1e-12

    def test_zero_windows_skipped(self):
        rng = np.random.default_rng(3)
        df = np.zeros(DEEP_DIM)
        df[WINDOW_SIZE:] = rng.random(DEEP_DIM - WINDOW_SIZE) + 0.1
        s = rng.random(WINDOW_SIZE) + 0.1
        count, _ = windowed_cosine(df, s)
        assert count < 24

    def test_all_zero_deep_feature_rejected(self):
        s = np.ones(WINDOW_SIZE)
        with pytest.raises(CorrelationError):
            windowed_cosine(np.zeros(DEEP_DIM), s)

    def test_wrong_dims_rejected(self):
        with pytest.raises(CorrelationError):
            windowed_cosine(np.ones(100), np.ones(WINDOW_SIZE))


class TestReduceSaliency:
    def test_shape_and_equivalence(self):
        rng = np.random.default_rng(4)
        values = rng.random((224, 224))
        got = reduce_saliency(SaliencyMap(values=values))
        assert got.shape == (WINDOW_SIZE,)
        assert np.allclose(got, resize_bilinear(values, 45, 45).ravel(), atol=1e-15)


class TestHistogram:
    def test_bin_layout(self):
        edges, counts = histogram([0.455, 0.456, -0.3])
        assert len(edges) == 201
        assert counts.sum() == 3
        assert edges[0] == -1.0 and edges[-1] == 1.0

    def test_values_land_in_correct_bins(self):
        edges, counts = histogram([0.455])
        idx = int(np.nonzero(counts)[0][0])
        assert edges[idx] <= 0.455 < edges[idx + 1]


class TestDatasetCorrelation:
    def test_end_to_end_records(self, tmp_path, resnet_graph, vgg_graph):
        video = single_video(tmp_path, n_frames=8, size=64, fps=8.0)
        manifest = manifest_of([video])
        graphs = GraphSet(cnn=resnet_graph, saliency=vgg_graph)
        records, failures = dataset_correlation(manifest, graphs)
        assert not failures
        assert len(records) == 1  # 1 s of video at 1 fps
        rec = records[0]
        assert rec.windows <= 24
        assert -1.0 <= rec.avg_cosine <= 1.0

    def test_missing_graphs_rejected(self, tmp_path):
        video = single_video(tmp_path)
        with pytest.raises(CorrelationError):
            dataset_correlation(manifest_of([video]), GraphSet())

    def test_write_outputs(self, tmp_path):
        records = [
            CorrelationRecord("v0", 0, 24, 0.451),
            CorrelationRecord("v0", 30, 24, 0.462),
            CorrelationRecord("v1", 0, 23, -0.1),
        ]
        write_outputs(records, tmp_path)
        with open(tmp_path / "correlation.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["video_id", "frame_index", "avg_cosine"]
        assert len(rows) == 4
        assert float(rows[1][2]) == 0.451
        payload = json.loads((tmp_path / "correlation_histogram.json").read_text())
        assert payload["total"] == 3
        assert payload["bin_width"] == 0.01
        assert sum(payload["counts"]) == 3
