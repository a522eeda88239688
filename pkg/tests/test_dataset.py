"""Manifest parsing, frame sampling, and frame normalization."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bvqa.dataset import (
    DatasetError,
    DatasetManifest,
    Frame,
    SamplingPolicy,
    VideoRecord,
    combine_manifests,
    frame_ycbcr,
    iter_frames,
    load_manifest,
    resize_normalize,
    sample_frames,
)
from conftest import build_mini_dataset, single_video, write_manifest


class TestVideoRecord:
    def test_mos_out_of_range_rejected(self, tmp_path):
        with pytest.raises(DatasetError, match="mos"):
            VideoRecord("v", tmp_path, mos=5.5, width=64, height=64, fps=8.0)

    def test_non_positive_fps_rejected(self, tmp_path):
        with pytest.raises(DatasetError, match="fps"):
            VideoRecord("v", tmp_path, mos=3.0, width=64, height=64, fps=0.0)


class TestManifest:
    def test_load_round_trip(self, mini_dataset):
        manifest = load_manifest(mini_dataset)
        assert len(manifest) == 5
        assert manifest.records[0].video_id == "clip00"
        assert manifest.records[0].path.is_dir()

    def test_bad_header_rejected(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("id,path,mos\nv,clip,3\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="expected header"):
            load_manifest(p)

    def test_bad_row_reports_line_number(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "video_id,path,mos,width,height,fps\nv0,clip,notanumber,64,64,8\n",
            encoding="utf-8",
        )
        with pytest.raises(DatasetError, match="row 2"):
            load_manifest(p)

    def test_duplicate_ids_rejected(self, tmp_path):
        rows = [
            {"video_id": "v", "path": "a", "mos": 3, "width": 8, "height": 8, "fps": 8},
            {"video_id": "v", "path": "b", "mos": 3, "width": 8, "height": 8, "fps": 8},
        ]
        p = write_manifest(tmp_path / "m.csv", rows)
        with pytest.raises(DatasetError, match="duplicate"):
            load_manifest(p)

    def test_combine_tags_ids(self, tmp_path):
        m1 = load_manifest(build_mini_dataset(tmp_path / "a", n_videos=2), name="A")
        m2 = load_manifest(build_mini_dataset(tmp_path / "b", n_videos=2), name="B")
        combined = combine_manifests([m1, m2])
        ids = [r.video_id for r in combined]
        assert ids == ["A/clip00", "A/clip01", "B/clip00", "B/clip01"]


class TestSampling:
    def test_every_frame(self, video):
        frames = sample_frames(video, SamplingPolicy.every_frame())
        assert [f.source_index for f in frames] == list(range(16))

    @pytest.mark.parametrize("fps,n", [(8.0, 1), (8.0, 2), (30.0, 2), (24.0, 8), (25.0, 1)])
    def test_per_second_matches_floor_rule(self, tmp_path, fps, n):
        # oracle: indices floor(k * fps / n), deduplicated, within range
        video = single_video(tmp_path, n_frames=40, size=16, fps=fps)
        frames = sample_frames(video, SamplingPolicy.per_second(n))
        expected = sorted({math.floor(k * fps / n) for k in range(200)} & set(range(40)))
        assert [f.source_index for f in frames] == expected

    def test_oversampling_keeps_every_frame(self, tmp_path):
        video = single_video(tmp_path, n_frames=8, size=16, fps=4.0)
        frames = sample_frames(video, SamplingPolicy.per_second(8))
        assert [f.source_index for f in frames] == list(range(8))

    def test_min_one_frame(self, tmp_path):
        video = single_video(tmp_path, n_frames=1, size=16, fps=30.0)
        assert len(sample_frames(video, SamplingPolicy.per_second(1))) == 1

    def test_empty_dir_is_error(self, tmp_path):
        clip = tmp_path / "empty"
        clip.mkdir()
        video = VideoRecord("v", clip, mos=3.0, width=16, height=16, fps=8.0)
        with pytest.raises(DatasetError):
            sample_frames(video, SamplingPolicy.every_frame())

    def test_bad_policy_rejected(self):
        with pytest.raises(ValueError):
            SamplingPolicy.per_second(0)
        with pytest.raises(ValueError):
            SamplingPolicy("sometimes")


class TestFrames:
    def test_iter_frames_timestamps(self, video):
        frames = list(iter_frames(video))
        assert frames[3].timestamp_s == pytest.approx(3 / 8)
        assert frames[0].data.shape == (64, 64, 3)
        assert frames[0].data.min() >= 0.0 and frames[0].data.max() <= 1.0

    def test_resize_normalize_shape_and_range(self, video):
        frame = next(iter_frames(video))
        out = resize_normalize(frame, 224, 224)
        assert out.data.shape == (224, 224, 3)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0
        assert out.source_index == frame.source_index

    def test_resize_noop_returns_same_frame(self, video):
        frame = next(iter_frames(video))
        assert resize_normalize(frame, 64, 64) is frame

    def test_ycbcr_ranges(self):
        rng = np.random.default_rng(0)
        frame = Frame(data=rng.random((32, 32, 3)), source_index=0, timestamp_s=0.0)
        y, cb, cr = frame_ycbcr(frame)
        assert 0.0 <= y.min() and y.max() <= 255.0
        assert abs(cb.mean()) < 130 and abs(cr.mean()) < 130

    def test_ycbcr_gray_has_zero_chroma(self):
        gray = np.full((16, 16, 3), 0.5)
        frame = Frame(data=gray, source_index=0, timestamp_s=0.0)
        y, cb, cr = frame_ycbcr(frame)
        assert np.allclose(y, 127.5, atol=0.01)
        assert np.allclose(cb, 0.0, atol=1e-9)
        assert np.allclose(cr, 0.0, atol=1e-9)

    def test_empty_manifest_rejected(self):
        with pytest.raises(DatasetError):
            DatasetManifest(name="x", records=())
