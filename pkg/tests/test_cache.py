"""Feature-cache persistence: bit-exact round trips and validation."""

from __future__ import annotations

import numpy as np
import pytest

from bvqa.cache import (
    CacheError,
    has_valid_entry,
    load_all,
    read_entry,
    write_entry,
)
from bvqa.fusion import FeatureKind, FeatureVector


def make_fv(kind=FeatureKind.CNN, video_id="v0", seed=0):
    rng = np.random.default_rng(seed)
    return FeatureVector(kind=kind, video_id=video_id, values=rng.random(kind.dim))


class TestRoundTrip:
    def test_bit_exact(self, tmp_path):
        fv = make_fv()
        write_entry(tmp_path, fv)
        loaded = read_entry(tmp_path, FeatureKind.CNN, "v0")
        # values are stored as f32; round-trip must be exact at f32 precision
        assert np.array_equal(
            loaded.values, fv.values.astype(np.float32).astype(np.float64)
        )
        assert loaded.kind == fv.kind
        assert loaded.video_id == fv.video_id

    def test_second_write_is_byte_identical(self, tmp_path):
        fv = make_fv()
        p1 = write_entry(tmp_path, fv)
        blob = p1.read_bytes()
        p2 = write_entry(tmp_path, fv)
        assert p1 == p2
        assert p2.read_bytes() == blob

    def test_slash_in_video_id_is_sanitized(self, tmp_path):
        fv = make_fv(video_id="KoNViD/v1")
        path = write_entry(tmp_path, fv)
        assert "/" not in path.name
        loaded = read_entry(tmp_path, FeatureKind.CNN, "KoNViD/v1")
        assert loaded.video_id == "KoNViD/v1"


class TestValidation:
    def test_missing_entry(self, tmp_path):
        assert not has_valid_entry(tmp_path, FeatureKind.CNN, "nope")
        with pytest.raises(CacheError):
            read_entry(tmp_path, FeatureKind.CNN, "nope")

    def test_kind_mismatch_rejected(self, tmp_path):
        write_entry(tmp_path, make_fv())
        # same id under a different kind directory is absent
        assert not has_valid_entry(tmp_path, FeatureKind.NSS, "v0")

    def test_corrupt_magic_rejected(self, tmp_path):
        fv = make_fv()
        path = write_entry(tmp_path, fv)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        assert not has_valid_entry(tmp_path, FeatureKind.CNN, "v0")
        with pytest.raises(CacheError, match="magic"):
            read_entry(tmp_path, FeatureKind.CNN, "v0")

    def test_version_bump_invalidates(self, tmp_path):
        fv = make_fv()
        path = write_entry(tmp_path, fv)
        data = bytearray(path.read_bytes())
        data[4:8] = (999).to_bytes(4, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(CacheError, match="version"):
            read_entry(tmp_path, FeatureKind.CNN, "v0")

    def test_truncated_file_rejected(self, tmp_path):
        fv = make_fv()
        path = write_entry(tmp_path, fv)
        path.write_bytes(path.read_bytes()[:20])
        assert not has_valid_entry(tmp_path, FeatureKind.CNN, "v0")


class TestLoadAll:
    def test_complete_set(self, tmp_path):
        for i in range(3):
            write_entry(tmp_path, make_fv(video_id=f"v{i}", seed=i))
        out = load_all(tmp_path, FeatureKind.CNN, [f"v{i}" for i in range(3)])
        assert set(out) == {"v0", "v1", "v2"}
        assert out["v1"].shape == (2048,)

    def test_missing_ids_listed(self, tmp_path):
        write_entry(tmp_path, make_fv(video_id="v0"))
        with pytest.raises(CacheError, match="v1"):
            load_all(tmp_path, FeatureKind.CNN, ["v0", "v1"])
