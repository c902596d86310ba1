import hashlib
import json
import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trfl.dmm import (DMMConfig, DigitGlyph, bounce, encode_idx, generate, generate_video,
                      load_mnist_glyphs, parse_idx, read_container, render_trajectory,
                      synthetic_glyphs, trajectory, write_container)
from trfl.exceptions import ConfigurationError, GenerationError, LoadError, ParseError


def _reference_idx(data):
    """Independent decoder: header with ``struct`` then a Python byte loop."""
    zero, dtype_code, rank = struct.unpack(">HBB", data[:4])
    assert zero == 0 and dtype_code == 0x08
    dims = struct.unpack(">" + "I" * rank, data[4:4 + 4 * rank])
    flat = list(data[4 + 4 * rank:])
    return dims, flat


def _bounce_oracle(pos, vel, limit, steps):
    """1-D point stepped one pixel at a time, turning around at the walls."""
    out = [pos]
    direction = (vel > 0) - (vel < 0)
    for _ in range(steps):
        for _ in range(abs(vel)):
            if not 0 <= pos + direction <= limit:
                direction = -direction
            pos += direction
        out.append(pos)
    return out


def _digest(splits):
    h = hashlib.sha256()
    for name in sorted(splits):
        for s in splits[name].samples:
            h.update(s.frames.tobytes())
            h.update(json.dumps(s.metadata(), sort_keys=True).encode())
    return h.hexdigest()


class TestIdx:
    def test_minimal_image_file(self):
        pixels = np.arange(784, dtype=np.uint8).reshape(1, 28, 28)
        data = struct.pack(">IIII", 0x803, 1, 28, 28) + pixels.tobytes()
        out = parse_idx(data)
        assert out.shape == (1, 28, 28) and np.array_equal(out, pixels)

    def test_labels(self):
        out = parse_idx(struct.pack(">II", 0x801, 3) + bytes([7, 0, 9]))
        assert out.tolist() == [7, 0, 9]

    def test_bad_magic(self):
        with pytest.raises(ParseError, match="bad magic") as info:
            parse_idx(struct.pack(">IIII", 0x802, 1, 28, 28) + bytes(784))
        assert info.value.offset == 0

    def test_truncated_payload_reports_offset(self):
        data = struct.pack(">IIII", 0x803, 2, 28, 28) + bytes(1000)
        with pytest.raises(ParseError, match="truncated") as info:
            parse_idx(data)
        assert info.value.offset == len(data)

    def test_truncated_header(self):
        with pytest.raises(ParseError, match="truncated header"):
            parse_idx(struct.pack(">II", 0x803, 1))

    def test_dimension_overflow(self):
        with pytest.raises(ParseError, match="overflow") as info:
            parse_idx(struct.pack(">IIII", 0x803, 0xFFFFFFFF, 0xFFFF, 28))
        assert info.value.offset == 8

    def test_against_independent_decoder(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(50, 28, 28), dtype=np.uint8)
        data = encode_idx(images)
        dims, flat = _reference_idx(data)
        out = parse_idx(data)
        assert out.shape == dims
        assert out.ravel().tolist() == flat
        path = tmp_path / "imgs.idx"
        path.write_bytes(data)
        glyphs = load_mnist_glyphs(path, "train")
        assert len(glyphs) == 50 and glyphs[3].glyph_id == "train:3"

    @pytest.mark.skipif(not os.environ.get("TRFL_MNIST_DIR"), reason="set TRFL_MNIST_DIR to check real MNIST")
    def test_real_mnist_train_file(self):
        root = os.environ["TRFL_MNIST_DIR"]
        name = next(n for n in os.listdir(root) if n.startswith("train-images"))
        with open(os.path.join(root, name), "rb") as fh:
            raw = fh.read()
        if name.endswith(".gz"):
            import gzip
            raw = gzip.decompress(raw)
        out = parse_idx(raw)
        dims, flat = _reference_idx(raw)
        assert out.shape == (60000, 28, 28) == dims
        assert hashlib.sha256(out[0].tobytes()).hexdigest() == \
            hashlib.sha256(bytes(flat[:784])).hexdigest()


class TestGlyphs:
    def test_shape_invariant(self):
        with pytest.raises(ConfigurationError):
            DigitGlyph(np.zeros((27, 28), np.uint8), 0, "train")

    def test_synthetic_pools_are_deterministic_and_disjoint(self):
        a, b = synthetic_glyphs(9, "train", 4), synthetic_glyphs(9, "train", 4)
        assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))
        test = synthetic_glyphs(9, "test", 4)
        assert not any(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, test))
        assert all(g.pixels.max() > 0 for g in a)


class TestRender:
    def test_speed_zero_static(self):
        glyph = np.full((4, 4), 200, np.uint8)
        frames = render_trajectory(glyph, (3, 5), ("vertical", "diagonal"), 0,
                                   {"vertical": (1, 0), "diagonal": (1, 1)}, 5, (16, 16))
        assert all(np.array_equal(f, frames[0]) for f in frames)

    def test_horizontal_from_left_edge(self):
        pos = trajectory((0, 0), ("horizontal",), 1, {"horizontal": (0, 1)}, 4, (10, 10))
        assert pos[:, 1].tolist() == [0, 1, 2, 3]
        assert pos[:, 0].tolist() == [0, 0, 0, 0]

    def test_reflection_against_bouncing_point(self):
        limit = 64 - 28
        pos = trajectory((5, limit - 2), ("horizontal",), 2, {"horizontal": (0, 1)}, 8, (limit, limit))
        assert pos[:, 1].tolist() == _bounce_oracle(limit - 2, 2, limit, 7)
        assert pos[:, 1].tolist()[:4] == [limit - 2, limit, limit - 2, limit - 4]

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 20), st.integers(-3, 3), st.integers(1, 20), st.integers(1, 30))
    def test_bounce_matches_oracle(self, pos, vel, limit, steps):
        pos = min(pos, limit)
        p, v, seq = pos, vel, [pos]
        for _ in range(steps):
            p, v = bounce(p, v, limit)
            seq.append(p)
        assert seq == _bounce_oracle(pos, vel, limit, steps)

    def test_bounce_without_room_stays_put(self):
        assert bounce(0, 2, 0) == (0, 2)

    def test_diagonal_moves_both_axes_equally(self):
        pos = trajectory((10, 10), ("diagonal",), 2, {"diagonal": (-1, 1)}, 4, (40, 40))
        steps = np.diff(pos, axis=0)
        assert np.array_equal(steps, np.tile([-2, 2], (3, 1)))

    def test_glyph_never_clipped(self):
        rng = np.random.default_rng(1)
        glyph = np.full((28, 28), 255, np.uint8)
        for _ in range(50):
            start = tuple(int(v) for v in rng.integers(0, 37, size=2))
            signs = {k: tuple(int(s) for s in rng.choice([-1, 1], 2)) for k in ("vertical", "diagonal")}
            frames = render_trajectory(glyph, start, ("vertical", "diagonal"), 2, signs, 20, (64, 64))
            assert (frames.reshape(len(frames), -1) == 255).sum(axis=1).tolist() == [784] * 40

    def test_glyph_larger_than_canvas(self):
        with pytest.raises(GenerationError) as info:
            render_trajectory(np.ones((28, 28), np.uint8), (0, 0), ("vertical",), 1,
                              {"vertical": (1, 0)}, 2, (20, 40))
        assert info.value.field == "canvas"


class TestGenerate:
    def test_full_scale_counts(self):
        cfg = DMMConfig(d=2)
        train = generate(cfg, splits=("train",))["train"]
        assert len(train) == 3000
        assert np.bincount(train.labels).tolist() == [1000, 1000, 1000]

    def test_splits_geometry_and_class_law(self):
        cfg = DMMConfig(videos_per_class=40, d=6, canvas=(40, 40))
        splits = generate(cfg)
        for name, split in splits.items():
            for s in split.samples:
                assert s.frames.shape == (12, 40, 40) and s.frames.dtype == np.uint8
                assert [(a, b) for _, a, b in s.segments] == [(0, 6), (6, 12)]
                names = tuple(n for n, _, _ in s.segments)
                canonical = cfg.classes[s.label]
                assert frozenset(names) == frozenset(canonical)
                if name != "test_perm":
                    assert names == canonical and not s.permuted
                else:
                    assert names == (canonical[::-1] if s.permuted else canonical)
        assert any(s.permuted for s in splits["test_perm"].samples)

    def test_containment(self):
        cfg = DMMConfig(videos_per_class=20, d=10, canvas=(32, 32))
        glyphs = [DigitGlyph(np.full((28, 28), 255, np.uint8), i, sp)
                  for sp in ("train", "test") for i in range(2)]
        splits = generate(cfg, glyphs[:2], glyphs[2:])
        for split in splits.values():
            for s in split.samples:
                assert ((s.frames == 255).sum(axis=(1, 2)) == 784).all()

    def test_glyph_sources_respect_split(self):
        splits = generate(DMMConfig(videos_per_class=10, d=2))
        assert all(s.provenance["glyph_id"].startswith("train:") for s in splits["train"].samples)
        assert all(s.provenance["glyph_id"].startswith("test:") for s in splits["test_perm"].samples)

    def test_deterministic_bytes(self):
        cfg = DMMConfig(videos_per_class=15, d=4, canvas=(32, 32), glyph_size=14, seed=9)
        assert _digest(generate(cfg)) == _digest(generate(cfg))
        other = DMMConfig(videos_per_class=15, d=4, canvas=(32, 32), glyph_size=14, seed=10)
        assert _digest(generate(cfg)) != _digest(generate(other))

    def test_video_reproducible_in_isolation(self):
        cfg = DMMConfig(videos_per_class=10, d=4, canvas=(32, 32), glyph_size=14)
        pool = synthetic_glyphs(300, "test", cfg.seed)
        full = generate(cfg)["test_perm"]
        for idx in (29, 0, 17):
            alone = generate_video(cfg, "test_perm", idx, pool)
            assert np.array_equal(alone.frames, full.samples[idx].frames)
            assert alone.metadata() == full.samples[idx].metadata()

    def test_zero_probability_makes_test_splits_identical(self):
        cfg = DMMConfig(videos_per_class=20, d=4, permutation_probability={"test_perm": 0.0})
        splits = generate(cfg)
        for a, b in zip(splits["test_noperm"].samples, splits["test_perm"].samples):
            assert np.array_equal(a.frames, b.frames) and a.metadata() == b.metadata()

    def test_permuted_fraction(self):
        cfg = DMMConfig(videos_per_class=1000, d=1, canvas=(28, 28))
        perm = generate(cfg, splits=("test_perm",))["test_perm"]
        frac = np.mean([s.permuted for s in perm.samples])
        assert abs(frac - 0.5) <= 0.03

    def test_arrays_normalized(self):
        split = generate(DMMConfig(videos_per_class=2, d=3, canvas=(30, 30)), splits=("train",))["train"]
        x, y = split.arrays()
        assert x.shape == (6, 1, 6, 30, 30) and x.dtype == np.float32
        assert 0.0 <= x.min() and x.max() <= 1.0 and x.max() > 0.5
        assert y.tolist() == [0, 0, 1, 1, 2, 2]

    def test_small_glyphs(self):
        cfg = DMMConfig(videos_per_class=2, d=3, canvas=(20, 20), glyph_size=14)
        s = generate(cfg, splits=("train",))["train"].samples[0]
        assert s.frames.shape == (6, 20, 20)

    @pytest.mark.parametrize("kwargs,err", [
        (dict(canvas=(20, 64)), GenerationError),
        (dict(d=0), ConfigurationError),
        (dict(speeds=()), ConfigurationError),
        (dict(classes=(("vertical", "horizontal"),) * 3), ConfigurationError),
        (dict(glyph_size=10), ConfigurationError),
        (dict(permutation_probability={"test_noperm": 0.5}), ConfigurationError),
    ])
    def test_config_validation(self, kwargs, err):
        with pytest.raises(err):
            DMMConfig(**kwargs)

    def test_infeasible_canvas_names_field(self):
        with pytest.raises(GenerationError) as info:
            DMMConfig(canvas=(20, 64))
        assert info.value.field == "canvas"

    def test_config_dict_round_trip(self):
        cfg = DMMConfig(d=5, speeds=(1, 3), seed=4)
        assert DMMConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


class TestContainer:
    @pytest.fixture
    def split(self):
        cfg = DMMConfig(videos_per_class=34, d=3, canvas=(30, 30))
        return generate(cfg, splits=("test_perm",))["test_perm"]

    def _files(self, path):
        return {n: (path / n).read_bytes() for n in ("manifest.json", "videos.bin")}

    def test_write_read_write_identical(self, split, tmp_path):
        write_container(split, tmp_path / "a")
        write_container(read_container(tmp_path / "a"), tmp_path / "b")
        assert self._files(tmp_path / "a") == self._files(tmp_path / "b")

    def test_round_trip_keeps_metadata(self, split, tmp_path):
        write_container(split, tmp_path)
        back = read_container(tmp_path)
        assert len(back) == len(split) >= 100
        for a, b in zip(split.samples, back.samples):
            assert np.array_equal(a.frames, b.frames)
            assert json.loads(json.dumps(a.metadata())) == b.metadata()
        assert back.config == split.config and back.name == "test_perm"

    def test_record_layout(self, split, tmp_path):
        write_container(split, tmp_path)
        blob = (tmp_path / "videos.bin").read_bytes()
        assert blob[:4] == b"DMMV"
        assert struct.unpack("<4I", blob[4:20]) == (1, 6, 30, 30)

    def _edit_manifest(self, path, fn):
        m = json.loads((path / "manifest.json").read_text())
        fn(m)
        (path / "manifest.json").write_text(json.dumps(m))

    def test_count_mismatch(self, split, tmp_path):
        write_container(split, tmp_path)
        self._edit_manifest(tmp_path, lambda m: m["videos"].pop())
        with pytest.raises(LoadError):
            read_container(tmp_path)
        self._edit_manifest(tmp_path, lambda m: m.update(n_videos=len(m["videos"])))
        with pytest.raises(LoadError, match="more videos"):
            read_container(tmp_path)

    def test_version_mismatch(self, split, tmp_path):
        write_container(split, tmp_path)
        self._edit_manifest(tmp_path, lambda m: m.update(version=2))
        with pytest.raises(LoadError, match="version"):
            read_container(tmp_path)

    def test_blob_version_mismatch(self, split, tmp_path):
        write_container(split, tmp_path)
        blob = bytearray((tmp_path / "videos.bin").read_bytes())
        blob[4:8] = struct.pack("<I", 7)
        (tmp_path / "videos.bin").write_bytes(bytes(blob))
        with pytest.raises(LoadError, match="version"):
            read_container(tmp_path)

    def test_truncated_blob(self, split, tmp_path):
        write_container(split, tmp_path)
        blob = (tmp_path / "videos.bin").read_bytes()
        (tmp_path / "videos.bin").write_bytes(blob[:-10])
        with pytest.raises(LoadError, match="truncated"):
            read_container(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(LoadError):
            read_container(tmp_path / "nope")
