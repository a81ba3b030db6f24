import struct

import numpy as np
import pytest
from conftest import make_world

from voxdag.errors import BadMagicError, BadVersionError, BundleError, OffsetError, TruncatedError
from voxdag.harness.bundle import ENTRY, HEADER, bundle_bytes, load_bundle, read_directory, save_bundle
from voxdag.harness.dense_io import load_dense, rle_decode, rle_encode, save_dense
from voxdag.scene import WorldConfig


def assert_same_pyramid(a, b):
    assert a.config == b.config and a.lod_count == b.lod_count
    assert a.infos == b.infos
    for k in a.infos:
        ra, rb = a.record(k), b.record(k)
        assert ra == rb
        assert ra.svdag.to_bytes() == rb.svdag.to_bytes() and ra.blocks.to_bytes() == rb.blocks.to_bytes()


def test_single_chunk_roundtrip(tmp_path):
    cfg = WorldConfig(chunk_res=16, voxel_size=0.25, world_dims=(1, 1, 1))
    _, pyr = make_world("solid_box?lo=2,3,4&hi=9,10,11", cfg)
    path = tmp_path / "one.aokn"
    size = save_bundle(pyr, path)
    assert size == path.stat().st_size == HEADER.size + ENTRY.size + pyr.total_bytes()
    loaded = load_bundle(path)
    assert_same_pyramid(pyr, loaded)
    assert bundle_bytes(loaded) == path.read_bytes()


def test_large_world_roundtrip(tmp_path, terrain16_pyramid, city16_pyramid):
    for pyr in (terrain16_pyramid, city16_pyramid):
        path = tmp_path / "w.aokn"
        save_bundle(pyr, path)
        loaded = load_bundle(path)
        assert_same_pyramid(pyr, loaded)
        assert bundle_bytes(loaded) == path.read_bytes()
    assert len(terrain16_pyramid) >= 32


def test_header_layout(tmp_path, terrain16_pyramid):
    path = tmp_path / "w.aokn"
    save_bundle(terrain16_pyramid, path)
    raw = path.read_bytes()
    magic, version, res, vs, wx, wy, wz, lods, count = HEADER.unpack_from(raw)
    assert (magic, version, res, vs, (wx, wy, wz)) == (b"AOKN", 1, 16, 1.0, (4, 4, 4))
    assert lods == 3 and count == len(terrain16_pyramid)
    first = ENTRY.unpack_from(raw, HEADER.size)
    assert first[-2] == HEADER.size + ENTRY.size * count


def test_lazy_loading(tmp_path, terrain16_pyramid):
    path = tmp_path / "w.aokn"
    save_bundle(terrain16_pyramid, path)
    loaded = load_bundle(path)
    assert loaded.records.reads == 0
    key = sorted(loaded.lod0_keys)[0]
    loaded.record(key)
    assert loaded.records.reads == 1


def corrupt(tmp_path, pyr, fn):
    path = tmp_path / "bad.aokn"
    raw = bytearray(bundle_bytes(pyr))
    raw = fn(raw)
    path.write_bytes(bytes(raw))
    return path


@pytest.fixture(scope="module")
def small_pyr():
    cfg = WorldConfig(chunk_res=8, voxel_size=1.0, world_dims=(2, 1, 1))
    return make_world("solid_box?lo=1,1,1&hi=12,5,5", cfg)[1]


def test_bad_magic(tmp_path, small_pyr):
    def fn(r):
        r[0:4] = b"NOPE"
        return r
    with pytest.raises(BadMagicError) as exc:
        load_bundle(corrupt(tmp_path, small_pyr, fn))
    assert exc.value.code == 1


def test_bad_version(tmp_path, small_pyr):
    def fn(r):
        r[4:8] = struct.pack("<I", 2)
        return r
    with pytest.raises(BadVersionError) as exc:
        load_bundle(corrupt(tmp_path, small_pyr, fn))
    assert exc.value.code == 2


def test_truncated(tmp_path, small_pyr):
    with pytest.raises(TruncatedError) as exc:
        load_bundle(corrupt(tmp_path, small_pyr, lambda r: r[:-5]))
    assert exc.value.code == 3
    with pytest.raises(TruncatedError):
        load_bundle(corrupt(tmp_path, small_pyr, lambda r: r[:HEADER.size + 3]))
    with pytest.raises(TruncatedError):
        load_bundle(corrupt(tmp_path, small_pyr, lambda r: r[:10]))


def test_bad_offset(tmp_path, small_pyr):
    def fn(r):
        at = HEADER.size + ENTRY.size - 16
        r[at:at + 8] = struct.pack("<Q", 3)  # points into the header
        return r
    with pytest.raises(OffsetError) as exc:
        read_directory(corrupt(tmp_path, small_pyr, fn))
    assert exc.value.code == 4

    def overlap(r):
        at = HEADER.size + 2 * ENTRY.size - 16
        first = struct.unpack_from("<Q", r, HEADER.size + ENTRY.size - 16)[0]
        r[at:at + 8] = struct.pack("<Q", first)
        return r
    with pytest.raises(OffsetError):
        read_directory(corrupt(tmp_path, small_pyr, overlap))


def test_rle_roundtrip(rng):
    for flags in (np.zeros(10, bool), np.ones(10, bool), rng.random(1000) < 0.3, np.array([True, False, True])):
        runs = rle_encode(flags)
        assert np.array_equal(rle_decode(runs, len(flags)), flags)
    assert rle_encode(np.array([True, True, False])).tolist() == [0, 2, 1]
    with pytest.raises(BundleError):
        rle_decode(np.array([3, 4]), 8)


def test_dense_roundtrip_and_errors(tmp_path, terrain16):
    path = tmp_path / "w.aokd"
    save_dense(terrain16, path)
    back = load_dense(path)
    assert back == terrain16
    raw = path.read_bytes()
    (tmp_path / "m.aokd").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(BadMagicError):
        load_dense(tmp_path / "m.aokd")
    (tmp_path / "v.aokd").write_bytes(raw[:4] + struct.pack("<I", 9) + raw[8:])
    with pytest.raises(BadVersionError):
        load_dense(tmp_path / "v.aokd")
    (tmp_path / "t.aokd").write_bytes(raw[:-1])
    with pytest.raises(TruncatedError):
        load_dense(tmp_path / "t.aokd")
