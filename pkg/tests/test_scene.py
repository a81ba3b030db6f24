import numpy as np
import pytest

from voxdag.errors import BoundsError, ConfigError
from voxdag.scene import (ChunkKey, DenseChunk, DenseWorld, SceneSpec, WorldConfig, chunkify, dense_query,
                          generate, menger_mask)


def test_world_config_validation():
    with pytest.raises(ConfigError):
        WorldConfig(chunk_res=12, voxel_size=1.0, world_dims=(1, 1, 1))
    with pytest.raises(ConfigError):
        WorldConfig(chunk_res=16, voxel_size=1.0, world_dims=(3, 1, 1))
    cfg = WorldConfig(chunk_res=32, voxel_size=0.5, world_dims=(4, 2, 8))
    assert cfg.chunk_world_size == 16.0
    assert cfg.lod_count == 4
    assert cfg.dims_at(2) == (1, 1, 2)
    assert cfg.dims_at(3) == (1, 1, 1)


def test_chunk_key_tree():
    k = ChunkKey(1, 1, 0, 1)
    kids = k.children()
    assert len(kids) == 8 and all(c.parent() == k for c in kids)
    assert kids[0] == ChunkKey(0, 2, 0, 2) and kids[7] == ChunkKey(0, 3, 1, 3)
    assert kids[1] == ChunkKey(0, 3, 0, 2)  # octant 1 = +x
    assert ChunkKey(3, 0, 0, 0).is_ancestor_of(kids[5])
    assert not kids[5].is_ancestor_of(kids[5])


def test_solid_box_counts():
    cfg = WorldConfig(chunk_res=16, voxel_size=1.0, world_dims=(2, 1, 1))
    w = generate(SceneSpec.parse("solid_box?lo=2,3,4&hi=9,10,11"), cfg)
    assert w.occupied_count() == 512
    assert len(chunkify(w)) == 1
    assert dense_query(w, (5, 5, 5))[0]
    assert dense_query(w, (1, 5, 5)) == (False, None)


def test_menger_closed_form():
    cfg = WorldConfig(chunk_res=16, voxel_size=1.0, world_dims=(2, 2, 2))
    w = generate(SceneSpec.parse("menger?level=2"), cfg)
    assert w.occupied_count() == 400
    g = np.arange(27)
    assert menger_mask(3, g[:, None, None], g[None, :, None], g[None, None, :]).sum() == 20 ** 3


def test_box_spanning_two_chunks():
    cfg = WorldConfig(chunk_res=8, voxel_size=1.0, world_dims=(2, 1, 1))
    w = generate(SceneSpec.parse("solid_box?lo=4,0,0&hi=11,3,3"), cfg)
    entries = chunkify(w)
    assert [k for k, _ in entries] == [ChunkKey(0, 0, 0, 0), ChunkKey(0, 1, 0, 0)]
    assert sum(c.occupied_count for _, c in entries) == 8 * 4 * 4
    occ, _ = w.to_arrays()
    assert occ.sum() == 128 and occ[4:12, :4, :4].all()


def test_empty_world_and_single_chunk():
    cfg = WorldConfig(chunk_res=8, voxel_size=1.0, world_dims=(2, 2, 2))
    assert chunkify(DenseWorld(cfg, {})) == []
    occ = np.zeros((8, 8, 8), bool)
    occ[1, 2, 3] = True
    w = DenseWorld(cfg, {ChunkKey(0, 0, 0, 0): DenseChunk(occ, np.full((8, 8, 8, 3), 7, np.uint8)),
                         ChunkKey(0, 1, 0, 0): DenseChunk(np.zeros((8, 8, 8), bool), np.zeros(3, np.uint8))})
    assert len(chunkify(w)) == 1


def test_bounds_errors():
    cfg = WorldConfig(chunk_res=8, voxel_size=1.0, world_dims=(1, 1, 1))
    with pytest.raises(BoundsError):
        generate(SceneSpec.parse("solid_box?lo=0,0,0&hi=8,2,2"), cfg)
    with pytest.raises(BoundsError):
        generate(SceneSpec.parse("menger?level=2"), cfg)
    w = generate(SceneSpec.parse("solid_box?lo=0,0,0&hi=3,3,3"), cfg)
    with pytest.raises(BoundsError):
        dense_query(w, (8, 0, 0))
    with pytest.raises(ConfigError):
        generate(SceneSpec.parse("volcano"), cfg)


@pytest.mark.parametrize("spec", ["terrain", "boxes_city?count=10", "menger?level=2&scale=2", "solid_box"])
def test_generators_deterministic_and_lossless(spec, small_config):
    a = generate(SceneSpec.parse(spec, seed=7), small_config)
    b = generate(SceneSpec.parse(spec, seed=7), small_config)
    assert a == b
    occ, col = a.to_arrays()
    assert occ.sum() == a.occupied_count() == sum(c.occupied_count for _, c in chunkify(a))
    assert DenseWorld.from_arrays(small_config, occ, col) == a
    assert not col[~occ].any()


def test_terrain_structure(small_config):
    w = generate(SceneSpec.parse("terrain", seed=7), small_config)
    other = generate(SceneSpec.parse("terrain", seed=8), small_config)
    assert w != other
    occ, _ = w.to_arrays()
    wy = small_config.world_voxels[1]
    heights = occ.sum(axis=1)
    assert heights.min() >= np.floor(0.1 * wy) and heights.max() <= np.ceil(0.5 * wy)
    # columns are solid from the ground up
    first_empty = np.argmin(occ, axis=1)
    assert np.array_equal(first_empty, heights)


def test_dense_query_matches_chunks(terrain16, rng):
    occ, col = terrain16.to_arrays()
    pts = rng.integers(0, 64, size=(10_000, 3))
    for p in pts[:2000]:
        ok, c = dense_query(terrain16, p)
        assert ok == occ[tuple(p)]
        if ok:
            assert c == tuple(col[tuple(p)])


def test_scene_spec_parse():
    s = SceneSpec.parse("solid_box?lo=1,2,3&color=9,9,9&seed=5")
    assert s.kind == "solid_box" and s.seed == 5 and s.params["lo"] == (1, 2, 3)
    assert SceneSpec.parse("terrain?amplitude=4.5", seed=3).params["amplitude"] == 4.5
