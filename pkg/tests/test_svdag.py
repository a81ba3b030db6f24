import numpy as np
import pytest
from _oracles import dda, dfs_enumeration, svo_counts
from conftest import random_chunk

from voxdag.errors import BoundsError
from voxdag.scene import DenseChunk
from voxdag.svdag import (build_chunk, chunk_stats, decode_occupancy, dfs_order, iter_nodes, leaf_rank, query,
                          ray_intersect)


def full(res, color=(255, 0, 0)):
    return DenseChunk(np.ones((res, res, res), bool), np.array(color, np.uint8))


def single(res, v):
    occ = np.zeros((res, res, res), bool)
    occ[v] = True
    return DenseChunk(occ, np.array((1, 2, 3), np.uint8))


def test_full_chunk_canonical_counts():
    c = build_chunk(full(64))
    assert c.node_count == 4 and c.bitmap_count == 1
    assert int(c.bitmaps[0]) == (1 << 64) - 1
    assert c.leaf_count == 64 ** 3
    assert c.aabb_min == (0, 0, 0) and c.aabb_max == (63, 63, 63)
    assert chunk_stats(c)["node_count"] == 4


def test_single_voxel_chain():
    c = build_chunk(single(16, (5, 9, 14)))
    st = chunk_stats(c)
    assert st == {"node_count": 2, "bitmap_count": 1, "geometry_bytes": 32, "leaf_count": 1}
    assert bin(int(c.bitmaps[0])).count("1") == 1
    assert query(c, (5, 9, 14)) and not query(c, (5, 9, 13))
    assert c.aabb_min == c.aabb_max == (5, 9, 14)


def test_header_and_node_sizes():
    c = build_chunk(random_chunk(np.random.default_rng(0), 32))
    total = 0
    for off, mask, leaves, refs in iter_nodes(c):
        assert mask != 0 and (int(c.nodes[off]) >> 8) == 0
        assert 8 <= 8 + 4 * len(refs) <= 40
        total += 8 + 4 * len(refs)
    assert total + 8 * c.bitmap_count == c.geometry_bytes


def test_bitmap_bit_layout():
    # voxel (1, 0, 0) sits in outer octant 0, inner octant 1 -> bit 1;
    # voxel (2, 0, 0) sits in outer octant 1, inner octant 0 -> bit 8
    for v, bit in (((1, 0, 0), 1), ((2, 0, 0), 8), ((0, 0, 3), 4 * 8 + 4), ((3, 3, 3), 63)):
        c = build_chunk(single(8, v))
        assert int(c.bitmaps[0]) == 1 << bit


def test_canonical_form():
    rng = np.random.default_rng(5)
    a = random_chunk(rng, 32)
    b = DenseChunk(a.occupancy.copy(), np.zeros(3, np.uint8))
    ca, cb = build_chunk(a), build_chunk(b)
    assert ca.to_bytes() == cb.to_bytes() and ca == cb


@pytest.mark.parametrize("res", [8, 16, 32])
def test_exhaustive_query_and_decode(res):
    rng = np.random.default_rng(res)
    for _ in range(3):
        d = random_chunk(rng, res, p=rng.uniform(0.02, 0.6))
        c = build_chunk(d)
        assert np.array_equal(decode_occupancy(c), d.occupancy)
        hits = np.array([query(c, v) for v in np.ndindex(res, res, res)]).reshape(res, res, res)
        assert np.array_equal(hits, d.occupancy)


def test_dag_vs_svo_oracle():
    rng = np.random.default_rng(11)
    for i in range(100):
        p = [0.01, 0.1, 0.5, 0.9][i % 4]
        d = random_chunk(rng, 16, p=p, blobs=bool(i % 2))
        c = build_chunk(d)
        svo, _, dag, bms = svo_counts(d.occupancy)
        assert c.node_count == dag and c.bitmap_count == bms
        assert c.node_count <= svo


def test_leaf_counts_match_subtrees():
    d = random_chunk(np.random.default_rng(2), 32)
    c = build_chunk(d)

    def count(off, size):
        mask = int(c.nodes[off]) & 0xFF
        refs = c.nodes[off + 2: off + 2 + bin(mask).count("1")]
        if size == 8:
            total = sum(bin(int(c.bitmaps[r])).count("1") for r in refs)
        else:
            total = sum(count(int(r), size // 2) for r in refs)
        assert total == int(c.nodes[off + 1])
        return total

    assert count(0, 32) == d.occupied_count


def test_leaf_rank_is_dfs_bijection():
    d = random_chunk(np.random.default_rng(9), 16)
    c = build_chunk(d)
    order = dfs_enumeration(d.occupancy)
    assert [tuple(p) for p in dfs_order(d.occupancy)] == order
    ranks = [leaf_rank(c, v) for v in order]
    assert ranks == list(range(len(order)))
    assert leaf_rank(c, order[0]) == 0 and leaf_rank(c, order[-1]) == c.leaf_count - 1
    empty = tuple(np.argwhere(~d.occupancy)[0])
    with pytest.raises(BoundsError):
        leaf_rank(c, empty)
    with pytest.raises(BoundsError):
        query(c, (16, 0, 0))


@pytest.mark.parametrize("res", [16, 64])
def test_ray_face_example(res):
    c = build_chunk(full(res))
    h = ray_intersect(c, (-1.0 * res, 0.5 * res, 0.5 * res), (1.0, 0.0, 0.0))
    assert h.t == pytest.approx(res)
    assert h.voxel == (0, res // 2, res // 2)
    assert h.normal == 1  # -X face


def test_ray_misses_and_errors():
    c = build_chunk(single(16, (8, 8, 8)))
    assert ray_intersect(c, (-5, 0.5, 0.5), (1, 0, 0)) is None
    assert ray_intersect(c, (-5, 8.5, 8.5), (1, 0, 0), (0.0, 10.0)) is None
    assert ray_intersect(c, (-5, 8.5, 8.5), (1, 0, 0)).t == pytest.approx(13.0)
    with pytest.raises(ValueError):
        ray_intersect(c, (0, 0, 0), (0, 0, 0))


def test_ray_origin_inside_occupied_voxel():
    c = build_chunk(full(16))
    h = ray_intersect(c, (3.3, 4.4, 5.5), (0.2, -0.9, 0.1), (0.25, 100.0))
    assert h.t == 0.25 and h.voxel == (3, 4, 5)
    assert h.normal == 2  # dominant axis -Y travel -> +Y normal


def test_rays_against_dense_dda():
    rng = np.random.default_rng(77)
    res = 32
    d = random_chunk(rng, res, p=0.04)
    c = build_chunk(d)
    n = 10_000
    agree = ties = 0
    for _ in range(n):
        o = rng.uniform(-0.5 * res, 1.5 * res, 3)
        target = rng.uniform(0, res, 3)
        direction = target - o
        ref = dda(d.occupancy, o, direction)
        got = ray_intersect(c, o, direction)
        if ref is not None and ref[2]:
            ties += 1
            continue
        if ref is None:
            assert got is None
        else:
            assert got is not None and got.voxel == ref[1]
            assert abs(got.t - ref[0]) * np.linalg.norm(direction) < 1e-4
        agree += 1
    assert ties < 0.001 * n
    assert agree == n - ties
