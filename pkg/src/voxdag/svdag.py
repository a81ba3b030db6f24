"""Sparse voxel DAG chunks: construction, point query, DFS rank, ray casting.

A chunk of edge ``R`` has ``log2(R) - 2`` internal node levels (sizes ``R``
down to 8); the nodes spanning 8 voxels reference 64-bit bitmaps that each
encode one 4x4x4 leaf block.  Octants are numbered ``x | y << 1 | z << 2`` and
children are stored, and visited during DFS, in ascending octant order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .errors import BoundsError, ConfigError
from .scene import DenseChunk

NORMALS = {0: (1, 0, 0), 1: (-1, 0, 0), 2: (0, 1, 0), 3: (0, -1, 0), 4: (0, 0, 1), 5: (0, 0, -1)}
NORMAL_NAMES = {0: "+X", 1: "-X", 2: "+Y", 3: "-Y", 4: "+Z", 5: "-Z"}


def _bit_table() -> np.ndarray:
    """``table[x, y, z]`` = bitmap bit of local voxel ``(x, y, z)``."""
    t = np.empty((4, 4, 4), dtype=np.int64)
    for x in range(4):
        for y in range(4):
            for z in range(4):
                outer = (x >> 1) | ((y >> 1) << 1) | ((z >> 1) << 2)
                inner = (x & 1) | ((y & 1) << 1) | ((z & 1) << 2)
                t[x, y, z] = outer * 8 + inner
    return t


BIT_OF = _bit_table()
# inverse: local coordinates of each bitmap bit
VOXEL_OF_BIT = np.array([np.argwhere(BIT_OF == b)[0] for b in range(64)], dtype=np.int64)


class VoxelHit(NamedTuple):
    t: float
    voxel: tuple[int, int, int]
    normal: int

    @property
    def normal_vector(self) -> tuple[int, int, int]:
        return NORMALS[self.normal]


@dataclass(frozen=True, eq=False)
class SvdagChunk:
    """Compressed geometry of one chunk.

    ``nodes`` is the word array described in :mod:`voxdag._kernels`; the root
    always sits at word offset 0 and the remaining nodes follow in DFS
    preorder of first visit, which makes the layout canonical.
    """

    chunk_res: int
    nodes: np.ndarray
    bitmaps: np.ndarray
    node_count: int
    aabb_min: tuple[int, int, int]
    aabb_max: tuple[int, int, int]
    root: int = 0

    @property
    def levels(self) -> int:
        return int(np.log2(self.chunk_res)) - 2

    @property
    def leaf_count(self) -> int:
        return int(self.nodes[self.root + 1])

    @property
    def bitmap_count(self) -> int:
        return len(self.bitmaps)

    @property
    def geometry_bytes(self) -> int:
        return 4 * len(self.nodes) + 8 * len(self.bitmaps)

    def to_bytes(self) -> bytes:
        return self.nodes.astype("<u4").tobytes() + self.bitmaps.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, chunk_res: int, node_words: int, bitmap_count: int,
                   node_count: int, aabb_min, aabb_max) -> "SvdagChunk":
        if len(data) != 4 * node_words + 8 * bitmap_count:
            raise ValueError("svdag blob length does not match counts")
        nodes = np.frombuffer(data, dtype="<u4", count=node_words).astype(np.uint32)
        bitmaps = np.frombuffer(data, dtype="<u8", offset=4 * node_words, count=bitmap_count).astype(np.uint64)
        return cls(chunk_res, nodes, bitmaps, node_count, tuple(aabb_min), tuple(aabb_max))

    def __eq__(self, other):
        if not isinstance(other, SvdagChunk):
            return NotImplemented
        return (
            self.chunk_res == other.chunk_res
            and self.node_count == other.node_count
            and self.aabb_min == other.aabb_min
            and self.aabb_max == other.aabb_max
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.bitmaps, other.bitmaps)
        )

    __hash__ = None


def leaf_bitmaps(occupancy: np.ndarray) -> np.ndarray:
    """64-bit occupancy of every 4x4x4 block, shape ``(R/4, R/4, R/4)``."""
    r = occupancy.shape[0]
    out = np.zeros((r // 4,) * 3, dtype=np.uint64)
    for x in range(4):
        for y in range(4):
            for z in range(4):
                bit = np.uint64(BIT_OF[x, y, z])
                out |= occupancy[x::4, y::4, z::4].astype(np.uint64) << bit
    return out


def _octant_rows(ids: np.ndarray) -> np.ndarray:
    """Group a ``(2m)^3`` id grid into ``(m^3, 8)`` rows in octant order."""
    m = ids.shape[0] // 2
    # axes (X, Y, Z, dz, dy, dx) flatten to octant dx + 2 dy + 4 dz
    return ids.reshape(m, 2, m, 2, m, 2).transpose(0, 2, 4, 5, 3, 1).reshape(-1, 8)


def _dedup(values: np.ndarray, axis=None):
    """Exact dedup; returns ``(table, ids)`` with id 0 reserved for empty."""
    if axis is None:
        table, inv = np.unique(values, return_inverse=True)
        empty = table[0] == 0
    else:
        table, inv = np.unique(values, axis=0, return_inverse=True)
        empty = not table[0].any()
    inv = inv.reshape(-1)
    if empty:
        return table[1:], inv
    return table, inv + 1


def build_chunk(dense: DenseChunk) -> SvdagChunk:
    """Hash-cons the octree of ``dense`` bottom-up into a canonical DAG."""
    occ = dense.occupancy
    r = occ.shape[0]
    if not occ.any():
        raise ConfigError("cannot build an SVDAG from an empty chunk")

    bms = leaf_bitmaps(occ)
    bm_table, bm_ids = _dedup(bms.reshape(-1))
    ids = bm_ids.reshape(bms.shape)
    child_counts = np.concatenate([[0], np.bitwise_count(bm_table).astype(np.int64)])

    # tables[k] holds the unique child-id rows of internal level k (k=0 spans 8 voxels)
    tables: list[np.ndarray] = []
    counts: list[np.ndarray] = []
    while ids.shape[0] > 1:
        rows = _octant_rows(ids)
        table, row_ids = _dedup(rows, axis=0)
        tables.append(table)
        level_counts = child_counts[table].sum(axis=1)
        counts.append(level_counts)
        child_counts = np.concatenate([[0], level_counts])
        ids = row_ids.reshape((ids.shape[0] // 2,) * 3)
    root_id = int(ids[0, 0, 0])

    words: list[int] = []
    node_offsets: dict[tuple[int, int], int] = {}
    bitmap_index: dict[int, int] = {}
    bitmap_out: list[int] = []

    def emit(level: int, node_id: int) -> int:
        key = (level, node_id)
        off = node_offsets.get(key)
        if off is not None:
            return off
        row = tables[level][node_id - 1]
        present = [int(c) for c in row if c]
        mask = sum(1 << o for o in range(8) if row[o])
        off = len(words)
        node_offsets[key] = off
        words.extend([mask, int(counts[level][node_id - 1])] + [0] * len(present))
        for j, cid in enumerate(present):
            if level == 0:
                ref = bitmap_index.get(cid)
                if ref is None:
                    ref = bitmap_index[cid] = len(bitmap_out)
                    bitmap_out.append(int(bm_table[cid - 1]))
            else:
                ref = emit(level - 1, cid)
            words[off + 2 + j] = ref
        return off

    emit(len(tables) - 1, root_id)

    nz = [np.flatnonzero(occ.any(axis=axes)) for axes in ((1, 2), (0, 2), (0, 1))]
    return SvdagChunk(
        chunk_res=r,
        nodes=np.array(words, dtype=np.uint32),
        bitmaps=np.array(bitmap_out, dtype=np.uint64),
        node_count=len(node_offsets),
        aabb_min=tuple(int(a[0]) for a in nz),
        aabb_max=tuple(int(a[-1]) for a in nz),
    )


def _check_voxel(chunk: SvdagChunk, v) -> tuple[int, int, int]:
    x, y, z = (int(c) for c in v)
    r = chunk.chunk_res
    if not (0 <= x < r and 0 <= y < r and 0 <= z < r):
        raise BoundsError(f"voxel {v} outside chunk of edge {r}")
    return x, y, z


def query(chunk: SvdagChunk, v) -> bool:
    x, y, z = _check_voxel(chunk, v)
    return bool(K.dag_query(chunk.nodes, chunk.bitmaps, chunk.root, chunk.chunk_res, x, y, z))


def leaf_rank(chunk: SvdagChunk, v) -> int:
    """Number of occupied voxels preceding ``v`` in DFS order."""
    x, y, z = _check_voxel(chunk, v)
    rank = K.dag_leaf_rank(chunk.nodes, chunk.bitmaps, chunk.root, chunk.chunk_res, x, y, z)
    if rank < 0:
        raise BoundsError(f"voxel {v} is not occupied")
    return int(rank)


def ray_intersect(chunk: SvdagChunk, origin, direction, t_range=(0.0, np.inf)) -> VoxelHit | None:
    """First occupied voxel along ``origin + t * direction`` (chunk-local voxel units)."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    if not np.any(d):
        raise ValueError("ray direction must be non-zero")
    tmin, tmax = float(t_range[0]), float(t_range[1])
    if tmin > tmax:
        raise ValueError("empty t_range")
    lo = np.array(chunk.aabb_min, dtype=np.float64)
    hi = np.array(chunk.aabb_max, dtype=np.float64) + 1.0
    tn, tf, _ = K.ray_box(o[0], o[1], o[2], d[0], d[1], d[2],
                          K._inv(d[0]), K._inv(d[1]), K._inv(d[2]),
                          lo[0], lo[1], lo[2], hi[0], hi[1], hi[2])
    if tn > tf or tf < tmin or tn > tmax:
        return None
    hit, t, vx, vy, vz, normal = K.dag_ray(
        chunk.nodes, chunk.bitmaps, chunk.root, chunk.chunk_res,
        o[0], o[1], o[2], d[0], d[1], d[2], tmin, min(tmax, tf), *K.make_stacks(),
    )
    if not hit:
        return None
    return VoxelHit(float(t), (int(vx), int(vy), int(vz)), int(normal))


def chunk_stats(chunk: SvdagChunk) -> dict:
    return {
        "node_count": chunk.node_count,
        "bitmap_count": chunk.bitmap_count,
        "geometry_bytes": chunk.geometry_bytes,
        "leaf_count": chunk.leaf_count,
    }


def iter_nodes(chunk: SvdagChunk):
    """Yield ``(offset, child_mask, leaf_count, refs)`` for every unique node."""
    off = 0
    words = chunk.nodes
    while off < len(words):
        mask = int(words[off]) & 0xFF
        k = bin(mask).count("1")
        yield off, mask, int(words[off + 1]), [int(w) for w in words[off + 2: off + 2 + k]]
        off += 2 + k


def decode_occupancy(chunk: SvdagChunk) -> np.ndarray:
    """Expand the DAG back to a dense boolean grid (level-by-level gather)."""
    r = chunk.chunk_res
    nodes = chunk.nodes.astype(np.int64)
    refs = np.array([chunk.root], dtype=np.int64)
    lo = np.zeros((1, 3), dtype=np.int64)
    size = r
    octs = np.arange(8)
    offsets = np.stack([octs & 1, (octs >> 1) & 1, octs >> 2], axis=1)
    while size >= 8:
        half = size // 2
        masks = nodes[refs] & 0xFF
        present = (masks[:, None] >> octs[None, :]) & 1
        ranks = np.cumsum(present, axis=1) - present
        sel = present.astype(bool)
        child = nodes[(refs[:, None] + 2 + ranks)[sel]]
        lo = (lo[:, None, :] + offsets[None, :, :] * half)[sel]
        refs = child
        size = half
    out = np.zeros((r, r, r), dtype=bool)
    bms = chunk.bitmaps[refs]
    bits = ((bms[:, None] >> np.arange(64, dtype=np.uint64)[None, :]) & np.uint64(1)).astype(bool)
    blk, bit = np.nonzero(bits)
    pts = lo[blk] + VOXEL_OF_BIT[bit]
    out[pts[:, 0], pts[:, 1], pts[:, 2]] = True
    return out


def morton_keys(coords: np.ndarray, res: int) -> np.ndarray:
    """DFS order key: octant digits ``x | y << 1 | z << 2`` from the top level down."""
    coords = np.asarray(coords, dtype=np.uint64)
    key = np.zeros(len(coords), dtype=np.uint64)
    for b in range(int(np.log2(res))):
        for axis in range(3):
            key |= ((coords[:, axis] >> np.uint64(b)) & np.uint64(1)) << np.uint64(3 * b + axis)
    return key


def dfs_order(occupancy: np.ndarray) -> np.ndarray:
    """Coordinates of occupied voxels sorted by DFS rank, shape ``(n, 3)``."""
    pts = np.argwhere(occupancy)
    return pts[np.argsort(morton_keys(pts, occupancy.shape[0]), kind="stable")]
