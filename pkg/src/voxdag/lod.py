"""LOD chunk pyramid, the LOD error metric and cut selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .color import DEFAULT_EC, ColorBlockArray, compress, extract_colors
from .errors import ConfigError
from .scene import ChunkKey, DenseChunk, WorldConfig
from .svdag import SvdagChunk, build_chunk

DEFAULT_DENSITY = 2


@dataclass(frozen=True)
class ChunkInfo:
    """Directory metadata of a chunk, available without loading its blobs."""

    key: ChunkKey
    node_count: int
    node_words: int
    bitmap_count: int
    block_count: int
    leaf_count: int
    aabb_min: tuple[int, int, int]
    aabb_max: tuple[int, int, int]

    @property
    def geometry_bytes(self) -> int:
        return 4 * self.node_words + 8 * self.bitmap_count

    @property
    def color_bytes(self) -> int:
        return 12 * self.block_count

    @property
    def nbytes(self) -> int:
        return self.geometry_bytes + self.color_bytes


@dataclass(frozen=True, eq=False)
class ChunkRecord:
    key: ChunkKey
    svdag: SvdagChunk
    blocks: ColorBlockArray

    @property
    def info(self) -> ChunkInfo:
        s = self.svdag
        return ChunkInfo(self.key, s.node_count, len(s.nodes), s.bitmap_count, len(self.blocks),
                         s.leaf_count, s.aabb_min, s.aabb_max)

    @property
    def nbytes(self) -> int:
        return self.svdag.geometry_bytes + self.blocks.nbytes

    def __eq__(self, other):
        if not isinstance(other, ChunkRecord):
            return NotImplemented
        return self.key == other.key and self.svdag == other.svdag and self.blocks == other.blocks

    __hash__ = None


def world_aabb(config: WorldConfig, info: ChunkInfo) -> tuple[np.ndarray, np.ndarray]:
    """World-space bounds of the occupied part of a chunk."""
    vs = config.voxel_size * (1 << info.key.lod)
    origin = config.chunk_origin(info.key)
    lo = origin + np.array(info.aabb_min, dtype=np.float64) * vs
    hi = origin + (np.array(info.aabb_max, dtype=np.float64) + 1.0) * vs
    return lo, hi


class LodPyramid:
    """All LOD levels of a world plus the implicit chunk octree over them.

    ``records`` may be a lazy mapping (see :func:`voxdag.harness.bundle.load_bundle`);
    ``infos`` is always eager.
    """

    def __init__(self, config: WorldConfig, infos: Mapping[ChunkKey, ChunkInfo],
                 records: Mapping[ChunkKey, ChunkRecord], lod_count: int | None = None):
        self.config = config
        self.lod_count = config.lod_count if lod_count is None else lod_count
        self.infos = dict(sorted(infos.items()))
        self.records = records
        self.lod0_keys = frozenset(k for k in self.infos if k.lod == 0)
        # regions holding LOD-0 content, at every level
        occupied = set()
        for key in self.lod0_keys:
            for n in range(self.lod_count):
                occupied.add(key.ancestor(n))
        self.occupied_regions = frozenset(occupied)

    @property
    def root_key(self) -> ChunkKey:
        return ChunkKey(self.lod_count - 1, 0, 0, 0)

    def __contains__(self, key) -> bool:
        return key in self.infos

    def __len__(self):
        return len(self.infos)

    def keys(self, lod: int | None = None) -> list[ChunkKey]:
        return [k for k in self.infos if lod is None or k.lod == lod]

    def record(self, key: ChunkKey) -> ChunkRecord:
        return self.records[key]

    def total_bytes(self) -> int:
        return sum(i.nbytes for i in self.infos.values())

    def level_stats(self) -> list[dict]:
        rows = []
        for n in range(self.lod_count):
            infos = [i for i in self.infos.values() if i.key.lod == n]
            rows.append({
                "lod": n,
                "chunks": len(infos),
                "nodes": sum(i.node_count for i in infos),
                "bitmaps": sum(i.bitmap_count for i in infos),
                "geometry_bytes": sum(i.geometry_bytes for i in infos),
                "color_blocks": sum(i.block_count for i in infos),
                "color_bytes": sum(i.color_bytes for i in infos),
                "voxels": sum(i.leaf_count for i in infos),
            })
        return rows


def downsample8(children: Sequence[DenseChunk | None], density: int = DEFAULT_DENSITY) -> DenseChunk | None:
    """Aggregate the 8 octant children of a region into one chunk (``None`` if empty).

    A parent voxel is solid when at least ``density`` of its 2x2x2 finer
    voxels are; its color is the rounded mean of those voxels' colors.
    """
    if len(children) != 8:
        raise ValueError("downsample8 needs exactly 8 (optional) children")
    present = [c for c in children if c is not None]
    if not present:
        raise ValueError("downsample8 needs at least one child")
    if not 1 <= density <= 8:
        raise ConfigError("density must lie in [1, 8]")
    r = present[0].res
    h = r // 2
    occ = np.zeros((r, r, r), dtype=bool)
    col = np.zeros((r, r, r, 3), dtype=np.uint8)
    for o, child in enumerate(children):
        if child is None:
            continue
        c = child.occupancy.reshape(h, 2, h, 2, h, 2)
        cnt = c.sum(axis=(1, 3, 5), dtype=np.int64)
        sums = (child.color.astype(np.int64).reshape(h, 2, h, 2, h, 2, 3)).sum(axis=(1, 3, 5))
        solid = cnt >= density
        safe = np.maximum(cnt, 1)[..., None]
        mean = (2 * sums + safe) // (2 * safe)
        sl = tuple(slice(((o >> a) & 1) * h, ((o >> a) & 1) * h + h) for a in range(3))
        occ[sl] = solid
        col[sl] = np.where(solid[..., None], mean, 0).astype(np.uint8)
    if not occ.any():
        return None
    return DenseChunk(occ, col)


def compress_chunk(key: ChunkKey, dense: DenseChunk, e_c: float = DEFAULT_EC) -> ChunkRecord:
    svdag = build_chunk(dense)
    return ChunkRecord(key, svdag, compress(extract_colors(dense, svdag), e_c))


def build_pyramid(lod0: Iterable[tuple[ChunkKey, DenseChunk]], config: WorldConfig,
                  density: int = DEFAULT_DENSITY, e_c: float = DEFAULT_EC) -> LodPyramid:
    """Compress LOD 0 and every coarser level obtained by repeated downsampling."""
    level = {k: c for k, c in lod0 if not c.is_empty()}
    if not level:
        raise ConfigError("cannot build a pyramid from an empty world")
    records: dict[ChunkKey, ChunkRecord] = {}
    for n in range(config.lod_count):
        for key in sorted(level):
            records[key] = compress_chunk(key, level[key], e_c)
        if n == config.lod_count - 1:
            break
        parents = sorted({k.parent() for k in level})
        nxt = {}
        for pk in parents:
            child = downsample8([level.get(ck) for ck in pk.children()], density)
            if child is not None:
                nxt[pk] = child
        level = nxt
        if not level:
            break
    infos = {k: r.info for k, r in records.items()}
    return LodPyramid(config, infos, records)


def lod_error(chunk_world_size: float, streaming_factor: float, chunk_center, camera_pos) -> float:
    """``chunk_size * streaming_factor - |chunk_center - camera|``."""
    if chunk_world_size <= 0:
        raise ValueError("chunk size must be positive")
    dist = float(np.linalg.norm(np.asarray(chunk_center, dtype=np.float64) - np.asarray(camera_pos, dtype=np.float64)))
    return chunk_world_size * streaming_factor - dist


def select_cut(pyramid: LodPyramid, camera_pos, streaming_factor: float) -> frozenset[ChunkKey]:
    """Recursive descent of the chunk octree; a zero error selects (loads) the chunk."""
    if streaming_factor <= 0:
        raise ConfigError("streaming_factor must be positive")
    cfg = pyramid.config
    cam = np.asarray(camera_pos, dtype=np.float64)
    out: set[ChunkKey] = set()
    stack = [pyramid.root_key]
    while stack:
        key = stack.pop()
        if key not in pyramid.occupied_regions:
            continue
        if key in pyramid.infos:
            if key.lod == 0:
                out.add(key)
                continue
            err = lod_error(cfg.chunk_size_at(key.lod), streaming_factor, cfg.chunk_center(key), cam)
            if err <= 0:
                out.add(key)
                continue
        # no chunk stored for this region (density pruned it) or needs refinement
        stack.extend(key.children())
    return frozenset(out)


def coarsest_cut(pyramid: LodPyramid) -> frozenset[ChunkKey]:
    """The cut made of the highest stored chunk over every occupied region."""
    out: set[ChunkKey] = set()
    stack = [pyramid.root_key]
    while stack:
        key = stack.pop()
        if key not in pyramid.occupied_regions:
            continue
        if key in pyramid.infos:
            out.add(key)
        else:
            stack.extend(key.children())
    return frozenset(out)


def cut_violations(pyramid: LodPyramid, keys: Iterable[ChunkKey]) -> list[str]:
    """Reasons why ``keys`` is not a partition of the occupied world (empty if it is)."""
    keys = set(keys)
    problems = []
    for k in keys:
        if k not in pyramid.infos:
            problems.append(f"{k} is not a stored chunk")
    covered: dict[ChunkKey, ChunkKey] = {}
    for lk in pyramid.lod0_keys:
        owners = [lk.ancestor(n) for n in range(pyramid.lod_count) if lk.ancestor(n) in keys]
        if not owners:
            problems.append(f"LOD-0 chunk {lk} is not covered")
        elif len(owners) > 1:
            problems.append(f"LOD-0 chunk {lk} covered by {owners}")
        else:
            covered[lk] = owners[0]
    used = set(covered.values())
    for k in keys - used:
        if k in pyramid.infos:
            problems.append(f"{k} covers no LOD-0 content")
    return problems


def is_cut(pyramid: LodPyramid, keys: Iterable[ChunkKey]) -> bool:
    return not cut_violations(pyramid, keys)
