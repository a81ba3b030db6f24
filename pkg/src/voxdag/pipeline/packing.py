"""Flatten a resident snapshot into slot-indexed arrays for the kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PackedScene:
    n_slots: int
    valid: np.ndarray        # bool (S,)
    node_base: np.ndarray    # int64 (S+1,) prefix offsets into nodes
    bm_base: np.ndarray      # int64 (S+1,)
    block_base: np.ndarray   # int64 (S+1,)
    res: np.ndarray          # int64 (S,)
    origin: np.ndarray       # float64 (S, 3) world min corner of chunk region
    voxel_size: np.ndarray   # float64 (S,)
    aabb_lo: np.ndarray      # float64 (S, 3) chunk-local voxel units
    aabb_hi: np.ndarray      # float64 (S, 3) exclusive
    region_lo: np.ndarray    # float64 (S, 3) world
    region_hi: np.ndarray
    world_lo: np.ndarray     # float64 (S, 3) world occupied bounds
    world_hi: np.ndarray
    nodes: np.ndarray        # uint32
    bitmaps: np.ndarray      # uint64
    block_starts: np.ndarray  # uint32
    block_colors: np.ndarray  # uint8 (B, 3)

    def visible_slots(self) -> np.ndarray:
        return np.flatnonzero(self.valid)


def pack_snapshot(snapshot) -> PackedScene:
    slots = sorted(snapshot.slots)
    n = (slots[-1] + 1) if slots else 0
    valid = np.zeros(n, dtype=bool)
    res = np.zeros(n, dtype=np.int64)
    origin = np.zeros((n, 3))
    vsize = np.ones(n)
    alo = np.zeros((n, 3))
    ahi = np.zeros((n, 3))
    wlo = np.zeros((n, 3))
    whi = np.zeros((n, 3))
    node_len = np.zeros(n, dtype=np.int64)
    bm_len = np.zeros(n, dtype=np.int64)
    blk_len = np.zeros(n, dtype=np.int64)
    nodes, bms, starts, colors = [], [], [], []
    for s in range(n):
        c = snapshot.slots.get(s)
        if c is None:
            continue
        rec = c.record
        valid[s] = True
        res[s] = rec.svdag.chunk_res
        origin[s] = c.origin
        vsize[s] = c.voxel_size
        alo[s] = rec.svdag.aabb_min
        ahi[s] = np.array(rec.svdag.aabb_max) + 1.0
        wlo[s] = c.aabb_lo
        whi[s] = c.aabb_hi
        node_len[s] = len(rec.svdag.nodes)
        bm_len[s] = len(rec.svdag.bitmaps)
        blk_len[s] = len(rec.blocks)
        nodes.append(rec.svdag.nodes)
        bms.append(rec.svdag.bitmaps)
        starts.append(rec.blocks.starts)
        colors.append(rec.blocks.colors)

    def prefix(lengths):
        out = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(lengths, out=out[1:])
        return out

    def cat(parts, dtype, shape=()):
        if not parts:
            return np.zeros((0,) + shape, dtype=dtype)
        return np.ascontiguousarray(np.concatenate(parts).astype(dtype, copy=False))

    rsize = res * vsize
    return PackedScene(
        n_slots=n, valid=valid,
        node_base=prefix(node_len), bm_base=prefix(bm_len), block_base=prefix(blk_len),
        res=res, origin=origin, voxel_size=vsize, aabb_lo=alo, aabb_hi=ahi,
        region_lo=origin.copy(), region_hi=origin + rsize[:, None],
        world_lo=wlo, world_hi=whi,
        nodes=cat(nodes, np.uint32), bitmaps=cat(bms, np.uint64),
        block_starts=cat(starts, np.uint32), block_colors=cat(colors, np.uint8, (3,)),
    )
