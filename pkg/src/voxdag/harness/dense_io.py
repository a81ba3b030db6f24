"""Raw dense world import/export ("AOKD", version 1, little-endian).

Layout::

    header  magic "AOKD" | version u32 | chunk_res u32 | voxel_size f64 |
            world_dims 3 x u32 | chunk_count u32
    chunk   cx, cy, cz u16 | run_count u32 | runs (u32 each) |
            occupied_count u32 | colors (occupied_count x 3 u8)

Occupancy is flattened in C order over ``[x, y, z]`` and run-length
encoded as alternating empty/occupied run lengths, starting with an
(possibly zero-length) empty run.  Colors follow the same C order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagicError, BadVersionError, BundleError, TruncatedError
from ..scene import ChunkKey, DenseChunk, DenseWorld, WorldConfig

MAGIC = b"AOKD"
VERSION = 1
HEADER = struct.Struct("<4sIIdIIII")
CHUNK = struct.Struct("<3HI")


def rle_encode(flags: np.ndarray) -> np.ndarray:
    f = np.asarray(flags, dtype=bool).ravel()
    change = np.flatnonzero(f[1:] != f[:-1]) + 1
    bounds = np.concatenate([[0], change, [len(f)]])
    runs = np.diff(bounds)
    if len(f) and f[0]:
        runs = np.concatenate([[0], runs])
    return runs.astype("<u4")


def rle_decode(runs: np.ndarray, n: int) -> np.ndarray:
    runs = np.asarray(runs, dtype=np.int64)
    if runs.sum() != n:
        raise BundleError(f"occupancy runs cover {runs.sum()} voxels, expected {n}")
    values = (np.arange(len(runs)) % 2).astype(bool)
    return np.repeat(values, runs)


def dense_bytes(world: DenseWorld) -> bytes:
    cfg = world.config
    parts = [HEADER.pack(MAGIC, VERSION, cfg.chunk_res, cfg.voxel_size, *cfg.world_dims, len(world))]
    for key in world:
        chunk = world.chunks[key]
        runs = rle_encode(chunk.occupancy)
        parts.append(CHUNK.pack(key.cx, key.cy, key.cz, len(runs)))
        parts.append(runs.tobytes())
        occ = chunk.occupancy
        parts.append(struct.pack("<I", int(occ.sum())))
        parts.append(np.ascontiguousarray(chunk.color[occ], dtype=np.uint8).tobytes())
    return b"".join(parts)


def save_dense(world: DenseWorld, path) -> int:
    data = dense_bytes(world)
    Path(path).write_bytes(data)
    return len(data)


def load_dense(path) -> DenseWorld:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a dense world file (bad magic)")
    if len(data) < HEADER.size:
        raise TruncatedError(f"{path}: header truncated")
    _, version, r, vs, wx, wy, wz, count = HEADER.unpack_from(data)
    if version != VERSION:
        raise BadVersionError(f"{path}: unsupported dense version {version}")
    cfg = WorldConfig(chunk_res=r, voxel_size=vs, world_dims=(wx, wy, wz))
    pos = HEADER.size
    n = r ** 3

    def take(nbytes):
        nonlocal pos
        if pos + nbytes > len(data):
            raise TruncatedError(f"{path}: chunk record truncated")
        out = data[pos:pos + nbytes]
        pos += nbytes
        return out

    chunks = {}
    for _ in range(count):
        cx, cy, cz, nruns = CHUNK.unpack(take(CHUNK.size))
        runs = np.frombuffer(take(4 * nruns), dtype="<u4")
        occ = rle_decode(runs, n).reshape(r, r, r)
        (k,) = struct.unpack("<I", take(4))
        if k != int(occ.sum()):
            raise BundleError(f"{path}: color count {k} does not match occupancy")
        col = np.zeros((r, r, r, 3), dtype=np.uint8)
        col[occ] = np.frombuffer(take(3 * k), dtype=np.uint8).reshape(k, 3)
        chunks[ChunkKey(0, cx, cy, cz)] = DenseChunk(occ, col)
    return DenseWorld(cfg, chunks)
