"""Scene bundle file ("AOKN", version 1, little-endian).

Layout::

    header     magic "AOKN" | version u32 | chunk_res u32 | voxel_size f64 |
               world_dims 3 x u32 | lod_count u32 | chunk_count u32
    directory  chunk_count entries, sorted by (lod, cx, cy, cz):
               lod u8 | cx, cy, cz u16 | node_count, bitmap_count,
               block_count, leaf_count u32 | aabb min xyz, max xyz u8 |
               blob offset u64 | blob length u64
    blobs      per chunk: node words (u32) + bitmaps (u64) + color blocks
               (12-byte records), with node words = (length - 8 * bitmaps
               - 12 * blocks) / 4

Loading reads the header and directory only; chunk blobs are read on
first access.
"""

from __future__ import annotations

import os
import struct
from collections.abc import Mapping
from pathlib import Path

from ..color import BLOCK_RECORD, ColorBlockArray
from ..errors import BadMagicError, BadVersionError, OffsetError, TruncatedError
from ..lod import ChunkInfo, ChunkRecord, LodPyramid
from ..scene import ChunkKey, WorldConfig
from ..svdag import SvdagChunk

MAGIC = b"AOKN"
VERSION = 1
HEADER = struct.Struct("<4sIIdIIIII")
ENTRY = struct.Struct("<B3H4I6B2Q")


def _blob(record: ChunkRecord) -> bytes:
    return record.svdag.to_bytes() + record.blocks.to_bytes()


def bundle_bytes(pyramid: LodPyramid) -> bytes:
    cfg = pyramid.config
    keys = sorted(pyramid.infos)
    head = HEADER.pack(MAGIC, VERSION, cfg.chunk_res, cfg.voxel_size, *cfg.world_dims,
                       pyramid.lod_count, len(keys))
    offset = HEADER.size + ENTRY.size * len(keys)
    entries, blobs = [], []
    for key in keys:
        rec = pyramid.record(key)
        blob = _blob(rec)
        info = rec.info
        entries.append(ENTRY.pack(key.lod, key.cx, key.cy, key.cz, info.node_count, info.bitmap_count,
                                  info.block_count, info.leaf_count, *info.aabb_min, *info.aabb_max,
                                  offset, len(blob)))
        blobs.append(blob)
        offset += len(blob)
    return head + b"".join(entries) + b"".join(blobs)


def save_bundle(pyramid: LodPyramid, path) -> int:
    """Write ``pyramid`` to ``path``; returns the file size."""
    data = bundle_bytes(pyramid)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return len(data)


class _LazyRecords(Mapping):
    """Chunk records read from the bundle file on access."""

    def __init__(self, path: Path, config: WorldConfig, infos: dict, spans: dict):
        self._path = path
        self._config = config
        self._infos = infos
        self._spans = spans
        self.reads = 0

    def __getitem__(self, key: ChunkKey) -> ChunkRecord:
        info = self._infos[key]
        offset, length = self._spans[key]
        with open(self._path, "rb") as fh:
            fh.seek(offset)
            data = fh.read(length)
        if len(data) != length:
            raise TruncatedError(f"blob of {key} is truncated")
        self.reads += 1
        return decode_blob(data, info, self._config.chunk_res)

    def __iter__(self):
        return iter(self._infos)

    def __len__(self):
        return len(self._infos)


def decode_blob(data: bytes, info: ChunkInfo, chunk_res: int) -> ChunkRecord:
    gb = 4 * info.node_words + 8 * info.bitmap_count
    svdag = SvdagChunk.from_bytes(data[:gb], chunk_res, info.node_words, info.bitmap_count,
                                  info.node_count, info.aabb_min, info.aabb_max)
    blocks = ColorBlockArray.from_bytes(data[gb:])
    return ChunkRecord(info.key, svdag, blocks)


def read_directory(path) -> tuple[WorldConfig, int, dict[ChunkKey, ChunkInfo], dict[ChunkKey, tuple[int, int]]]:
    """Parse and validate header and directory without touching any blob."""
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) < 4 or head[:4] != MAGIC:
            raise BadMagicError(f"{path}: not a scene bundle (bad magic)")
        if len(head) < HEADER.size:
            raise TruncatedError(f"{path}: header truncated")
        magic, version, chunk_res, voxel_size, wx, wy, wz, lod_count, count = HEADER.unpack(head)
        if version != VERSION:
            raise BadVersionError(f"{path}: unsupported bundle version {version}")
        raw = fh.read(ENTRY.size * count)
        if len(raw) < ENTRY.size * count:
            raise TruncatedError(f"{path}: directory truncated")
    config = WorldConfig(chunk_res=chunk_res, voxel_size=voxel_size, world_dims=(wx, wy, wz))
    data_start = HEADER.size + ENTRY.size * count
    infos, spans = {}, {}
    prev_end = data_start
    for i in range(count):
        (lod, cx, cy, cz, nodes, bitmaps, blocks, leaves, x0, y0, z0, x1, y1, z1,
         offset, length) = ENTRY.unpack_from(raw, i * ENTRY.size)
        key = ChunkKey(lod, cx, cy, cz)
        if key in infos:
            raise OffsetError(f"duplicate directory entry {key}")
        if offset < prev_end or offset >= size:
            raise OffsetError(f"blob of {key} at offset {offset} is out of range or overlaps")
        if offset + length > size:
            raise TruncatedError(f"blob of {key} extends past the end of the file")
        words4 = length - 8 * bitmaps - BLOCK_RECORD.itemsize * blocks
        if words4 <= 0 or words4 % 4:
            raise OffsetError(f"blob length of {key} is inconsistent with its counts")
        infos[key] = ChunkInfo(key, nodes, words4 // 4, bitmaps, blocks, leaves, (x0, y0, z0), (x1, y1, z1))
        spans[key] = (offset, length)
        prev_end = offset + length
    return config, lod_count, infos, spans


def load_bundle(path) -> LodPyramid:
    """Open a bundle; chunk blobs load lazily through ``pyramid.record``."""
    path = Path(path)
    config, lod_count, infos, spans = read_directory(path)
    return LodPyramid(config, infos, _LazyRecords(path, config, infos, spans), lod_count)


def bundle_size(path) -> int:
    return Path(path).stat().st_size
