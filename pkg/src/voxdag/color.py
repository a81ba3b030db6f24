"""DFS-ordered color arrays and greedy block compression.

Colors are 8-bit RGB.  The merge test works on channels normalised to
``[0, 1]``; running sums are kept as exact integers and the block mean is
rounded to 8 bits once, when the block is closed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .errors import BoundsError, ConsistencyError
from .scene import DenseChunk
from .svdag import SvdagChunk, dfs_order

#: norm of the merge test: "linf" (max channel difference) or "l2"
COLOR_NORM = "linf"
DEFAULT_EC = 0.05
BLOCK_RECORD = np.dtype([("start", "<u4"), ("length", "<u4"), ("rgb", "u1", 3), ("pad", "u1")])


@dataclass(frozen=True, eq=False)
class ColorBlockArray:
    starts: np.ndarray   # uint32, ascending
    lengths: np.ndarray  # uint32
    colors: np.ndarray   # uint8 (k, 3)

    def __len__(self):
        return len(self.starts)

    @property
    def n(self) -> int:
        """Length of the color array the blocks tile."""
        if not len(self.starts):
            return 0
        return int(self.starts[-1]) + int(self.lengths[-1])

    @property
    def nbytes(self) -> int:
        return BLOCK_RECORD.itemsize * len(self)

    def to_bytes(self) -> bytes:
        rec = np.zeros(len(self), dtype=BLOCK_RECORD)
        rec["start"] = self.starts
        rec["length"] = self.lengths
        rec["rgb"] = self.colors
        return rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ColorBlockArray":
        if len(data) % BLOCK_RECORD.itemsize:
            raise ValueError("color block blob length is not a multiple of the record size")
        rec = np.frombuffer(data, dtype=BLOCK_RECORD)
        return cls(rec["start"].astype(np.uint32), rec["length"].astype(np.uint32), rec["rgb"].astype(np.uint8))

    def expand(self) -> np.ndarray:
        """Per-rank colors, shape ``(n, 3)``."""
        return np.repeat(self.colors, self.lengths.astype(np.int64), axis=0)

    def __eq__(self, other):
        if not isinstance(other, ColorBlockArray):
            return NotImplemented
        return (
            np.array_equal(self.starts, other.starts)
            and np.array_equal(self.lengths, other.lengths)
            and np.array_equal(self.colors, other.colors)
        )

    __hash__ = None


def extract_colors(dense: DenseChunk, chunk: SvdagChunk) -> np.ndarray:
    """Colors of ``dense`` in DFS rank order, shape ``(leaf_count, 3)`` uint8."""
    if dense.res != chunk.chunk_res or dense.occupied_count != chunk.leaf_count:
        raise ConsistencyError("dense chunk does not match the SVDAG it was paired with")
    pts = dfs_order(dense.occupancy)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if tuple(lo) != chunk.aabb_min or tuple(hi) != chunk.aabb_max:
        raise ConsistencyError("dense chunk bounds do not match the SVDAG")
    return dense.color[pts[:, 0], pts[:, 1], pts[:, 2]]


def _as_u8(colors) -> np.ndarray:
    arr = np.asarray(colors)
    if arr.dtype != np.uint8:
        arr = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return np.ascontiguousarray(arr.reshape(-1, 3))


@njit(cache=True)
def _compress(colors, e_c, use_l2, starts, lengths, out, merge_dist):
    n = colors.shape[0]
    k = 0
    s0 = int(colors[0, 0])
    s1 = int(colors[0, 1])
    s2 = int(colors[0, 2])
    cnt = 1
    starts[0] = 0
    merge_dist[0] = -1.0
    examined = 1
    for i in range(1, n):
        examined += 1
        # |c - s/cnt| / 255 with an exact integer numerator
        inv = 1.0 / (255.0 * cnt)
        d0 = abs(int(colors[i, 0]) * cnt - s0) * inv
        d1 = abs(int(colors[i, 1]) * cnt - s1) * inv
        d2 = abs(int(colors[i, 2]) * cnt - s2) * inv
        if use_l2:
            dist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        else:
            dist = max(d0, max(d1, d2))
        if dist <= e_c:
            s0 += int(colors[i, 0])
            s1 += int(colors[i, 1])
            s2 += int(colors[i, 2])
            cnt += 1
            merge_dist[i] = dist
        else:
            lengths[k] = cnt
            out[k, 0] = (2 * s0 + cnt) // (2 * cnt)
            out[k, 1] = (2 * s1 + cnt) // (2 * cnt)
            out[k, 2] = (2 * s2 + cnt) // (2 * cnt)
            k += 1
            starts[k] = i
            s0 = int(colors[i, 0])
            s1 = int(colors[i, 1])
            s2 = int(colors[i, 2])
            cnt = 1
            merge_dist[i] = -1.0
    lengths[k] = cnt
    out[k, 0] = (2 * s0 + cnt) // (2 * cnt)
    out[k, 1] = (2 * s1 + cnt) // (2 * cnt)
    out[k, 2] = (2 * s2 + cnt) // (2 * cnt)
    return k + 1, examined


def compress_traced(colors, e_c: float = DEFAULT_EC, norm: str | None = None):
    """Like :func:`compress`, also returning ``(examined, merge_distances)``.

    ``merge_distances[i]`` is the distance of color ``i`` to the running block
    mean at the moment it was merged, or ``-1`` where it opened a block.
    """
    arr = _as_u8(colors)
    if arr.shape[0] == 0:
        raise ValueError("cannot compress an empty color array")
    if e_c < 0:
        raise ValueError("e_c must be non-negative")
    norm = norm or COLOR_NORM
    if norm not in ("linf", "l2"):
        raise ValueError(f"unknown color norm {norm!r}")
    n = arr.shape[0]
    starts = np.empty(n, dtype=np.uint32)
    lengths = np.empty(n, dtype=np.uint32)
    out = np.empty((n, 3), dtype=np.uint8)
    merge_dist = np.empty(n, dtype=np.float64)
    k, examined = _compress(arr, float(e_c), norm == "l2", starts, lengths, out, merge_dist)
    blocks = ColorBlockArray(starts[:k].copy(), lengths[:k].copy(), out[:k].copy())
    return blocks, examined, merge_dist


def compress(colors, e_c: float = DEFAULT_EC, norm: str | None = None) -> ColorBlockArray:
    """Single left-to-right greedy merge of a DFS color array into blocks."""
    return compress_traced(colors, e_c, norm)[0]


def lookup(blocks: ColorBlockArray, rank: int) -> tuple[int, int, int]:
    """Color of the block covering ``rank`` (binary search)."""
    n = blocks.n
    if not 0 <= rank < n:
        raise BoundsError(f"rank {rank} outside [0, {n})")
    i = K.block_search(blocks.starts, 0, len(blocks), rank)
    return tuple(int(c) for c in blocks.colors[i])
