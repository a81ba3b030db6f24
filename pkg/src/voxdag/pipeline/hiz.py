"""Min-reduction mip chain over encoded depth (larger = nearer, so min = farthest)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TILE_LEVEL = 3


@dataclass(frozen=True, eq=False)
class HiZPyramid:
    levels: list[np.ndarray]

    def __len__(self):
        return len(self.levels)

    def tile_min(self) -> np.ndarray:
        """Farthest encoded depth of every 8x8 tile, shape ``(tiles_y, tiles_x)``."""
        return self.levels[TILE_LEVEL]

    def footprint_min(self, level: int, x0: int, y0: int, x1: int, y1: int) -> int:
        """Min over level-0 pixels ``[x0, x1) x [y0, y1)`` using texels of ``level``."""
        s = 1 << level
        lv = self.levels[level]
        return int(lv[y0 // s: -(-y1 // s), x0 // s: -(-x1 // s)].min())


def _reduce(a: np.ndarray) -> np.ndarray:
    h, w = a.shape
    if h % 2 or w % 2:
        # pad with the identity of min so odd edges keep their exact footprint min
        a = np.pad(a, ((0, h % 2), (0, w % 2)), constant_values=np.iinfo(np.uint32).max)
        h, w = a.shape
    return a.reshape(h // 2, 2, w // 2, 2).min(axis=(1, 3))


def build_hiz(depth: np.ndarray) -> HiZPyramid:
    """Level 0 is ``depth``; each coarser texel is the min of its 2x2 children."""
    d = np.asarray(depth, dtype=np.uint32)
    h, w = d.shape
    ph, pw = -h % 8, -w % 8
    if ph or pw:
        d = np.pad(d, ((0, ph), (0, pw)), constant_values=0)
    levels = [d]
    while levels[-1].shape != (1, 1):
        levels.append(_reduce(levels[-1]))
    return HiZPyramid(levels)
