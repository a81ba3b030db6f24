"""Depth and visibility-buffer word encodings.

Word layout, most significant first::

    63..40  depth (24 bits, near = 2**24 - 1, far = 0)
    39..37  normal code (0:+X 1:-X 2:+Y 3:-Y 4:+Z 5:-Z, 7: external surface)
    36..24  chunk slot (13 bits)
    23..0   voxel x (23..16), y (15..8), z (7..0)
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, FieldOverflowError

DEPTH_MAX = (1 << 24) - 1
EXTERNAL_NORMAL = 7


def _check_planes(near, far):
    if not near < far:
        raise ConfigError("near must be smaller than far")


def encode_depth(t, near: float, far: float):
    """Linear, strictly decreasing 24-bit depth; rounds half away from zero."""
    _check_planes(near, far)
    tc = np.clip(np.asarray(t, dtype=np.float64), near, far)
    enc = np.floor(DEPTH_MAX * (far - tc) / (far - near) + 0.5).astype(np.int64)
    return int(enc) if enc.ndim == 0 else enc


def decode_depth(enc, near: float, far: float):
    """Representative ``t`` of a depth bucket."""
    _check_planes(near, far)
    e = np.asarray(enc, dtype=np.float64)
    t = far - e * (far - near) / DEPTH_MAX
    return float(t) if t.ndim == 0 else t


def encode_visibility(depth24: int, normal_code: int, slot: int, voxel) -> int:
    x, y, z = (int(v) for v in voxel)
    fields = ((depth24, 24, "depth"), (normal_code, 3, "normal"), (slot, 13, "slot"), (x, 8, "x"), (y, 8, "y"), (z, 8, "z"))
    for value, bits, name in fields:
        if not 0 <= int(value) < (1 << bits):
            raise FieldOverflowError(f"{name}={value} does not fit {bits} bits")
    return (int(depth24) << 40) | (int(normal_code) << 37) | (int(slot) << 24) | (x << 16) | (y << 8) | z


def decode_visibility(word: int) -> tuple[int, int, int, tuple[int, int, int]]:
    """``(depth24, normal_code, slot, (x, y, z))``."""
    w = int(word)
    if not 0 <= w < (1 << 64):
        raise FieldOverflowError("visibility word must be a 64-bit unsigned value")
    return (w >> 40, (w >> 37) & 7, (w >> 24) & 0x1FFF, ((w >> 16) & 0xFF, (w >> 8) & 0xFF, w & 0xFF))


def decode_visibility_array(words: np.ndarray) -> dict[str, np.ndarray]:
    w = np.asarray(words, dtype=np.uint64)
    return {
        "depth": (w >> np.uint64(40)).astype(np.uint32),
        "normal": ((w >> np.uint64(37)) & np.uint64(7)).astype(np.uint8),
        "slot": ((w >> np.uint64(24)) & np.uint64(0x1FFF)).astype(np.int32),
        "voxel": np.stack([(w >> np.uint64(s)) & np.uint64(0xFF) for s in (16, 8, 0)], axis=-1).astype(np.int32),
    }
