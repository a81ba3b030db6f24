"""Numba kernels over the flat SVDAG / color-block arrays.

Node array layout (uint32 words): ``[header, leaf_count, ref_0 .. ref_k]``
with ``header & 0xFF`` the child mask.  Refs of nodes spanning more than 8
voxels are word offsets into the node array; refs of nodes spanning exactly
8 voxels index the uint64 bitmap array.
"""

import numpy as np
from numba import njit

INF = np.inf
STACK_DEPTH = 96

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(cache=True, nogil=True, inline="always")
def popcount64(v):
    v = np.uint64(v)
    v = v - ((v >> np.uint64(1)) & _M1)
    v = (v & _M2) + ((v >> np.uint64(2)) & _M2)
    v = (v + (v >> np.uint64(4))) & _M4
    return int((v * _H01) >> np.uint64(56))


@njit(cache=True, nogil=True, inline="always")
def popcount8(v):
    v = int(v) & 0xFF
    v = v - ((v >> 1) & 0x55)
    v = (v & 0x33) + ((v >> 2) & 0x33)
    return (v + (v >> 4)) & 0x0F


@njit(cache=True, nogil=True, inline="always")
def bitmap_bit(x, y, z):
    """Bit index of local ``(x, y, z)`` in ``[0, 4)^3``: outer octant * 8 + inner."""
    outer = ((x >> 1) & 1) | (((y >> 1) & 1) << 1) | (((z >> 1) & 1) << 2)
    inner = (x & 1) | ((y & 1) << 1) | ((z & 1) << 2)
    return outer * 8 + inner


@njit(cache=True, nogil=True)
def dag_query(nodes, bitmaps, root, res, x, y, z):
    off = root
    size = res
    while True:
        half = size >> 1
        o = (1 if x & half else 0) | (2 if y & half else 0) | (4 if z & half else 0)
        mask = int(nodes[off]) & 0xFF
        if not (mask >> o) & 1:
            return False
        ref = int(nodes[off + 2 + popcount8(mask & ((1 << o) - 1))])
        if size == 8:
            bm = bitmaps[ref]
            b = bitmap_bit(x & 3, y & 3, z & 3)
            return ((bm >> np.uint64(b)) & np.uint64(1)) != 0
        off = ref
        size = half


@njit(cache=True, nogil=True)
def dag_leaf_rank(nodes, bitmaps, root, res, x, y, z):
    """DFS rank of an occupied voxel, or -1 when it is empty."""
    off = root
    size = res
    rank = 0
    while True:
        half = size >> 1
        o = (1 if x & half else 0) | (2 if y & half else 0) | (4 if z & half else 0)
        mask = int(nodes[off]) & 0xFF
        if not (mask >> o) & 1:
            return -1
        before = popcount8(mask & ((1 << o) - 1))
        for j in range(before):
            ref = int(nodes[off + 2 + j])
            if size == 8:
                rank += popcount64(bitmaps[ref])
            else:
                rank += int(nodes[ref + 1])
        ref = int(nodes[off + 2 + before])
        if size == 8:
            bm = bitmaps[ref]
            b = bitmap_bit(x & 3, y & 3, z & 3)
            if ((bm >> np.uint64(b)) & np.uint64(1)) == 0:
                return -1
            if b == 0:
                return rank
            return rank + popcount64(bm & ((np.uint64(1) << np.uint64(b)) - np.uint64(1)))
        off = ref
        size = half


@njit(cache=True, nogil=True, inline="always")
def _slab1(o, d, inv, lo, hi):
    if d != 0.0:
        a = (lo - o) * inv
        b = (hi - o) * inv
        if a < b:
            return a, b
        return b, a
    # parallel axis: half-open so a ray on a voxel plane belongs to floor(o)
    if lo <= o < hi:
        return -INF, INF
    return INF, -INF


@njit(cache=True, nogil=True, inline="always")
def ray_box(ox, oy, oz, dx, dy, dz, ix, iy, iz, lx, ly, lz, hx, hy, hz):
    """Slab test; returns ``(t_enter, t_exit, entry_axis)``."""
    tnx, tfx = _slab1(ox, dx, ix, lx, hx)
    tny, tfy = _slab1(oy, dy, iy, ly, hy)
    tnz, tfz = _slab1(oz, dz, iz, lz, hz)
    tn = tnx
    axis = 0
    if tny > tn:
        tn = tny
        axis = 1
    if tnz > tn:
        tn = tnz
        axis = 2
    tf = min(tfx, min(tfy, tfz))
    return tn, tf, axis


@njit(cache=True, nogil=True, inline="always")
def inside_normal(dx, dy, dz):
    """Normal code opposing the dominant direction axis."""
    ax = abs(dx)
    ay = abs(dy)
    az = abs(dz)
    if ax >= ay and ax >= az:
        return 1 if dx > 0 else 0
    if ay >= az:
        return 3 if dy > 0 else 2
    return 5 if dz > 0 else 4


@njit(cache=True, nogil=True, inline="always")
def entry_normal(axis, dx, dy, dz):
    d = dx if axis == 0 else (dy if axis == 1 else dz)
    return 2 * axis + (1 if d > 0 else 0)


@njit(cache=True, nogil=True, inline="always")
def _inv(d):
    return 1.0 / d if d != 0.0 else 0.0


@njit(cache=True, nogil=True)
def dag_ray(nodes, bitmaps, root, res, ox, oy, oz, dx, dy, dz, tmin, tmax, stack_i, stack_t, scratch_i, scratch_t):
    """Front-to-back traversal; returns ``(hit, t, vx, vy, vz, normal_code)``.

    Children are visited by ascending entry ``t`` with ties broken by octant
    index, so the first voxel reached is the one with minimal entry.
    """
    ix = _inv(dx)
    iy = _inv(dy)
    iz = _inv(dz)
    fres = float(res)
    tn, tf, _ = ray_box(ox, oy, oz, dx, dy, dz, ix, iy, iz, 0.0, 0.0, 0.0, fres, fres, fres)
    if tn > tf or tf < tmin or tn > tmax:
        return False, 0.0, 0, 0, 0, 0
    sp = 0
    stack_i[0, 0] = 0
    stack_i[0, 1] = root
    stack_i[0, 2] = res
    stack_i[0, 3] = 0
    stack_i[0, 4] = 0
    stack_i[0, 5] = 0
    stack_t[0] = tn
    sp = 1
    while sp > 0:
        sp -= 1
        if stack_t[sp] > tmax:
            continue
        kind = stack_i[sp, 0]
        ref = stack_i[sp, 1]
        size = stack_i[sp, 2]
        lx = stack_i[sp, 3]
        ly = stack_i[sp, 4]
        lz = stack_i[sp, 5]
        half = size >> 1
        n = 0
        if kind == 0:
            mask = int(nodes[ref]) & 0xFF
            rank = 0
            for o in range(8):
                if (mask >> o) & 1:
                    cx = lx + (o & 1) * half
                    cy = ly + ((o >> 1) & 1) * half
                    cz = lz + (o >> 2) * half
                    ctn, ctf, _ = ray_box(ox, oy, oz, dx, dy, dz, ix, iy, iz,
                                          float(cx), float(cy), float(cz),
                                          float(cx + half), float(cy + half), float(cz + half))
                    if ctn <= ctf and ctf >= tmin and ctn <= tmax:
                        j = n
                        while j > 0 and scratch_t[j - 1] > ctn:
                            scratch_t[j] = scratch_t[j - 1]
                            for k in range(4):
                                scratch_i[j, k] = scratch_i[j - 1, k]
                            j -= 1
                        scratch_t[j] = ctn
                        scratch_i[j, 0] = int(nodes[ref + 2 + rank])
                        scratch_i[j, 1] = cx
                        scratch_i[j, 2] = cy
                        scratch_i[j, 3] = cz
                        n += 1
                    rank += 1
            child_kind = 1 if size == 8 else 0
        elif kind == 1:
            bm = bitmaps[ref]
            for o in range(8):
                sub = int((bm >> np.uint64(8 * o)) & np.uint64(0xFF))
                if sub != 0:
                    cx = lx + (o & 1) * half
                    cy = ly + ((o >> 1) & 1) * half
                    cz = lz + (o >> 2) * half
                    ctn, ctf, _ = ray_box(ox, oy, oz, dx, dy, dz, ix, iy, iz,
                                          float(cx), float(cy), float(cz),
                                          float(cx + half), float(cy + half), float(cz + half))
                    if ctn <= ctf and ctf >= tmin and ctn <= tmax:
                        j = n
                        while j > 0 and scratch_t[j - 1] > ctn:
                            scratch_t[j] = scratch_t[j - 1]
                            for k in range(4):
                                scratch_i[j, k] = scratch_i[j - 1, k]
                            j -= 1
                        scratch_t[j] = ctn
                        scratch_i[j, 0] = sub
                        scratch_i[j, 1] = cx
                        scratch_i[j, 2] = cy
                        scratch_i[j, 3] = cz
                        n += 1
            child_kind = 2
        else:
            # 2x2x2 block, ref holds the 8-bit occupancy of its voxels
            best_t = INF
            best_o = -1
            best_axis = 0
            best_tn = 0.0
            for o in range(8):
                if (ref >> o) & 1:
                    cx = lx + (o & 1)
                    cy = ly + ((o >> 1) & 1)
                    cz = lz + (o >> 2)
                    ctn, ctf, cax = ray_box(ox, oy, oz, dx, dy, dz, ix, iy, iz,
                                            float(cx), float(cy), float(cz),
                                            float(cx + 1), float(cy + 1), float(cz + 1))
                    if ctn <= ctf and ctf >= tmin and ctn <= tmax and ctn < best_t:
                        best_t = ctn
                        best_o = o
                        best_axis = cax
                        best_tn = ctn
            if best_o >= 0:
                vx = lx + (best_o & 1)
                vy = ly + ((best_o >> 1) & 1)
                vz = lz + (best_o >> 2)
                if best_tn < tmin:
                    return True, tmin, vx, vy, vz, inside_normal(dx, dy, dz)
                return True, best_tn, vx, vy, vz, entry_normal(best_axis, dx, dy, dz)
            continue
        for j in range(n - 1, -1, -1):
            stack_i[sp, 0] = child_kind
            stack_i[sp, 1] = scratch_i[j, 0]
            stack_i[sp, 2] = half
            stack_i[sp, 3] = scratch_i[j, 1]
            stack_i[sp, 4] = scratch_i[j, 2]
            stack_i[sp, 5] = scratch_i[j, 3]
            stack_t[sp] = scratch_t[j]
            sp += 1
    return False, 0.0, 0, 0, 0, 0


def make_stacks():
    return (
        np.empty((STACK_DEPTH, 6), dtype=np.int64),
        np.empty(STACK_DEPTH, dtype=np.float64),
        np.empty((8, 4), dtype=np.int64),
        np.empty(8, dtype=np.float64),
    )


@njit(cache=True, nogil=True)
def block_search(starts, base, count, rank):
    """Index (relative to ``base``) of the block containing ``rank``."""
    lo = 0
    hi = count - 1
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if starts[base + mid] <= rank:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True, nogil=True, inline="always")
def encode_depth_scalar(t, near, far):
    if t < near:
        t = near
    elif t > far:
        t = far
    return np.uint64(np.floor(16777215.0 * (far - t) / (far - near) + 0.5))


@njit(cache=True, nogil=True, inline="always")
def shade_channel(albedo, factor):
    v = np.floor(albedo * factor + 0.5)
    if v > 255.0:
        v = 255.0
    return np.uint8(v)


@njit(cache=True, nogil=True)
def shade_factor(normal_code, lx, ly, lz):
    axis = normal_code >> 1
    sign = -1.0 if normal_code & 1 else 1.0
    d = lx if axis == 0 else (ly if axis == 1 else lz)
    return 0.25 + 0.75 * max(0.0, sign * d)


@njit(cache=True, nogil=True)
def make_stacks_nb():
    return (
        np.empty((STACK_DEPTH, 6), dtype=np.int64),
        np.empty(STACK_DEPTH, dtype=np.float64),
        np.empty((8, 4), dtype=np.int64),
        np.empty(8, dtype=np.float64),
    )
