"""The individual render passes: chunk selection, tile selection, ray march, resolve."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .. import _kernels as K
from ..errors import ConsistencyError
from .camera import TILE, Camera, RenderConfig
from .encoding import DEPTH_MAX, EXTERNAL_NORMAL, encode_depth
from .hiz import HiZPyramid
from .packing import PackedScene


# -- chunk selection ---------------------------------------------------------

def frustum_planes(camera: Camera, config: RenderConfig) -> tuple[np.ndarray, np.ndarray]:
    """Six inward planes ``n . p >= d`` bounding every primary ray segment in ``[near, far]``."""
    cam = camera.origin
    ax, ay = camera._screen(config)
    sx = np.array([[-ax, ax], [-ax, ax]])
    sy = np.array([[ay, ay], [-ay, -ay]])
    c = camera._dirs(sx, sy)
    tl, tr, bl, br = c[0, 0], c[0, 1], c[1, 0], c[1, 1]
    f = camera.basis()[0]
    normals, offsets = [], []
    for a, b in ((tl, tr), (tr, br), (br, bl), (bl, tl)):
        n = np.cross(a, b)
        if n @ f < 0:
            n = -n
        normals.append(n)
        offsets.append(n @ cam)
    cos_min = float(min(f @ v for v in (tl, tr, bl, br)))
    normals.append(f)
    offsets.append(f @ cam + config.near * cos_min)
    normals.append(-f)
    offsets.append(-(f @ cam + config.far))
    return np.array(normals), np.array(offsets)


def chunk_selection(packed: PackedScene, camera: Camera, config: RenderConfig) -> np.ndarray:
    """Resident slots whose occupied AABB touches the view frustum."""
    slots = packed.visible_slots()
    if len(slots) == 0:
        return slots
    n, d = frustum_planes(camera, config)
    lo, hi = packed.world_lo[slots], packed.world_hi[slots]
    pv = np.where(n[None, :, :] > 0, hi[:, None, :], lo[:, None, :])  # (C, 6, 3)
    score = np.einsum("cpk,pk->cp", pv, n) - d[None, :]
    tol = 1e-9 * (1.0 + np.abs(d))[None, :]
    return slots[np.all(score >= -tol, axis=1)]


# -- tile selection ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TilePairs:
    tx: np.ndarray          # int32
    ty: np.ndarray          # int32
    slot: np.ndarray        # int32
    depth: np.ndarray       # int64 conservative (largest possible) encoded depth
    never_cull: np.ndarray  # bool
    phase: int = 1

    def __len__(self):
        return len(self.slot)

    @classmethod
    def empty(cls, phase: int = 1) -> "TilePairs":
        z = np.zeros(0, dtype=np.int32)
        return cls(z, z, z, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool), phase)

    def take(self, idx, phase: int | None = None) -> "TilePairs":
        return TilePairs(self.tx[idx], self.ty[idx], self.slot[idx], self.depth[idx],
                         self.never_cull[idx], self.phase if phase is None else phase)


def tile_planes(camera: Camera, config: RenderConfig) -> np.ndarray:
    """Inward side-plane normals of every tile's corner-ray frustum, ``(ty, tx, 4, 3)``."""
    e = camera.edge_rays(config, TILE)
    tl, tr = e[:-1, :-1], e[:-1, 1:]
    bl, br = e[1:, :-1], e[1:, 1:]
    center = tl + tr + bl + br
    planes = np.stack([np.cross(tl, tr), np.cross(tr, br), np.cross(br, bl), np.cross(bl, tl)], axis=2)
    flip = np.einsum("yxpk,yxk->yxp", planes, center) < 0
    planes[flip] *= -1.0
    return np.ascontiguousarray(planes)


@njit(cache=True, nogil=True)
def _pairs_kernel(planes, slots, lo, hi, cx, cy, cz, write, out_tx, out_ty, out_slot):
    ty_n, tx_n = planes.shape[0], planes.shape[1]
    n = 0
    for ty in range(ty_n):
        for tx in range(tx_n):
            for i in range(slots.shape[0]):
                s = slots[i]
                ok = True
                for p in range(4):
                    nx = planes[ty, tx, p, 0]
                    ny = planes[ty, tx, p, 1]
                    nz = planes[ty, tx, p, 2]
                    px = (hi[s, 0] if nx > 0 else lo[s, 0]) - cx
                    py = (hi[s, 1] if ny > 0 else lo[s, 1]) - cy
                    pz = (hi[s, 2] if nz > 0 else lo[s, 2]) - cz
                    v = nx * px + ny * py + nz * pz
                    if v < -1e-9 * (abs(px) + abs(py) + abs(pz) + 1.0):
                        ok = False
                        break
                if ok:
                    if write:
                        out_tx[n] = tx
                        out_ty[n] = ty
                        out_slot[n] = s
                    n += 1
    return n


def _aabb_distance(cam: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    gap = np.maximum(np.maximum(lo - cam, cam - hi), 0.0)
    return np.linalg.norm(gap, axis=-1)


def self_slots(packed: PackedScene, camera: Camera) -> np.ndarray:
    """Slots whose chunk region contains the camera."""
    cam = camera.origin
    inside = np.all((packed.region_lo <= cam) & (cam < packed.region_hi), axis=1) & packed.valid
    return np.flatnonzero(inside)


def _sample_self_depth(packed: PackedScene, slot: int, camera: Camera, config: RenderConfig,
                       edge: np.ndarray, centers: np.ndarray, tx: int, ty: int) -> int:
    """Max encoded SVDAG hit over 4 corner rays + the center ray; -1 if any sample misses."""
    cam = camera.origin
    inv = 1.0 / packed.voxel_size[slot]
    o = (cam - packed.origin[slot]) * inv
    nodes = packed.nodes[packed.node_base[slot]:packed.node_base[slot + 1]]
    bms = packed.bitmaps[packed.bm_base[slot]:packed.bm_base[slot + 1]]
    stacks = K.make_stacks()
    best = -1
    for d in (edge[ty, tx], edge[ty, tx + 1], edge[ty + 1, tx], edge[ty + 1, tx + 1], centers[ty, tx]):
        dl = d * inv
        hit, t, *_ = K.dag_ray(nodes, bms, 0, int(packed.res[slot]), o[0], o[1], o[2], dl[0], dl[1], dl[2],
                               config.near, config.far, *stacks)
        if not hit:
            return -1
        best = max(best, encode_depth(t, config.near, config.far))
    return best


def tile_selection(visible: np.ndarray, packed: PackedScene, camera: Camera, config: RenderConfig,
                   hiz: HiZPyramid | None, mode: str | None = None, phase: int = 1,
                   candidates: TilePairs | None = None) -> tuple[TilePairs, TilePairs]:
    """Split tile/chunk pairs into ``(accepted, culled)``.

    Phase 1 builds pairs from the visible slots; phase 2 re-tests only
    ``candidates`` (the phase-1 culled pairs).  A pair is culled when no hit
    it can produce could beat the farthest depth of its tile, i.e. when its
    conservative depth is strictly below the tile's Hi-Z min.
    """
    mode = mode or config.culling
    if candidates is None:
        pairs = build_pairs(visible, packed, camera, config, mode)
    else:
        pairs = candidates
    if len(pairs) == 0:
        return TilePairs.empty(phase), TilePairs.empty(phase)
    if hiz is None or mode == "none":
        return pairs.take(slice(None), phase), TilePairs.empty(phase)
    tile_min = hiz.tile_min().astype(np.int64)
    culled = ~pairs.never_cull & (pairs.depth < tile_min[pairs.ty, pairs.tx])
    return pairs.take(~culled, phase), pairs.take(culled, phase)


def build_pairs(visible: np.ndarray, packed: PackedScene, camera: Camera, config: RenderConfig,
                mode: str = "sound") -> TilePairs:
    """Every (tile, slot) whose tile frustum meets the slot's AABB, tile-major order."""
    slots = np.ascontiguousarray(np.asarray(visible, dtype=np.int64))
    if len(slots) == 0:
        return TilePairs.empty()
    planes = tile_planes(camera, config)
    cam = camera.origin
    dummy = np.zeros(0, dtype=np.int32)
    n = _pairs_kernel(planes, slots, packed.world_lo, packed.world_hi, cam[0], cam[1], cam[2],
                      False, dummy, dummy, dummy)
    tx = np.empty(n, dtype=np.int32)
    ty = np.empty(n, dtype=np.int32)
    sl = np.empty(n, dtype=np.int32)
    _pairs_kernel(planes, slots, packed.world_lo, packed.world_hi, cam[0], cam[1], cam[2], True, tx, ty, sl)
    dist = _aabb_distance(cam, packed.world_lo[sl], packed.world_hi[sl])
    depth = np.asarray(encode_depth(dist, config.near, config.far), dtype=np.int64).reshape(-1)
    never = np.zeros(n, dtype=bool)
    selfs = self_slots(packed, camera)
    if len(selfs):
        is_self = np.isin(sl, selfs)
        if mode == "paper":
            edge = camera.edge_rays(config, TILE)
            centers = camera._dirs(*np.meshgrid(
                (2.0 * (np.arange(config.tiles[0]) * TILE + TILE / 2) / config.width - 1.0) * camera._screen(config)[0],
                (1.0 - 2.0 * (np.arange(config.tiles[1]) * TILE + TILE / 2) / config.height) * camera._screen(config)[1],
            ))
            for i in np.flatnonzero(is_self):
                e = _sample_self_depth(packed, int(sl[i]), camera, config, edge, centers, int(tx[i]), int(ty[i]))
                if e < 0:
                    never[i] = True
                else:
                    depth[i] = e
        else:
            never |= is_self
    return TilePairs(tx, ty, sl, depth, never)


# -- ray march ---------------------------------------------------------------

@njit(cache=True, nogil=True)
def _march_kernel(order, ptx, pty, pslot, dirs, cx, cy, cz, near, far,
                  node_base, bm_base, res, origin, vsize, alo, ahi, nodes, bitmaps,
                  visbuf, hits):
    si, st, xi, xt = K.make_stacks_nb()
    scale = (far - near) / 16777215.0
    for q in range(order.shape[0]):
        idx = order[q]
        s = pslot[idx]
        nd = nodes[node_base[s]:node_base[s + 1]]
        bm = bitmaps[bm_base[s]:bm_base[s + 1]]
        inv = 1.0 / vsize[s]
        ox = (cx - origin[s, 0]) * inv
        oy = (cy - origin[s, 1]) * inv
        oz = (cz - origin[s, 2]) * inv
        r = res[s]
        x0 = ptx[idx] * 8
        y0 = pty[idx] * 8
        count = 0
        for py in range(y0, y0 + 8):
            for px in range(x0, x0 + 8):
                dx = dirs[py, px, 0] * inv
                dy = dirs[py, px, 1] * inv
                dz = dirs[py, px, 2] * inv
                cur = visbuf[py, px]
                e = int(cur >> np.uint64(40))
                tlim = far
                if e > 0:
                    tlim = far - (e - 1) * scale
                tn, tf, _ = K.ray_box(ox, oy, oz, dx, dy, dz, K._inv(dx), K._inv(dy), K._inv(dz),
                                      alo[s, 0], alo[s, 1], alo[s, 2], ahi[s, 0], ahi[s, 1], ahi[s, 2])
                if tn > tf or tf < near or tn > tlim:
                    continue
                hit, t, vx, vy, vz, nc = K.dag_ray(nd, bm, 0, r, ox, oy, oz, dx, dy, dz,
                                                   near, min(tlim, tf), si, st, xi, xt)
                if hit:
                    count += 1
                    w = (K.encode_depth_scalar(t, near, far) << np.uint64(40)) | (np.uint64(nc) << np.uint64(37)) \
                        | (np.uint64(s) << np.uint64(24)) | (np.uint64(vx) << np.uint64(16)) \
                        | (np.uint64(vy) << np.uint64(8)) | np.uint64(vz)
                    if w > cur:
                        visbuf[py, px] = w
        hits[idx] += count


def ray_march(pairs: TilePairs, packed: PackedScene, visbuf: np.ndarray, camera: Camera,
              config: RenderConfig, dirs: np.ndarray | None = None, workers: int = 1,
              order: np.ndarray | None = None) -> np.ndarray:
    """March every pixel of every pair's tile into ``visbuf`` (max-combine, in place).

    Returns per-pair hit counts.  ``order`` permutes pair processing; with
    ``workers > 1`` the tiles are split into disjoint sets, one per thread.
    """
    hits = np.zeros(len(pairs), dtype=np.int64)
    if len(pairs) == 0:
        return hits
    if dirs is None:
        dirs = camera.pixel_rays(config)
    cam = camera.origin
    order = np.arange(len(pairs), dtype=np.int64) if order is None else np.asarray(order, dtype=np.int64)
    args = (pairs.tx, pairs.ty, pairs.slot, dirs, cam[0], cam[1], cam[2], float(config.near), float(config.far),
            packed.node_base, packed.bm_base, packed.res, packed.origin, packed.voxel_size,
            packed.aabb_lo, packed.aabb_hi, packed.nodes, packed.bitmaps, visbuf, hits)
    if workers <= 1:
        _march_kernel(order, *args)
        return hits
    tiles_x = config.tiles[0]
    tile_id = pairs.ty[order].astype(np.int64) * tiles_x + pairs.tx[order]
    parts = [order[tile_id % workers == w] for w in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(lambda part: _march_kernel(part, *args), [p for p in parts if len(p)]))
    return hits


# -- color resolve -----------------------------------------------------------

@njit(cache=True, nogil=True)
def _resolve_kernel(visbuf, node_base, bm_base, res, block_base, nodes, bitmaps, starts, colors,
                    lx, ly, lz, bg, seed_color, out, depth):
    h, w = visbuf.shape
    for py in range(h):
        for px in range(w):
            word = visbuf[py, px]
            depth[py, px] = np.uint32(word >> np.uint64(40))
            if word == 0:
                for c in range(3):
                    out[py, px, c] = bg[c]
                continue
            nc = int((word >> np.uint64(37)) & np.uint64(7))
            if nc == 7:
                for c in range(3):
                    out[py, px, c] = seed_color[py, px, c]
                continue
            s = int((word >> np.uint64(24)) & np.uint64(0x1FFF))
            vx = int((word >> np.uint64(16)) & np.uint64(0xFF))
            vy = int((word >> np.uint64(8)) & np.uint64(0xFF))
            vz = int(word & np.uint64(0xFF))
            if s + 1 >= node_base.shape[0]:
                return py * w + px
            rank = K.dag_leaf_rank(nodes[node_base[s]:node_base[s + 1]], bitmaps[bm_base[s]:bm_base[s + 1]],
                                   0, res[s], vx, vy, vz)
            if rank < 0:
                return py * w + px
            b0 = block_base[s]
            bi = K.block_search(starts, b0, block_base[s + 1] - b0, rank)
            f = K.shade_factor(nc, lx, ly, lz)
            for c in range(3):
                out[py, px, c] = K.shade_channel(float(colors[b0 + bi, c]), f)
    return -1


def color_resolve(visbuf: np.ndarray, packed: PackedScene, config: RenderConfig,
                  seed_color: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Shade every pixel from its visibility word; returns ``(rgb uint8, depth uint32)``."""
    h, w = visbuf.shape
    out = np.empty((h, w, 3), dtype=np.uint8)
    depth = np.empty((h, w), dtype=np.uint32)
    bg = np.array(config.background, dtype=np.uint8)
    if seed_color is None:
        seed_color = np.broadcast_to(bg, (h, w, 3))
    seed_color = np.ascontiguousarray(seed_color, dtype=np.uint8)
    nb = packed.node_base if packed.n_slots else np.zeros(1, dtype=np.int64)
    bb = packed.bm_base if packed.n_slots else np.zeros(1, dtype=np.int64)
    kb = packed.block_base if packed.n_slots else np.zeros(1, dtype=np.int64)
    res = packed.res if packed.n_slots else np.zeros(1, dtype=np.int64)
    lx, ly, lz = config.light_dir
    bad = _resolve_kernel(visbuf, nb, bb, res, kb, packed.nodes, packed.bitmaps, packed.block_starts,
                          packed.block_colors, lx, ly, lz, bg, seed_color, out, depth)
    if bad >= 0:
        raise ConsistencyError(f"pixel {divmod(bad, w)[::-1]} references an unoccupied voxel")
    return out, depth


def shade(albedo: np.ndarray, normal_code: np.ndarray, light_dir) -> np.ndarray:
    """Vectorised twin of the resolve shading (used by the oracle)."""
    n = np.asarray(normal_code, dtype=np.int64)
    axis = n >> 1
    sign = np.where(n & 1, -1.0, 1.0)
    l = np.asarray(light_dir, dtype=np.float64)
    factor = 0.25 + 0.75 * np.maximum(0.0, sign * l[axis])
    v = np.floor(np.asarray(albedo, dtype=np.float64) * factor[..., None] + 0.5)
    return np.minimum(v, 255.0).astype(np.uint8)


__all__ = [
    "DEPTH_MAX", "EXTERNAL_NORMAL", "TilePairs", "build_pairs", "chunk_selection", "color_resolve",
    "frustum_planes", "ray_march", "self_slots", "shade", "tile_planes", "tile_selection",
]
