"""Brute-force reference renderer: a 3D grid march over the global LOD-0 voxels.

No octree, no culling, no LOD.  Each primary ray walks voxel by voxel
(Amanatides & Woo) from its ``near`` point until it enters an occupied voxel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .. import _kernels as K
from ..pipeline.camera import Camera, RenderConfig
from ..pipeline.encoding import DEPTH_MAX
from ..pipeline.passes import shade
from ..scene import DenseWorld

TIE_EPS = 1e-6
DEPTH_MAX_F = float(DEPTH_MAX)
TIE_EPS_F = TIE_EPS


@dataclass(frozen=True, eq=False)
class OracleImage:
    hit: np.ndarray     # bool (H, W)
    voxel: np.ndarray   # int64 (H, W, 3) global LOD-0 voxel, -1 where no hit
    t: np.ndarray       # float64 (H, W)
    normal: np.ndarray  # int8 (H, W), -1 where no hit
    tie: np.ndarray     # bool (H, W): minimal entry not unique at the buffer's precision
    color: np.ndarray   # uint8 (H, W, 3)


@njit(cache=True, nogil=True, inline="always")
def _near_int(v, eps):
    return abs(v - np.floor(v + 0.5)) < eps


@njit(cache=True, nogil=True)
def _walk(occ, ox, oy, oz, dx, dy, dz, t0, t1, axis0, start_inside):
    """Voxel march from ``t0``; returns ``(hit, t, vx, vy, vz, axis)`` of the first occupied cell."""
    nx, ny, nz = occ.shape
    px = ox + t0 * dx
    py = oy + t0 * dy
    pz = oz + t0 * dz
    vx = min(max(int(np.floor(px)), 0), nx - 1)
    vy = min(max(int(np.floor(py)), 0), ny - 1)
    vz = min(max(int(np.floor(pz)), 0), nz - 1)
    if not start_inside:
        # snap the entered face to avoid rounding onto the wrong side
        if axis0 == 0:
            vx = 0 if dx > 0 else nx - 1
        elif axis0 == 1:
            vy = 0 if dy > 0 else ny - 1
        else:
            vz = 0 if dz > 0 else nz - 1
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    sz = 1 if dz > 0 else -1
    tmx = ((vx + (sx > 0)) - ox) / dx if dx != 0.0 else np.inf
    tmy = ((vy + (sy > 0)) - oy) / dy if dy != 0.0 else np.inf
    tmz = ((vz + (sz > 0)) - oz) / dz if dz != 0.0 else np.inf
    tdx = abs(1.0 / dx) if dx != 0.0 else np.inf
    tdy = abs(1.0 / dy) if dy != 0.0 else np.inf
    tdz = abs(1.0 / dz) if dz != 0.0 else np.inf
    t = t0
    axis = axis0
    while True:
        if occ[vx, vy, vz]:
            return True, t, vx, vy, vz, axis
        if tmx <= tmy and tmx <= tmz:
            t = tmx
            vx += sx
            tmx += tdx
            axis = 0
            if vx < 0 or vx >= nx:
                break
        elif tmy <= tmz:
            t = tmy
            vy += sy
            tmy += tdy
            axis = 1
            if vy < 0 or vy >= ny:
                break
        else:
            t = tmz
            vz += sz
            tmz += tdz
            axis = 2
            if vz < 0 or vz >= nz:
                break
        if t > t1:
            break
    return False, 0.0, 0, 0, 0, 0


@njit(cache=True, nogil=True)
def _oracle_kernel(occ, dirs, cx, cy, cz, vs, near, far, out_hit, out_vox, out_t, out_n, out_tie):
    h, w = dirs.shape[0], dirs.shape[1]
    nx, ny, nz = occ.shape
    inv = 1.0 / vs
    ox, oy, oz = cx * inv, cy * inv, cz * inv
    bucket = (far - near) / DEPTH_MAX_F
    for py in range(h):
        for px in range(w):
            out_hit[py, px] = False
            out_tie[py, px] = False
            out_n[py, px] = -1
            out_t[py, px] = np.inf
            for c in range(3):
                out_vox[py, px, c] = -1
            dx = dirs[py, px, 0] * inv
            dy = dirs[py, px, 1] * inv
            dz = dirs[py, px, 2] * inv
            tn, tf, axis = K.ray_box(ox, oy, oz, dx, dy, dz, K._inv(dx), K._inv(dy), K._inv(dz),
                                     0.0, 0.0, 0.0, float(nx), float(ny), float(nz))
            if tn > tf or tf < near or tn > far:
                continue
            inside = tn < near
            t0 = near if inside else tn
            hit, t, vx, vy, vz, ax = _walk(occ, ox, oy, oz, dx, dy, dz, t0, min(tf, far), axis, inside)
            if not hit or t > far:
                continue
            out_hit[py, px] = True
            out_t[py, px] = t
            out_vox[py, px, 0] = vx
            out_vox[py, px, 1] = vy
            out_vox[py, px, 2] = vz
            if inside and t == t0:
                out_n[py, px] = K.inside_normal(dx, dy, dz)
            else:
                out_n[py, px] = K.entry_normal(ax, dx, dy, dz)
            # ambiguity: entry point on a voxel edge/corner, or a second voxel
            # entered within one depth bucket of the first
            qx, qy, qz = ox + t * dx, oy + t * dy, oz + t * dz
            eps = TIE_EPS_F * (1.0 + abs(qx) + abs(qy) + abs(qz))
            on = int(_near_int(qx, eps)) + int(_near_int(qy, eps)) + int(_near_int(qz, eps))
            tie = on >= 2 or (inside and on >= 1)
            if not tie:
                h2, t2, _, _, _, _ = _walk_after(occ, ox, oy, oz, dx, dy, dz, vx, vy, vz, t, t + 2.0 * bucket)
                tie = h2
            out_tie[py, px] = tie


@njit(cache=True, nogil=True)
def _walk_after(occ, ox, oy, oz, dx, dy, dz, vx, vy, vz, t_hit, t1):
    """Is another occupied voxel entered in ``(t_hit, t1]`` after leaving ``(vx, vy, vz)``?"""
    nx, ny, nz = occ.shape
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    sz = 1 if dz > 0 else -1
    tmx = ((vx + (sx > 0)) - ox) / dx if dx != 0.0 else np.inf
    tmy = ((vy + (sy > 0)) - oy) / dy if dy != 0.0 else np.inf
    tmz = ((vz + (sz > 0)) - oz) / dz if dz != 0.0 else np.inf
    tdx = abs(1.0 / dx) if dx != 0.0 else np.inf
    tdy = abs(1.0 / dy) if dy != 0.0 else np.inf
    tdz = abs(1.0 / dz) if dz != 0.0 else np.inf
    while True:
        if tmx <= tmy and tmx <= tmz:
            t = tmx
            vx += sx
            tmx += tdx
        elif tmy <= tmz:
            t = tmy
            vy += sy
            tmy += tdy
        else:
            t = tmz
            vz += sz
            tmz += tdz
        if t > t1 or vx < 0 or vy < 0 or vz < 0 or vx >= nx or vy >= ny or vz >= nz:
            return False, t, 0, 0, 0, 0
        if occ[vx, vy, vz]:
            return True, t, vx, vy, vz, 0



def oracle_render(world: DenseWorld | tuple[np.ndarray, np.ndarray], camera: Camera, config: RenderConfig,
                  voxel_size: float | None = None) -> OracleImage:
    """Render ``world`` (or global ``(occupancy, color)`` arrays) by plain grid marching."""
    if isinstance(world, DenseWorld):
        occ, col = world.to_arrays()
        vs = world.config.voxel_size
    else:
        occ, col = world
        vs = 1.0 if voxel_size is None else voxel_size
    occ = np.ascontiguousarray(occ, dtype=np.bool_)
    h, w = config.height, config.width
    hit = np.empty((h, w), dtype=np.bool_)
    vox = np.empty((h, w, 3), dtype=np.int64)
    t = np.empty((h, w), dtype=np.float64)
    nrm = np.empty((h, w), dtype=np.int8)
    tie = np.empty((h, w), dtype=np.bool_)
    cam = camera.origin
    _oracle_kernel(occ, camera.pixel_rays(config), cam[0], cam[1], cam[2], float(vs),
                   float(config.near), float(config.far), hit, vox, t, nrm, tie)
    color = np.empty((h, w, 3), dtype=np.uint8)
    color[:] = np.array(config.background, dtype=np.uint8)
    if hit.any():
        v = vox[hit]
        albedo = col[v[:, 0], v[:, 1], v[:, 2]]
        color[hit] = shade(albedo, nrm[hit], config.light_dir)
    return OracleImage(hit, vox, t, nrm, tie, color)


def pipeline_voxels(visbuf: np.ndarray, snapshot) -> tuple[np.ndarray, np.ndarray]:
    """Global LOD-0 voxel of every pipeline pixel (``(hit mask, (H, W, 3) coords)``).

    Only meaningful when every resident chunk is at LOD 0.
    """
    w = np.asarray(visbuf, dtype=np.uint64)
    hit = (w != 0) & (((w >> np.uint64(37)) & np.uint64(7)) != 7)
    slot = ((w >> np.uint64(24)) & np.uint64(0x1FFF)).astype(np.int64)
    local = np.stack([((w >> np.uint64(s)) & np.uint64(0xFF)).astype(np.int64) for s in (16, 8, 0)], axis=-1)
    out = np.full(local.shape, -1, dtype=np.int64)
    if snapshot.config is None or not hit.any():
        return hit, out
    r = snapshot.config.chunk_res
    base = np.zeros((max(snapshot.slots, default=-1) + 1, 3), dtype=np.int64)
    for s, c in snapshot.slots.items():
        base[s] = np.array(c.key.coords) * r
    out[hit] = base[slot[hit]] + local[hit]
    return hit, out
