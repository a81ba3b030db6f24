"""Oracle-equivalence and invariant checks over a world and its pyramid."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..lod import LodPyramid, build_pyramid, cut_violations, select_cut
from ..pipeline import Camera, RenderConfig, render_frame
from ..scene import DenseWorld, chunkify
from ..streaming import snapshot_of
from ..svdag import decode_occupancy, dfs_order
from .camera_path import random_path
from .experiment import default_far
from .oracle import oracle_render, pipeline_voxels


@dataclass
class Check:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail}"


def oracle_agreement(world: DenseWorld, pyramid: LodPyramid, camera: Camera, config: RenderConfig,
                     snapshot=None) -> dict:
    """Pixel-level voxel-identity comparison of the LOD-0 pipeline against the oracle."""
    if snapshot is None:
        snapshot = snapshot_of([pyramid.record(k) for k in sorted(pyramid.lod0_keys)], pyramid.config)
    fr = render_frame(snapshot, camera, config)
    ref = oracle_render(world, camera, config)
    hit, vox = pipeline_voxels(fr.visbuf, snapshot)
    same = (hit == ref.hit) & np.all(np.where(hit[..., None], vox == ref.voxel, True), axis=-1)
    n = same.size
    clean = ~ref.tie
    return {
        "pixels": n,
        "agree": int(same.sum()),
        "ties": int(ref.tie.sum()),
        "agree_fraction": float(same.mean()),
        "agree_fraction_no_ties": float(same[clean].mean()) if clean.any() else 1.0,
        "frame": fr,
        "oracle": ref,
    }


def validate_world(world: DenseWorld, pyramid: LodPyramid | None = None, cameras: int = 5, seed: int = 42,
                   config: RenderConfig | None = None) -> list[Check]:
    cfg = world.config
    if pyramid is None:
        pyramid = build_pyramid(chunkify(world), cfg)
    if config is None:
        config = RenderConfig(128, 128, far=default_far(cfg))
    checks = []

    # geometry: decoded occupancy equals the dense source, chunk by chunk
    bad = [k for k in pyramid.lod0_keys
           if not np.array_equal(decode_occupancy(pyramid.record(k).svdag), world.chunks[k].occupancy)]
    missing = set(world.chunks) ^ set(pyramid.lod0_keys)
    checks.append(Check("svdag occupancy", not bad and not missing,
                        f"{len(pyramid.lod0_keys)} chunks, {len(bad)} mismatched, {len(missing)} missing"))

    # colors: block tiling and DFS order length
    tiling = []
    for key in pyramid.infos:
        rec = pyramid.record(key)
        b = rec.blocks
        ok = len(b) > 0 and b.starts[0] == 0 and np.array_equal(b.starts[1:], (b.starts + b.lengths)[:-1]) \
            and b.n == rec.svdag.leaf_count
        if not ok:
            tiling.append(key)
    checks.append(Check("color block tiling", not tiling, f"{len(pyramid.infos)} chunks, {len(tiling)} broken"))

    # color values at LOD 0 stay within the merge drift of the dense colors (reported)
    err = 0
    for key in sorted(pyramid.lod0_keys):
        rec = pyramid.record(key)
        pts = dfs_order(world.chunks[key].occupancy)
        ref = world.chunks[key].color[pts[:, 0], pts[:, 1], pts[:, 2]].astype(int)
        err = max(err, int(np.abs(rec.blocks.expand().astype(int) - ref).max()))
    checks.append(Check("color reconstruction", True, f"max channel error {err}/255 (reported, not asserted)"))

    # cut validity for seeded cameras
    rng = np.random.default_rng(seed)
    ext = cfg.world_extent()
    bad_cuts = 0
    for _ in range(20):
        cam = rng.uniform(-0.25, 1.25, 3) * ext
        if cut_violations(pyramid, select_cut(pyramid, cam, 2.0)):
            bad_cuts += 1
    checks.append(Check("select_cut partition", bad_cuts == 0, f"20 cameras, {bad_cuts} invalid cuts"))

    # oracle equivalence and culling soundness
    path = random_path(cfg, cameras, seed).sample()
    snapshot = snapshot_of([pyramid.record(k) for k in sorted(pyramid.lod0_keys)], cfg)
    worst, worst_clean, sound = 1.0, 1.0, True
    for cam in path:
        res = oracle_agreement(world, pyramid, cam, config, snapshot)
        worst = min(worst, res["agree_fraction"])
        worst_clean = min(worst_clean, res["agree_fraction_no_ties"])
        other = render_frame(snapshot, cam, replace(config, culling="none"))
        fr = res["frame"]
        sound &= np.array_equal(other.color, fr.color) and np.array_equal(other.depth, fr.depth)
    checks.append(Check("oracle equivalence", worst >= 0.999 and worst_clean == 1.0,
                        f"{cameras} cameras, worst agreement {worst:.5f}, excluding ties {worst_clean:.5f}"))
    checks.append(Check("culling soundness", bool(sound), f"{cameras} cameras, none vs {config.culling}"))
    return checks
