"""One frame through the whole pass graph."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError
from .camera import Camera, RenderConfig
from .encoding import EXTERNAL_NORMAL
from .hiz import HiZPyramid, build_hiz
from .passes import chunk_selection, color_resolve, ray_march, tile_selection


@dataclass
class FrameStats:
    epoch: int = 0
    resident_chunks: int = 0
    resident_bytes: int = 0
    visible_chunks: int = 0
    pairs_phase1: int = 0
    culled_phase1: int = 0
    pairs_phase2: int = 0
    culled_final: int = 0
    hits_phase1: int = 0
    hits_phase2: int = 0
    covered_pixels: int = 0
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("timings")
        return d


@dataclass(eq=False)
class FrameResult:
    color: np.ndarray    # (H, W, 3) uint8
    depth: np.ndarray    # (H, W) uint32, 24-bit encoded depth
    hiz: HiZPyramid
    visbuf: np.ndarray   # (H, W) uint64
    stats: FrameStats


class _Timer:
    def __init__(self, sink: dict):
        self.sink = sink

    def __call__(self, name):
        self.name = name
        return self

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.name] = self.sink.get(self.name, 0.0) + time.perf_counter() - self.t0


def seed_visbuf(config: RenderConfig, seed_depth: np.ndarray | None) -> np.ndarray:
    vb = np.zeros((config.height, config.width), dtype=np.uint64)
    if seed_depth is not None:
        sd = np.asarray(seed_depth, dtype=np.uint64)
        if sd.shape != vb.shape:
            raise ConfigError(f"seed depth shape {sd.shape} != frame {vb.shape}")
        if np.any(sd >> np.uint64(24)):
            raise ConfigError("seed depth values must fit 24 bits")
        vb = np.where(sd > 0, (sd << np.uint64(40)) | np.uint64(EXTERNAL_NORMAL << 37), vb).astype(np.uint64)
    return vb


def render_frame(snapshot, camera: Camera, config: RenderConfig, prev_hiz: HiZPyramid | None = None,
                 *, workers: int = 1, seed_depth: np.ndarray | None = None,
                 seed_color: np.ndarray | None = None, frustum_cull: bool = True) -> FrameResult:
    """chunk selection, tile selection, march, Hi-Z, reselection, march, resolve."""
    stats = FrameStats(epoch=snapshot.epoch, resident_chunks=len(snapshot), resident_bytes=snapshot.resident_bytes)
    timer = _Timer(stats.timings)
    packed = snapshot.packed
    dirs = camera.pixel_rays(config)
    visbuf = seed_visbuf(config, seed_depth)

    with timer("chunk_selection"):
        visible = chunk_selection(packed, camera, config) if frustum_cull else packed.visible_slots()
    stats.visible_chunks = int(len(visible))

    with timer("tile_selection_1"):
        acc1, cul1 = tile_selection(visible, packed, camera, config, prev_hiz, phase=1)
    stats.pairs_phase1 = len(acc1)
    stats.culled_phase1 = len(cul1)

    with timer("ray_march_1"):
        stats.hits_phase1 = int(ray_march(acc1, packed, visbuf, camera, config, dirs, workers).sum())

    with timer("build_hiz"):
        hiz = build_hiz((visbuf >> np.uint64(40)).astype(np.uint32))

    with timer("tile_selection_2"):
        acc2, cul2 = tile_selection(visible, packed, camera, config, hiz, phase=2, candidates=cul1)
    stats.pairs_phase2 = len(acc2)
    stats.culled_final = len(cul2)

    with timer("ray_march_2"):
        stats.hits_phase2 = int(ray_march(acc2, packed, visbuf, camera, config, dirs, workers).sum())

    with timer("color_resolve"):
        color, depth = color_resolve(visbuf, packed, config, seed_color)
        final_hiz = build_hiz(depth)
    stats.covered_pixels = int(np.count_nonzero(visbuf))
    return FrameResult(color, depth, final_hiz, visbuf, stats)
