"""Streaming + rendering runs along a camera path, with quality and memory metrics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CapacityError, ConfigError
from ..lod import LodPyramid, select_cut
from ..pipeline import Camera, RenderConfig, render_frame
from ..scene import DenseChunk, DenseWorld
from ..streaming import ChunkPool, StreamingParams, snapshot_of
from ..svdag import decode_occupancy, dfs_order
from .oracle import oracle_render
from .ssim import ssim


@dataclass
class FrameRecord:
    index: int
    position: list[float]
    look_at: list[float]
    epoch: int
    cut_size: int
    resident_chunks: int
    resident_bytes: int
    pending_ops: int
    ssim: float | None
    stats: dict
    capacity_error: str | None = None


@dataclass
class RunReport:
    streaming_factor: float
    density: int
    pool_capacity: int
    load_budget: int | None
    culling: str
    ground_truth: str | None
    width: int
    height: int
    frames: list[FrameRecord] = field(default_factory=list)
    total_bundle_bytes: int = 0
    bundle_file_bytes: int | None = None
    max_resident_chunks: int = 0
    max_resident_bytes: int = 0
    memory_ratio: float = 0.0
    mean_ssim: float | None = None
    min_ssim: float | None = None
    errors: list[str] = field(default_factory=list)
    ssim_aggregation: str = "arithmetic mean of per-frame SSIM"
    timings: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("timings")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def timings_json(self) -> str:
        return json.dumps(self.timings, indent=2, sort_keys=True) + "\n"


def decode_world(pyramid: LodPyramid) -> DenseWorld:
    """Dense LOD-0 world reconstructed from the compressed chunks (block colors)."""
    chunks = {}
    for key in sorted(pyramid.lod0_keys):
        rec = pyramid.record(key)
        occ = decode_occupancy(rec.svdag)
        col = np.zeros(occ.shape + (3,), dtype=np.uint8)
        pts = dfs_order(occ)
        col[pts[:, 0], pts[:, 1], pts[:, 2]] = rec.blocks.expand()
        chunks[key] = DenseChunk(occ, col)
    return DenseWorld(pyramid.config, chunks)


class GroundTruth:
    """Reference images: the pipeline with every LOD-0 chunk resident, or the dense oracle."""

    def __init__(self, pyramid: LodPyramid, kind: str, config: RenderConfig, workers: int = 1):
        if kind not in ("lod0", "oracle"):
            raise ConfigError(f"unknown ground truth {kind!r}")
        self.kind = kind
        self.config = config
        self.workers = workers
        if kind == "lod0":
            self.snapshot = snapshot_of([pyramid.record(k) for k in sorted(pyramid.lod0_keys)], pyramid.config)
        else:
            self.arrays = decode_world(pyramid).to_arrays()
            self.voxel_size = pyramid.config.voxel_size
        self._hiz = None

    def render(self, camera: Camera) -> np.ndarray:
        if self.kind == "lod0":
            fr = render_frame(self.snapshot, camera, self.config, self._hiz, workers=self.workers)
            self._hiz = fr.hiz
            return fr.color
        return oracle_render(self.arrays, camera, self.config, self.voxel_size).color


def run_experiment(pyramid: LodPyramid, cameras: list[Camera], params: StreamingParams, config: RenderConfig,
                   ground_truth: str | None = None, workers: int = 1, bundle_file_bytes: int | None = None,
                   frame_sink=None) -> RunReport:
    """Per camera: select_cut, plan, budgeted apply, render (and reference render + SSIM).

    ``frame_sink(index, frame_result)`` receives each rendered frame.  A
    capacity error is recorded in the report and the previous snapshot is
    kept for that step.
    """
    report = RunReport(params.streaming_factor, params.density, params.pool_capacity, params.load_budget,
                       config.culling, ground_truth, config.width, config.height,
                       total_bundle_bytes=pyramid.total_bytes(), bundle_file_bytes=bundle_file_bytes)
    pool = ChunkPool(pyramid, params.pool_capacity)
    gt = GroundTruth(pyramid, ground_truth, config, workers) if ground_truth else None
    prev_hiz = None
    scores = []
    for i, cam in enumerate(cameras):
        cut = select_cut(pyramid, cam.position, params.streaming_factor)
        err = None
        try:
            plan = pool.plan(cut, cam.position)
            snap = pool.apply(plan, params.load_budget)
        except CapacityError as exc:
            err = str(exc)
            report.errors.append(f"frame {i}: {err}")
            snap = pool.snapshot
        fr = render_frame(snap, cam, config, prev_hiz, workers=workers)
        prev_hiz = fr.hiz
        score = None
        if gt is not None:
            score = ssim(fr.color, gt.render(cam))
            scores.append(score)
        held = pool.resident_bytes
        report.frames.append(FrameRecord(
            i, list(cam.position), list(cam.look_at), snap.epoch, len(cut), len(snap), held,
            len(pool.pending), score, fr.stats.to_dict(timings=False), err))
        report.timings.append(dict(fr.stats.timings))
        report.max_resident_chunks = max(report.max_resident_chunks, pool.occupied_slots)
        report.max_resident_bytes = max(report.max_resident_bytes, held)
        if frame_sink is not None:
            frame_sink(i, fr)
    if report.total_bundle_bytes:
        report.memory_ratio = round(report.max_resident_bytes / report.total_bundle_bytes, 3)
    if scores:
        report.mean_ssim = float(np.mean(scores))
        report.min_ssim = float(np.min(scores))
    return report


def write_report(report: RunReport, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rp, tp = out / "report.json", out / "timings.json"
    rp.write_text(report.to_json())
    tp.write_text(report.timings_json())
    return rp, tp


def default_far(pyramid_or_config) -> float:
    cfg = getattr(pyramid_or_config, "config", pyramid_or_config)
    return float(2.0 * np.linalg.norm(cfg.world_extent())) + 1.0


__all__ = ["FrameRecord", "GroundTruth", "RunReport", "decode_world", "default_far", "run_experiment",
           "write_report"]
