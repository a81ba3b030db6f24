"""Command line entry point: ``voxdag {build,render,bench,validate,stats}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import VoxdagError
from ..lod import build_pyramid
from ..pipeline import RenderConfig, render_frame
from ..scene import SceneSpec, WorldConfig, chunkify, generate
from ..streaming import StreamingParams, snapshot_of
from .bundle import bundle_size, load_bundle, save_bundle
from .camera_path import CameraPath, random_path
from .dense_io import load_dense, save_dense
from .experiment import default_far, run_experiment, write_report
from .validate import validate_world


def _dims(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.replace("x", ",").split(",")]
    if len(parts) == 1:
        parts *= 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("world dims take 1 or 3 integers, e.g. 4 or 4,2,4")
    return tuple(parts)


def _budget(text: str) -> int | None:
    return None if text in ("none", "inf", "-1") else int(text)


def _world_args(p: argparse.ArgumentParser):
    p.add_argument("--scene", default="terrain", help="generator spec, e.g. 'menger?level=3&scale=4'")
    p.add_argument("--chunk-res", type=int, default=32)
    p.add_argument("--voxel-size", type=float, default=1.0)
    p.add_argument("--world-dims", type=_dims, default=(4, 4, 4), help="LOD-0 chunk counts per axis")
    p.add_argument("--density", type=int, default=2)
    p.add_argument("--e-c", type=float, default=0.05, help="color merge threshold")
    p.add_argument("--dense", type=Path, help="import a raw dense world file instead of generating")


def _render_args(p: argparse.ArgumentParser):
    p.add_argument("--streaming-factor", type=float, default=2.0)
    p.add_argument("--pool-capacity", type=int, default=8192)
    p.add_argument("--load-budget", type=_budget, default=None, help="max loads per frame ('none' = unlimited)")
    p.add_argument("--culling", choices=("none", "sound", "paper"), default="sound")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--fov", type=float, default=60.0)
    p.add_argument("--near", type=float, default=0.05)
    p.add_argument("--far", type=float, default=None, help="default: twice the world diagonal plus one")
    p.add_argument("--camera-path", type=Path, help="keyframe file; default: --cameras seeded random views")
    p.add_argument("--cameras", type=int, default=10)
    p.add_argument("--sample-rate", type=float, default=None, help="path samples per second (default: keyframes)")
    p.add_argument("--ground-truth", choices=("lod0", "oracle"), default=None)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="voxdag", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", type=Path, default=Path("out"))

    b = sub.add_parser("build", parents=[common], help="generate or import a world and write a bundle")
    _world_args(b)
    b.add_argument("--dense-out", action="store_true", help="also write the raw dense world (world.aokd)")

    r = sub.add_parser("render", parents=[common], help="stream and render a bundle along a camera path")
    r.add_argument("--bundle", type=Path, required=True)
    r.add_argument("--density", type=int, default=2, help="recorded in the report (fixed at build time)")
    _render_args(r)

    be = sub.add_parser("bench", parents=[common], help="per-pass timing sweep over chunk resolutions")
    _world_args(be)
    _render_args(be)
    be.add_argument("--chunk-res-list", default="16,32,64")
    be.add_argument("--repeats", type=int, default=3)

    v = sub.add_parser("validate", parents=[common], help="oracle equivalence and invariant suites")
    _world_args(v)
    v.add_argument("--bundle", type=Path, help="also check this bundle against a rebuild")
    v.add_argument("--width", type=int, default=128)
    v.add_argument("--height", type=int, default=128)
    v.add_argument("--culling", choices=("none", "sound", "paper"), default="sound")
    v.add_argument("--cameras", type=int, default=5)

    s = sub.add_parser("stats", parents=[common], help="per-level tables of a bundle")
    s.add_argument("--bundle", type=Path, required=True)
    s.add_argument("--json", action="store_true")
    return ap


def _world(args):
    if args.dense is not None:
        return load_dense(args.dense)
    config = WorldConfig(chunk_res=args.chunk_res, voxel_size=args.voxel_size, world_dims=args.world_dims)
    return generate(SceneSpec.parse(args.scene, seed=args.seed), config)


def _render_config(args, world_config) -> RenderConfig:
    far = args.far if args.far is not None else default_far(world_config)
    return RenderConfig(args.width, args.height, args.fov, args.near, far, culling=args.culling)


def _cameras(args, world_config):
    if args.camera_path is not None:
        return CameraPath.load(args.camera_path).sample(args.sample_rate)
    return random_path(world_config, args.cameras, args.seed, args.fov).sample()


def cmd_build(args) -> int:
    world = _world(args)
    pyramid = build_pyramid(chunkify(world), world.config, args.density, args.e_c)
    args.out.mkdir(parents=True, exist_ok=True)
    size = save_bundle(pyramid, args.out / "scene.aokn")
    if args.dense_out:
        save_dense(world, args.out / "world.aokd")
    print(f"wrote {args.out / 'scene.aokn'}: {len(pyramid)} chunks, {pyramid.lod_count} levels, {size} bytes")
    return 0


def write_frame(out: Path, index: int, frame) -> None:
    out.mkdir(parents=True, exist_ok=True)
    Image.fromarray(frame.color).save(out / f"frame_{index:04d}.png", optimize=False)
    frame.depth.astype("<u4").tofile(out / f"depth_{index:04d}.raw")
    (out / f"stats_{index:04d}.json").write_text(json.dumps(frame.stats.to_dict(timings=False), indent=2,
                                                            sort_keys=True) + "\n")


def cmd_render(args) -> int:
    pyramid = load_bundle(args.bundle)
    config = _render_config(args, pyramid.config)
    params = StreamingParams(args.streaming_factor, args.density, args.pool_capacity, args.load_budget)
    frames = args.out / "frames"
    report = run_experiment(pyramid, _cameras(args, pyramid.config), params, config, args.ground_truth,
                            args.workers, bundle_size(args.bundle),
                            frame_sink=lambda i, fr: write_frame(frames, i, fr))
    write_report(report, args.out)
    print(f"{len(report.frames)} frames -> {frames}")
    print(f"max resident chunks {report.max_resident_chunks}, memory ratio {report.memory_ratio:.3f}")
    if report.mean_ssim is not None:
        print(f"mean SSIM vs {args.ground_truth}: {report.mean_ssim:.4f}")
    for e in report.errors:
        print(f"error: {e}")
    return 0


def cmd_bench(args) -> int:
    rows = []
    for res in (int(r) for r in args.chunk_res_list.split(",")):
        wc = WorldConfig(chunk_res=res, voxel_size=args.voxel_size, world_dims=args.world_dims)
        world = generate(SceneSpec.parse(args.scene, seed=args.seed), wc)
        t0 = time.perf_counter()
        pyramid = build_pyramid(chunkify(world), wc, args.density, args.e_c)
        build_s = time.perf_counter() - t0
        snap = snapshot_of([pyramid.record(k) for k in sorted(pyramid.lod0_keys)], wc)
        config = _render_config(args, wc)
        passes: dict[str, list[float]] = {}
        for cam in _cameras(args, wc):
            hiz = None
            for _ in range(args.repeats):
                fr = render_frame(snap, cam, config, hiz, workers=args.workers)
                hiz = fr.hiz
                for k, v in fr.stats.timings.items():
                    passes.setdefault(k, []).append(v)
        rows.append({"chunk_res": res, "chunks": len(snap), "build_s": build_s,
                     **{k: float(np.mean(v)) * 1e3 for k, v in passes.items()}})
    names = [k for k in rows[0] if k not in ("chunk_res", "chunks", "build_s")]
    print("chunk_res chunks build_s " + " ".join(f"{n}_ms" for n in names))
    for row in rows:
        print(f"{row['chunk_res']:9d} {row['chunks']:6d} {row['build_s']:7.2f} "
              + " ".join(f"{row[n]:{len(n) + 3}.2f}" for n in names))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "bench.json").write_text(json.dumps(rows, indent=2) + "\n")
    return 0


def cmd_validate(args) -> int:
    world = _world(args)
    pyramid = build_pyramid(chunkify(world), world.config, args.density, args.e_c)
    config = RenderConfig(args.width, args.height, near=0.05, far=default_far(world.config), culling=args.culling)
    checks = validate_world(world, pyramid, args.cameras, args.seed, config)
    if args.bundle is not None:
        from .validate import Check

        loaded = load_bundle(args.bundle)
        same = loaded.infos == pyramid.infos and all(loaded.record(k) == pyramid.record(k) for k in pyramid.infos)
        checks.append(Check("bundle matches rebuild", same, f"{len(loaded)} chunks in {args.bundle}"))
    for c in checks:
        print(c.line())
    return 0 if all(c.ok for c in checks) else 1


def cmd_stats(args) -> int:
    pyramid = load_bundle(args.bundle)
    rows = pyramid.level_stats()
    if args.json:
        print(json.dumps({"bundle_bytes": bundle_size(args.bundle), "levels": rows}, indent=2))
        return 0
    cols = ["lod", "chunks", "nodes", "bitmaps", "geometry_bytes", "color_blocks", "color_bytes", "voxels"]
    print(" ".join(f"{c:>14}" for c in cols))
    for row in rows:
        print(" ".join(f"{row[c]:>14}" for c in cols))
    print(f"total chunk bytes {pyramid.total_bytes()}, file bytes {bundle_size(args.bundle)}")
    return 0


COMMANDS = {"build": cmd_build, "render": cmd_render, "bench": cmd_bench, "validate": cmd_validate,
            "stats": cmd_stats}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (VoxdagError, OSError) as exc:
        print(f"voxdag {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
