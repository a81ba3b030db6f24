import json

import numpy as np
import pytest
from _oracles import direct_ssim_window
from conftest import lod0_snapshot, make_world

from voxdag.errors import ConfigError
from voxdag.harness import CameraPath, oracle_render, random_path, run_experiment, ssim, ssim_reference
from voxdag.harness.cli import main
from voxdag.harness.experiment import default_far
from voxdag.harness.ssim import gaussian_window, luma
from voxdag.lod import select_cut
from voxdag.pipeline import Camera, RenderConfig, render_frame
from voxdag.scene import DenseWorld, WorldConfig
from voxdag.streaming import StreamingParams

# -- ssim --------------------------------------------------------------------


def test_ssim_identity_and_symmetry(rng):
    a = rng.integers(0, 256, (40, 50, 3), dtype=np.uint8)
    b = np.clip(a.astype(int) + rng.integers(-40, 40, a.shape), 0, 255).astype(np.uint8)
    assert ssim(a, a) == 1.0
    assert ssim(a, b) == ssim(b, a)
    assert -1.0 <= ssim(a, b) < 1.0
    assert ssim(a, b) > ssim(a, rng.integers(0, 256, a.shape, dtype=np.uint8))


def test_ssim_matches_direct_reference(rng):
    for _ in range(5):
        h, w = rng.integers(11, 30, 2)
        a = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
        b = np.clip(a.astype(int) + rng.integers(-60, 60, a.shape), 0, 255).astype(np.uint8)
        assert abs(ssim(a, b) - ssim_reference(a, b)) <= 1e-6


def test_ssim_single_window_from_definition(rng):
    a = rng.integers(0, 256, (11, 11, 3), dtype=np.uint8)
    b = rng.integers(0, 256, (11, 11, 3), dtype=np.uint8)
    g = gaussian_window()
    assert g.sum() == pytest.approx(1.0) and len(g) == 11
    assert ssim(a, b) == pytest.approx(direct_ssim_window(luma(a), luma(b), np.outer(g, g)), abs=1e-9)


def test_ssim_errors():
    with pytest.raises(ValueError):
        ssim(np.zeros((20, 20, 3)), np.zeros((20, 21, 3)))
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 20, 3)), np.zeros((10, 20, 3)))


# -- camera paths ------------------------------------------------------------

def test_camera_path_parse_and_interpolate():
    text = "# t px py pz lx ly lz fov\n0 0 0 0 1 0 0 60\n2 4 0 0 5 2 0 40\n"
    path = CameraPath.parse(text)
    mid = path.at(1.0)
    assert mid.position == (2.0, 0.0, 0.0) and mid.look_at == (3.0, 1.0, 0.0) and mid.fov_y == 50.0
    assert path.at(-1).position == (0.0, 0.0, 0.0) and path.at(9).position == (4.0, 0.0, 0.0)
    cams = path.sample(2.0)
    assert len(cams) == 5 and cams[-1].position == (4.0, 0.0, 0.0)
    assert CameraPath.parse(path.dumps()).keyframes == path.keyframes
    with pytest.raises(ConfigError):
        CameraPath.parse("1 0 0 0 1 0 0 60\n1 0 0 0 1 0 0 60\n")
    with pytest.raises(ConfigError):
        CameraPath.parse("0 0 0 0 1 0 0\n")


def test_random_path_seeded(small_config):
    a, b = random_path(small_config, 10, seed=42), random_path(small_config, 10, seed=42)
    assert a.dumps() == b.dumps() and len(a.keyframes) == 10
    assert a.dumps() != random_path(small_config, 10, seed=43).dumps()


# -- oracle ------------------------------------------------------------------

def test_oracle_empty_world(small_config):
    cfg = RenderConfig(32, 32, far=300.0, background=(3, 4, 5))
    img = oracle_render(DenseWorld(small_config, {}), Camera((1, 2, 3), (30, 20, 10)), cfg)
    assert not img.hit.any() and np.all(img.color == (3, 4, 5))


def test_oracle_box_face_uniform_depth():
    cfg16 = WorldConfig(chunk_res=16, voxel_size=1.0, world_dims=(1, 1, 1))
    world, _ = make_world("solid_box", cfg16)
    cam = Camera((8.0, 8.0, -40.0), (8.0, 8.0, 0.0), fov_y=10.0)
    cfg = RenderConfig(32, 32, far=300.0)
    img = oracle_render(world, cam, cfg)
    assert img.hit.all() and np.all(img.normal == 5)
    z = cam.origin[2] + img.t * cam.pixel_rays(cfg)[..., 2]
    assert np.allclose(z, 0.0, atol=1e-9)
    assert np.all(img.voxel[..., 2] == 0)


def test_oracle_ray_reversibility(terrain16):
    """A hit seen from the camera, and the camera seen back from just off the hit, agree."""
    cfg = RenderConfig(32, 32, far=300.0)
    cam = Camera((70.5, 50.2, 66.1), (20.0, 4.0, 30.0))
    img = oracle_render(terrain16, cam, cfg)
    dirs = cam.pixel_rays(cfg)
    for py, px in [(16, 16), (20, 9), (25, 28)]:
        if not img.hit[py, px]:
            continue
        p = cam.origin + img.t[py, px] * dirs[py, px]
        back = Camera(p - 1e-4 * dirs[py, px], cam.origin, fov_y=1.0)
        rev = oracle_render(terrain16, back, RenderConfig(8, 8, near=1e-6, far=300.0))
        assert not rev.hit[4, 4] or rev.t[4, 4] > 0.5  # nothing between the hit point and the camera


# -- experiments -------------------------------------------------------------

def test_capacity_error_reported(terrain16_pyramid, small_config):
    cfg = RenderConfig(32, 32, far=default_far(small_config))
    cams = random_path(small_config, 3).sample()
    report = run_experiment(terrain16_pyramid, cams, StreamingParams(4.0, pool_capacity=2), cfg)
    assert report.errors and all(f.resident_chunks == 0 for f in report.frames)
    assert report.frames[0].capacity_error


def test_static_camera_converges(terrain16_pyramid, small_config):
    pyr = terrain16_pyramid
    cfg = RenderConfig(64, 64, far=default_far(small_config))
    cam = Camera((30.5, 40.2, -12.3), (32.0, 8.0, 32.0))
    params = StreamingParams(2.0, load_budget=3)
    report = run_experiment(pyr, [cam] * 12, params, cfg, ground_truth="lod0")
    target = select_cut(pyr, cam.position, 2.0)
    last = report.frames[-1]
    assert last.pending_ops == 0 and last.cut_size == len(target) == last.resident_chunks
    assert last.ssim == max(f.ssim for f in report.frames)
    assert 0 < report.memory_ratio < 1
    full = render_frame(lod0_snapshot(pyr), cam, cfg).color
    assert report.frames[-1].ssim <= ssim(full, full)


# -- CLI ---------------------------------------------------------------------

def test_cli_end_to_end(tmp_path, capsys):
    out = tmp_path / "run"
    common = ["--scene", "terrain", "--chunk-res", "16", "--world-dims", "2", "--out", str(out)]
    assert main(["build", *common, "--dense-out"]) == 0
    bundle = out / "scene.aokn"
    assert bundle.exists() and (out / "world.aokd").exists()
    path = tmp_path / "path.txt"
    path.write_text("0 40 30 -10 16 5 16 60\n1 -8 28 40 16 5 16 60\n")
    assert main(["render", "--bundle", str(bundle), "--camera-path", str(path), "--width", "32", "--height", "32",
                 "--sample-rate", "2", "--ground-truth", "lod0", "--out", str(out)]) == 0
    frames = sorted((out / "frames").glob("frame_*.png"))
    assert len(frames) == 3
    depth = np.fromfile(out / "frames" / "depth_0000.raw", dtype="<u4")
    assert depth.size == 32 * 32 and not np.any(depth >> 24)
    report = json.loads((out / "report.json").read_text())
    assert report["mean_ssim"] is not None and len(report["frames"]) == 3
    assert json.loads((out / "timings.json").read_text())
    capsys.readouterr()
    assert main(["stats", "--bundle", str(bundle), "--json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["bundle_bytes"] == bundle.stat().st_size and stats["levels"][0]["chunks"] > 0
    assert main(["validate", "--dense", str(out / "world.aokd"), "--bundle", str(bundle), "--width", "32",
                 "--height", "32", "--cameras", "2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "[FAIL]" not in text and "[PASS]" in text
    assert main(["stats", "--bundle", str(tmp_path / "missing.aokn")]) == 2
