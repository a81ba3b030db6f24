"""
Bundles, dense files and the command line
=========================================

Pyramids persist as ``.aokn`` bundles whose chunk blobs load lazily.  The
``voxdag`` command wraps the whole workflow; here it is driven in-process.
"""

from pathlib import Path

from voxdag.harness import load_bundle, load_dense, save_bundle, save_dense
from voxdag.harness.cli import main
from voxdag.lod import build_pyramid
from voxdag.scene import SceneSpec, WorldConfig, chunkify, generate

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

config = WorldConfig(chunk_res=16, voxel_size=1.0, world_dims=(2, 2, 2))
world = generate(SceneSpec.parse("terrain", seed=42), config)
pyramid = build_pyramid(chunkify(world), config)
size = save_bundle(pyramid, out / "terrain.aokn")
loaded = load_bundle(out / "terrain.aokn")
print(f"bundle: {size} bytes, {len(loaded)} chunks, blobs read so far {loaded.records.reads}")
key = sorted(loaded.lod0_keys)[0]
print("first chunk matches:", loaded.record(key) == pyramid.record(key), "reads", loaded.records.reads)

save_dense(world, out / "terrain.aokd")
print("dense roundtrip:", load_dense(out / "terrain.aokd") == world)

# %%
# The same steps through the CLI: build, inspect, stream and render, validate.
run = out / "cli"
scene = ["--scene", "terrain", "--chunk-res", "16", "--world-dims", "4"]
main(["build", *scene, "--out", str(run)])
main(["stats", "--bundle", str(run / "scene.aokn")])
main(["render", "--bundle", str(run / "scene.aokn"), "--cameras", "3", "--width", "96", "--height", "96",
      "--ground-truth", "lod0", "--out", str(run)])
main(["validate", *scene, "--cameras", "2", "--width", "64", "--height", "64", "--out", str(run)])
