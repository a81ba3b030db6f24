"""
The frame pipeline
==================

Chunk frustum culling, tile/chunk pairing with Hi-Z occlusion culling, DAG
ray marching into a 64-bit visibility buffer, a second culling pass
against this frame's depth, and a color resolve.
"""

from pathlib import Path

from PIL import Image

from voxdag.lod import build_pyramid, select_cut
from voxdag.pipeline import Camera, RenderConfig, render_frame
from voxdag.scene import SceneSpec, WorldConfig, chunkify, generate
from voxdag.streaming import ChunkPool

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

config = WorldConfig(chunk_res=32, voxel_size=1.0, world_dims=(4, 4, 4))
pyramid = build_pyramid(chunkify(generate(SceneSpec.parse("boxes_city?count=24", seed=42), config)), config)
camera = Camera((140.3, 95.7, -30.2), (64.0, 10.0, 64.0))
render = RenderConfig(320, 240, far=450.0)

pool = ChunkPool(pyramid)
snapshot = pool.apply(pool.plan(select_cut(pyramid, camera.position, 2.0), camera.position))

# %%
# The first frame has no previous depth; the second reuses the first's Hi-Z.
first = render_frame(snapshot, camera, render)
second = render_frame(snapshot, camera, render, first.hiz)
for name, fr in (("first", first), ("second", second)):
    s = fr.stats
    print(f"{name}: visible chunks {s.visible_chunks}, pairs {s.pairs_phase1}+{s.pairs_phase2}, "
          f"culled {s.culled_final}, covered pixels {s.covered_pixels}")
print("identical images:", (first.color == second.color).all())
print("pass timings (ms):", {k: round(v * 1e3, 2) for k, v in second.stats.timings.items()})

Image.fromarray(second.color).save(out / "city.png")
print("wrote", out / "city.png")
