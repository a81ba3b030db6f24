"""
Procedural voxel worlds
=======================

A world is a grid of LOD-0 chunks.  Scenes are described by a small spec
string, ``kind?key=value&...``, and every generator is seeded.
"""

import numpy as np

from voxdag.scene import SceneSpec, WorldConfig, chunkify, dense_query, generate

config = WorldConfig(chunk_res=16, voxel_size=1.0, world_dims=(4, 2, 4))
print("world voxels:", config.world_voxels, "levels:", config.lod_count)

# %%
# Four generators ship with the package.
for spec in ["solid_box?lo=8,0,8&hi=40,20,40", "menger?level=2&scale=2", "terrain", "boxes_city?count=12"]:
    world = generate(SceneSpec.parse(spec, seed=42), config)
    chunks = chunkify(world)
    print(f"{spec:34s} {world.occupied_count():7d} voxels in {len(chunks):2d} non-empty chunks")

# %%
# Worlds are dense per chunk; ``to_arrays`` gives the global view.
terrain = generate(SceneSpec.parse("terrain", seed=42), config)
occ, col = terrain.to_arrays()
heights = occ.sum(axis=1)
print("terrain column heights: min", heights.min(), "max", heights.max())
print("voxel (10, 3, 10):", dense_query(terrain, (10, 3, 10)))
print("mean surface color:", np.round(col[occ].mean(axis=0)).astype(int))
