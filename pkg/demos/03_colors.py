"""
Color blocks
============

Colors are stored apart from geometry, in DFS order.  Consecutive colors
within ``e_c`` (max channel difference, channels in [0, 1]) of the running
block mean share one block.
"""

import numpy as np

from voxdag.color import compress, extract_colors, lookup
from voxdag.scene import SceneSpec, WorldConfig, generate
from voxdag.svdag import build_chunk

config = WorldConfig(chunk_res=32, voxel_size=1.0, world_dims=(1, 1, 1))
world = generate(SceneSpec.parse("terrain", seed=42), config)
dense = next(iter(world.chunks.values()))
colors = extract_colors(dense, build_chunk(dense))
print(f"{len(colors)} voxel colors")

# %%
# Fewer blocks as the threshold grows; ``e_c = 0`` keeps every color exact.
for e_c in (0.0, 0.02, 0.05, 0.1, 0.2):
    blocks = compress(colors, e_c)
    err = np.abs(blocks.expand().astype(int) - colors.astype(int)).max()
    print(f"e_c={e_c:<5} blocks={len(blocks):6d} bytes={blocks.nbytes:7d} max channel error={err}")

# %%
# Lookup is a binary search over block starts.
blocks = compress(colors, 0.05)
print("color of rank 1234:", lookup(blocks, 1234), "stored:", tuple(colors[1234]))
