"""
Sparse voxel DAGs
=================

Each chunk is compressed bottom-up into a DAG with identical subtrees
merged.  The last level stores 4x4x4 leaf groups as 64-bit bitmaps.
"""

import numpy as np

from voxdag.scene import DenseChunk
from voxdag.svdag import build_chunk, chunk_stats, dfs_order, leaf_rank, query, ray_intersect

res = 64
x, y, z = np.indices((res, res, res))

# %%
# A full chunk collapses to one node per level and one bitmap.
full = build_chunk(DenseChunk(np.ones((res,) * 3, bool), np.zeros(3, np.uint8)))
print("full chunk:", chunk_stats(full))

# %%
# A sphere has far more structure, but still shares most subtrees.
sphere = (x - 31.5) ** 2 + (y - 31.5) ** 2 + (z - 31.5) ** 2 < 28 ** 2
chunk = build_chunk(DenseChunk(sphere, np.zeros(3, np.uint8)))
stats = chunk_stats(chunk)
print("sphere:", stats, f"-> {stats['geometry_bytes'] / sphere.size:.4f} bytes per voxel")

# %%
# Voxels are addressed by depth-first rank, the index into the color array.
order = dfs_order(sphere)
print("first occupied voxels in DFS order:", [tuple(map(int, v)) for v in order[:3]])
print("rank of", tuple(map(int, order[1000])), "=", leaf_rank(chunk, tuple(order[1000])))
print("query(32, 32, 32):", query(chunk, (32, 32, 32)), " query(0, 0, 0):", query(chunk, (0, 0, 0)))

# %%
# Rays walk the DAG directly.
hit = ray_intersect(chunk, (-10.0, 31.7, 31.2), (1.0, 0.0, 0.0))
print(f"ray hit voxel {hit.voxel} at t={hit.t:.3f}, normal code {hit.normal}")
