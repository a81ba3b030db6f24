"""Chunked sparse voxel DAG storage, LOD streaming and a tile-based ray-march renderer."""

from .errors import (BadMagicError, BadVersionError, BoundsError, BundleError, CapacityError, ConfigError,
                     ConsistencyError, FieldOverflowError, OffsetError, TruncatedError, VoxdagError)
from .scene import ChunkKey, DenseChunk, DenseWorld, SceneSpec, WorldConfig, chunkify, dense_query, generate

__version__ = "0.1.0"

__all__ = [
    "BadMagicError", "BadVersionError", "BoundsError", "BundleError", "CapacityError", "ChunkKey", "ConfigError",
    "ConsistencyError", "DenseChunk", "DenseWorld", "FieldOverflowError", "OffsetError", "SceneSpec",
    "TruncatedError", "VoxdagError", "WorldConfig", "chunkify", "dense_query", "generate",
]
