"""CPU twin of the tile-based render pass graph."""

from .camera import TILE, Camera, RenderConfig
from .encoding import (DEPTH_MAX, EXTERNAL_NORMAL, decode_depth, decode_visibility, decode_visibility_array,
                       encode_depth, encode_visibility)
from .frame import FrameResult, FrameStats, render_frame
from .hiz import HiZPyramid, build_hiz
from .packing import PackedScene, pack_snapshot
from .passes import (TilePairs, build_pairs, chunk_selection, color_resolve, frustum_planes, ray_march, shade,
                     tile_selection)

__all__ = [
    "Camera", "DEPTH_MAX", "EXTERNAL_NORMAL", "FrameResult", "FrameStats", "HiZPyramid", "PackedScene",
    "RenderConfig", "TILE", "TilePairs", "build_hiz", "build_pairs", "chunk_selection", "color_resolve",
    "decode_depth", "decode_visibility", "decode_visibility_array", "encode_depth", "encode_visibility",
    "frustum_planes", "pack_snapshot", "ray_march", "render_frame", "shade", "tile_selection",
]
