"""World/chunk coordinates, dense voxel storage and procedural scenes.

Arrays are indexed ``[x, y, z]`` with ``y`` pointing up.  A LOD-0 chunk
``(0, cx, cy, cz)`` owns global voxels ``[c * chunk_res, (c + 1) * chunk_res)``
on each axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, NamedTuple
from urllib.parse import parse_qsl

import numpy as np

from .errors import BoundsError, ConfigError

VALID_CHUNK_RES = (8, 16, 32, 64, 128, 256)


class ChunkKey(NamedTuple):
    lod: int
    cx: int
    cy: int
    cz: int

    @property
    def coords(self) -> tuple[int, int, int]:
        return (self.cx, self.cy, self.cz)

    def parent(self) -> "ChunkKey":
        return ChunkKey(self.lod + 1, self.cx >> 1, self.cy >> 1, self.cz >> 1)

    def children(self) -> list["ChunkKey"]:
        """The 8 finer keys, in octant order ``x | y << 1 | z << 2``."""
        if self.lod == 0:
            return []
        n = self.lod - 1
        return [
            ChunkKey(n, 2 * self.cx + (o & 1), 2 * self.cy + ((o >> 1) & 1), 2 * self.cz + (o >> 2))
            for o in range(8)
        ]

    def ancestor(self, lod: int) -> "ChunkKey":
        shift = lod - self.lod
        if shift < 0:
            raise ValueError("ancestor level below key level")
        return ChunkKey(lod, self.cx >> shift, self.cy >> shift, self.cz >> shift)

    def is_ancestor_of(self, other: "ChunkKey") -> bool:
        """Strict ancestry in the implicit chunk octree."""
        return other.lod < self.lod and other.ancestor(self.lod) == self


@dataclass(frozen=True)
class WorldConfig:
    chunk_res: int = 256
    voxel_size: float = 1.0
    world_dims: tuple[int, int, int] = (1, 1, 1)

    def __post_init__(self):
        if self.chunk_res not in VALID_CHUNK_RES:
            raise ConfigError(f"chunk_res must be one of {VALID_CHUNK_RES}, got {self.chunk_res}")
        if not self.voxel_size > 0:
            raise ConfigError("voxel_size must be positive")
        dims = tuple(int(d) for d in self.world_dims)
        if len(dims) != 3 or any(d < 1 or d & (d - 1) for d in dims):
            raise ConfigError(f"world_dims must be three powers of two, got {self.world_dims}")
        object.__setattr__(self, "world_dims", dims)

    @property
    def chunk_world_size(self) -> float:
        """World edge length of a LOD-0 chunk region."""
        return self.chunk_res * self.voxel_size

    @property
    def world_voxels(self) -> tuple[int, int, int]:
        return tuple(d * self.chunk_res for d in self.world_dims)

    @property
    def lod_count(self) -> int:
        return int(math.log2(max(self.world_dims))) + 1

    def dims_at(self, lod: int) -> tuple[int, int, int]:
        """Chunk counts per axis at ``lod`` (at least one per axis)."""
        return tuple(max(1, d >> lod) for d in self.world_dims)

    def key_in_bounds(self, key: ChunkKey) -> bool:
        if not 0 <= key.lod < self.lod_count:
            return False
        return all(0 <= c < d for c, d in zip(key.coords, self.dims_at(key.lod)))

    def chunk_size_at(self, lod: int) -> float:
        return self.chunk_world_size * (1 << lod)

    def chunk_origin(self, key: ChunkKey) -> np.ndarray:
        """World-space minimum corner of the region owned by ``key``."""
        return np.array(key.coords, dtype=np.float64) * self.chunk_size_at(key.lod)

    def chunk_center(self, key: ChunkKey) -> np.ndarray:
        return self.chunk_origin(key) + 0.5 * self.chunk_size_at(key.lod)

    def world_extent(self) -> np.ndarray:
        return np.array(self.world_voxels, dtype=np.float64) * self.voxel_size


class DenseChunk:
    """Occupancy and 8-bit RGB colors for one ``chunk_res``\\ :sup:`3` region.

    Colors of empty voxels are forced to zero so that the color array is
    defined exactly for occupied voxels.
    """

    __slots__ = ("occupancy", "color")

    def __init__(self, occupancy: np.ndarray, color: np.ndarray):
        occupancy = np.ascontiguousarray(occupancy, dtype=bool)
        r = occupancy.shape[0]
        if occupancy.shape != (r, r, r) or r not in VALID_CHUNK_RES:
            raise ConfigError(f"occupancy must be a cube with edge in {VALID_CHUNK_RES}")
        color = np.array(color, dtype=np.uint8, copy=True)
        if color.shape == (3,):
            color = np.broadcast_to(color, occupancy.shape + (3,)).copy()
        if color.shape != occupancy.shape + (3,):
            raise ConfigError("color must have shape occupancy.shape + (3,)")
        color[~occupancy] = 0
        self.occupancy = occupancy
        self.color = color

    @property
    def res(self) -> int:
        return self.occupancy.shape[0]

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    def is_empty(self) -> bool:
        return not self.occupancy.any()

    def __eq__(self, other):
        if not isinstance(other, DenseChunk):
            return NotImplemented
        return np.array_equal(self.occupancy, other.occupancy) and np.array_equal(self.color, other.color)

    def __repr__(self):
        return f"DenseChunk(res={self.res}, occupied={self.occupied_count})"


@dataclass(frozen=True)
class SceneSpec:
    """Generator kind + seed + kind-specific parameters.

    Kinds and their parameters (voxel units, inclusive bounds):

    * ``solid_box``: ``lo``, ``hi`` (3-tuples), ``color``
    * ``menger``: ``level``, ``origin``, ``scale`` (voxels per cell), ``color``
    * ``terrain``: ``base``, ``amplitude``, ``frequency`` (cycles per voxel), ``octaves``
    * ``boxes_city``: ``count``, ``min_size``, ``max_size``, ``ground``
    """

    kind: str
    seed: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str, seed: int | None = None) -> "SceneSpec":
        """Parse ``kind?key=value&key=a,b,c`` (query-string style)."""
        kind, _, query = text.partition("?")
        params: dict[str, Any] = {}
        for k, v in parse_qsl(query, keep_blank_values=False):
            parts = [_number(p) for p in v.split(",")]
            params[k] = tuple(parts) if len(parts) > 1 else parts[0]
        spec_seed = int(params.pop("seed", 0))
        return cls(kind.strip(), spec_seed if seed is None else seed, params)


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


class DenseWorld:
    """Immutable map of LOD-0 chunk keys to non-empty dense chunks."""

    def __init__(self, config: WorldConfig, chunks: Mapping[ChunkKey, DenseChunk]):
        self.config = config
        for key, chunk in chunks.items():
            if key.lod != 0 or not config.key_in_bounds(key):
                raise BoundsError(f"chunk key {key} outside world")
            if chunk.res != config.chunk_res:
                raise ConfigError("chunk resolution does not match config")
        self._chunks = {k: chunks[k] for k in sorted(chunks) if not chunks[k].is_empty()}

    @property
    def chunks(self) -> Mapping[ChunkKey, DenseChunk]:
        return self._chunks

    def __len__(self):
        return len(self._chunks)

    def __iter__(self) -> Iterator[ChunkKey]:
        return iter(self._chunks)

    def occupied_count(self) -> int:
        return sum(c.occupied_count for c in self._chunks.values())

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Global ``(occupancy, color)`` arrays over all LOD-0 voxels."""
        shape = self.config.world_voxels
        occ = np.zeros(shape, dtype=bool)
        col = np.zeros(shape + (3,), dtype=np.uint8)
        r = self.config.chunk_res
        for key, chunk in self._chunks.items():
            sl = tuple(slice(c * r, (c + 1) * r) for c in key.coords)
            occ[sl] = chunk.occupancy
            col[sl] = chunk.color
        return occ, col

    @classmethod
    def from_arrays(cls, config: WorldConfig, occupancy: np.ndarray, color: np.ndarray) -> "DenseWorld":
        if occupancy.shape != config.world_voxels:
            raise BoundsError("array shape does not match world_voxels")
        r = config.chunk_res
        chunks = {}
        for cx in range(config.world_dims[0]):
            for cy in range(config.world_dims[1]):
                for cz in range(config.world_dims[2]):
                    sl = (slice(cx * r, (cx + 1) * r), slice(cy * r, (cy + 1) * r), slice(cz * r, (cz + 1) * r))
                    occ = occupancy[sl]
                    if occ.any():
                        chunks[ChunkKey(0, cx, cy, cz)] = DenseChunk(occ, color[sl])
        return cls(config, chunks)

    def __eq__(self, other):
        if not isinstance(other, DenseWorld):
            return NotImplemented
        return self.config == other.config and self._chunks.keys() == other._chunks.keys() and all(
            self._chunks[k] == other._chunks[k] for k in self._chunks
        )


def chunkify(world: DenseWorld) -> list[tuple[ChunkKey, DenseChunk]]:
    """One ``(key, chunk)`` entry per non-empty LOD-0 chunk, sorted by key."""
    return [(k, world.chunks[k]) for k in sorted(world.chunks) if not world.chunks[k].is_empty()]


def dense_query(world: DenseWorld, coord) -> tuple[bool, tuple[int, int, int] | None]:
    """Occupancy and color of a global LOD-0 voxel."""
    x, y, z = (int(c) for c in coord)
    vx = world.config.world_voxels
    if not (0 <= x < vx[0] and 0 <= y < vx[1] and 0 <= z < vx[2]):
        raise BoundsError(f"voxel {coord} outside world {vx}")
    r = world.config.chunk_res
    chunk = world.chunks.get(ChunkKey(0, x // r, y // r, z // r))
    if chunk is None or not chunk.occupancy[x % r, y % r, z % r]:
        return False, None
    return True, tuple(int(c) for c in chunk.color[x % r, y % r, z % r])


# --------------------------------------------------------------------------
# generators
#
# Each generator evaluates one chunk region from global voxel coordinates so
# that large worlds never need a global dense array.


def _region(origin, r):
    x0, y0, z0 = origin
    x = np.arange(x0, x0 + r)[:, None, None]
    y = np.arange(y0, y0 + r)[None, :, None]
    z = np.arange(z0, z0 + r)[None, None, :]
    return x, y, z


def _check_box(lo, hi, config):
    vx = config.world_voxels
    if any(l < 0 or h >= v or l > h for l, h, v in zip(lo, hi, vx)):
        raise BoundsError(f"box {lo}..{hi} does not fit world {vx}")


class _SolidBox:
    def __init__(self, spec: SceneSpec, config: WorldConfig):
        p = spec.params
        self.lo = tuple(int(v) for v in p.get("lo", (0, 0, 0)))
        self.hi = tuple(int(v) for v in p.get("hi", tuple(v - 1 for v in config.world_voxels)))
        self.color = tuple(int(v) for v in p.get("color", (200, 60, 50)))
        _check_box(self.lo, self.hi, config)

    def bounds(self):
        return self.lo, self.hi

    def fill(self, origin, r):
        x, y, z = _region(origin, r)
        occ = (
            (x >= self.lo[0]) & (x <= self.hi[0])
            & (y >= self.lo[1]) & (y <= self.hi[1])
            & (z >= self.lo[2]) & (z <= self.hi[2])
        )
        return occ, np.array(self.color, dtype=np.uint8)


def menger_mask(level: int, x, y, z):
    """True where cell ``(x, y, z)`` of a level-``level`` sponge is solid."""
    solid = np.ones(np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z)), dtype=bool)
    for _ in range(level):
        ones = (x % 3 == 1).astype(np.int8) + (y % 3 == 1) + (z % 3 == 1)
        solid &= ones < 2
        x, y, z = x // 3, y // 3, z // 3
    return solid


class _Menger:
    def __init__(self, spec: SceneSpec, config: WorldConfig):
        p = spec.params
        self.level = int(p.get("level", 2))
        self.scale = int(p.get("scale", 1))
        self.origin = tuple(int(v) for v in p.get("origin", (0, 0, 0)))
        self.color = p.get("color")
        edge = 3 ** self.level * self.scale
        _check_box(self.origin, tuple(o + edge - 1 for o in self.origin), config)
        self.edge = edge

    def bounds(self):
        return self.origin, tuple(o + self.edge - 1 for o in self.origin)

    def fill(self, origin, r):
        x, y, z = _region(origin, r)
        lx, ly, lz = x - self.origin[0], y - self.origin[1], z - self.origin[2]
        inside = (lx >= 0) & (lx < self.edge) & (ly >= 0) & (ly < self.edge) & (lz >= 0) & (lz < self.edge)
        s = self.scale
        occ = inside & menger_mask(self.level, np.clip(lx, 0, None) // s, np.clip(ly, 0, None) // s, np.clip(lz, 0, None) // s)
        if self.color is not None:
            return occ, np.array(self.color, dtype=np.uint8)
        # color by position inside the sponge so that neighbouring faces differ
        shape = occ.shape
        col = np.empty(shape + (3,), dtype=np.uint8)
        e = max(self.edge - 1, 1)
        col[..., 0] = np.broadcast_to(60 + (195 * np.clip(lx, 0, e)) // e, shape)
        col[..., 1] = np.broadcast_to(60 + (195 * np.clip(ly, 0, e)) // e, shape)
        col[..., 2] = np.broadcast_to(60 + (195 * np.clip(lz, 0, e)) // e, shape)
        return occ, col


def _lattice_hash(seed: int, octave: int, ix: np.ndarray, iz: np.ndarray) -> np.ndarray:
    """Uniform ``[0, 1)`` values at integer lattice points (splitmix64 finaliser)."""
    with np.errstate(over="ignore"):
        h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)) ^ (
            iz.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        )
        h ^= np.uint64((seed * 0x165667B19E3779F9 + octave * 0x27D4EB2F165667C5) & 0xFFFFFFFFFFFFFFFF)
        h ^= h >> np.uint64(30)
        h *= np.uint64(0xBF58476D1CE4E5B9)
        h ^= h >> np.uint64(27)
        h *= np.uint64(0x94D049BB133111EB)
        h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise_2d(seed: int, x: np.ndarray, z: np.ndarray, frequency: float, octaves: int = 4) -> np.ndarray:
    """Seeded fractal value noise in ``[0, 1]`` at integer sample positions."""
    total = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(z)))
    norm = 0.0
    for octave in range(octaves):
        f = frequency * (2 ** octave)
        amp = 0.5 ** octave
        fx, fz = np.asarray(x) * f, np.asarray(z) * f
        ix, iz = np.floor(fx).astype(np.int64), np.floor(fz).astype(np.int64)
        tx, tz = fx - ix, fz - iz
        tx = tx * tx * (3 - 2 * tx)
        tz = tz * tz * (3 - 2 * tz)
        a = _lattice_hash(seed, octave, ix, iz)
        b = _lattice_hash(seed, octave, ix + 1, iz)
        c = _lattice_hash(seed, octave, ix, iz + 1)
        d = _lattice_hash(seed, octave, ix + 1, iz + 1)
        total = total + amp * ((a * (1 - tx) + b * tx) * (1 - tz) + (c * (1 - tx) + d * tx) * tz)
        norm += amp
    return total / norm


TERRAIN_PALETTE = {
    "stone": (118, 116, 122),
    "dirt": (121, 85, 58),
    "grass": (86, 150, 62),
    "sand": (212, 196, 140),
    "snow": (238, 240, 246),
}


class _Terrain:
    def __init__(self, spec: SceneSpec, config: WorldConfig):
        p = spec.params
        wx, wy, wz = config.world_voxels
        self.seed = spec.seed
        self.base = float(p.get("base", 0.3 * wy))
        self.amplitude = float(p.get("amplitude", 0.2 * wy))
        self.frequency = float(p.get("frequency", 3.0 / max(wx, wz)))
        self.octaves = int(p.get("octaves", 4))
        if self.base - self.amplitude < 0 or self.base + self.amplitude > wy:
            raise BoundsError("terrain heights exceed world height")
        if self.frequency <= 0 or self.octaves < 1:
            raise ConfigError("terrain frequency and octaves must be positive")
        self.max_height = int(math.floor(self.base + self.amplitude))

    def heights(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Column heights: voxels with ``y < height`` are solid."""
        n = value_noise_2d(self.seed, x, z, self.frequency, self.octaves)
        return np.floor(self.base + self.amplitude * (2.0 * n - 1.0)).astype(np.int64)

    def bounds(self):
        return None

    def fill(self, origin, r):
        x0, y0, z0 = origin
        if y0 >= self.max_height:
            return np.zeros((r, r, r), dtype=bool), np.array((0, 0, 0), dtype=np.uint8)
        xs = np.arange(x0, x0 + r)[:, None]
        zs = np.arange(z0, z0 + r)[None, :]
        h = self.heights(xs, zs)[:, None, :]
        y = np.arange(y0, y0 + r)[None, :, None]
        occ = y < h
        depth = h - 1 - y
        rel = (h - (self.base - self.amplitude)) / max(2 * self.amplitude, 1.0)
        band = np.full((r, r, r), 0, dtype=np.int8)  # stone
        band = np.where(depth < 4, 1, band)  # dirt
        top = np.broadcast_to(np.where(rel < 0.2, 3, np.where(rel > 0.8, 4, 2)), band.shape)
        band = np.where(depth == 0, top, band)
        names = ("stone", "dirt", "grass", "sand", "snow")
        lut = np.array([TERRAIN_PALETTE[k] for k in names], dtype=np.int16)
        # small per-column tint keeps neighbouring columns distinguishable
        tint = ((xs * 73856093) ^ (zs * 19349663) ^ (self.seed * 83492791)) % 13 - 6
        col = np.clip(lut[band] + tint[:, None, :, None], 0, 255).astype(np.uint8)
        return occ, col


class _BoxesCity:
    def __init__(self, spec: SceneSpec, config: WorldConfig):
        p = spec.params
        wx, wy, wz = config.world_voxels
        count = int(p.get("count", 24))
        min_size = int(p.get("min_size", max(2, wx // 32)))
        max_size = int(p.get("max_size", max(min_size, wx // 8)))
        ground = int(p.get("ground", max(1, wy // 64)))
        if max_size >= min(wx, wz) or ground + max_size * 3 > wy or min_size < 1 or min_size > max_size:
            raise BoundsError("box sizes exceed world bounds")
        rng = np.random.default_rng(spec.seed & 0xFFFFFFFFFFFFFFFF)
        self.ground = ground
        self.boxes = []
        for _ in range(count):
            sx, sz = rng.integers(min_size, max_size + 1, size=2)
            sy = int(rng.integers(min_size, 3 * max_size + 1))
            x = int(rng.integers(0, wx - sx + 1))
            z = int(rng.integers(0, wz - sz + 1))
            color = tuple(int(c) for c in rng.integers(60, 240, size=3))
            self.boxes.append(((x, ground, z), (x + int(sx) - 1, ground + sy - 1, z + int(sz) - 1), color))

    def bounds(self):
        return None

    def fill(self, origin, r):
        x, y, z = _region(origin, r)
        occ = np.broadcast_to(y < self.ground, (r, r, r)).copy()
        col = np.zeros((r, r, r, 3), dtype=np.uint8)
        col[occ] = (96, 96, 100)
        for lo, hi, color in self.boxes:
            m = (x >= lo[0]) & (x <= hi[0]) & (y >= lo[1]) & (y <= hi[1]) & (z >= lo[2]) & (z <= hi[2])
            if m.any():
                m = np.broadcast_to(m, occ.shape)
                occ |= m
                col[m] = color
        return occ, col


GENERATORS = {
    "solid_box": _SolidBox,
    "menger": _Menger,
    "terrain": _Terrain,
    "boxes_city": _BoxesCity,
}


def generate(spec: SceneSpec, config: WorldConfig) -> DenseWorld:
    """Evaluate a procedural scene into its non-empty LOD-0 chunks."""
    try:
        gen = GENERATORS[spec.kind](spec, config)
    except KeyError:
        raise ConfigError(f"unknown scene kind {spec.kind!r}") from None
    r = config.chunk_res
    box = gen.bounds()
    chunks = {}
    for cx in range(config.world_dims[0]):
        for cy in range(config.world_dims[1]):
            for cz in range(config.world_dims[2]):
                origin = (cx * r, cy * r, cz * r)
                if box is not None and any(o + r <= l or o > h for o, l, h in zip(origin, *box)):
                    continue
                occ, col = gen.fill(origin, r)
                occ = np.broadcast_to(occ, (r, r, r))
                if occ.any():
                    chunks[ChunkKey(0, cx, cy, cz)] = DenseChunk(occ, col)
    return DenseWorld(config, chunks)
