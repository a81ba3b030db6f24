"""Pinhole camera and render settings."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

TILE = 8


@dataclass(frozen=True)
class RenderConfig:
    width: int = 256
    height: int = 256
    fov_y: float = 60.0
    near: float = 0.05
    far: float = 4096.0
    background: tuple[int, int, int] = (150, 190, 230)
    light_dir: tuple[float, float, float] = (0.35, 0.85, 0.4)
    culling: str = "sound"  # none | sound | paper

    def __post_init__(self):
        if self.width < TILE or self.height < TILE or self.width % TILE or self.height % TILE:
            raise ConfigError("width and height must be multiples of 8 (at least 8)")
        if not 0 < self.near < self.far:
            raise ConfigError("need 0 < near < far")
        if self.culling not in ("none", "sound", "paper"):
            raise ConfigError(f"unknown culling mode {self.culling!r}")
        if not 0 < self.fov_y < 180:
            raise ConfigError("fov_y must lie in (0, 180) degrees")
        l = np.asarray(self.light_dir, dtype=np.float64)
        n = float(np.linalg.norm(l))
        if n == 0:
            raise ConfigError("light_dir must be non-zero")
        object.__setattr__(self, "light_dir", tuple(float(v) for v in l / n))

    @property
    def tiles(self) -> tuple[int, int]:
        """Tile grid as ``(tiles_x, tiles_y)``."""
        return self.width // TILE, self.height // TILE


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    fov_y: float | None = None
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "look_at", tuple(float(v) for v in self.look_at))
        if np.allclose(self.position, self.look_at):
            raise ConfigError("camera position and look_at coincide")

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.position, dtype=np.float64)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(forward, right, up)`` orthonormal vectors."""
        f = np.array(self.look_at, dtype=np.float64) - self.origin
        f /= np.linalg.norm(f)
        up = np.array(self.up, dtype=np.float64)
        r = np.cross(f, up)
        if np.linalg.norm(r) < 1e-9:
            r = np.cross(f, np.array([0.0, 0.0, 1.0]))
        r /= np.linalg.norm(r)
        u = np.cross(r, f)
        return f, r, u

    def _screen(self, config: RenderConfig):
        fov = self.fov_y if self.fov_y is not None else config.fov_y
        th = math.tan(math.radians(fov) / 2.0)
        return th * config.width / config.height, th

    def _dirs(self, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
        f, r, u = self.basis()
        d = f[None, None, :] + sx[..., None] * r[None, None, :] + sy[..., None] * u[None, None, :]
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def pixel_rays(self, config: RenderConfig) -> np.ndarray:
        """Unit directions through pixel centers, shape ``(H, W, 3)``; row 0 is the top."""
        ax, ay = self._screen(config)
        px = (2.0 * (np.arange(config.width) + 0.5) / config.width - 1.0) * ax
        py = (1.0 - 2.0 * (np.arange(config.height) + 0.5) / config.height) * ay
        sx, sy = np.meshgrid(px, py)
        return self._dirs(sx, sy)

    def edge_rays(self, config: RenderConfig, step: int = TILE) -> np.ndarray:
        """Directions through pixel-grid corners every ``step`` pixels, ``(H/step+1, W/step+1, 3)``."""
        ax, ay = self._screen(config)
        px = (2.0 * np.arange(0, config.width + 1, step) / config.width - 1.0) * ax
        py = (1.0 - 2.0 * np.arange(0, config.height + 1, step) / config.height) * ay
        sx, sy = np.meshgrid(px, py)
        return self._dirs(sx, sy)
