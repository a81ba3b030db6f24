"""Keyframed camera paths: one ``t px py pz lx ly lz fov`` line per keyframe."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..pipeline.camera import Camera


@dataclass(frozen=True)
class Keyframe:
    t: float
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    fov: float


class CameraPath:
    def __init__(self, keyframes: list[Keyframe]):
        if not keyframes:
            raise ConfigError("camera path needs at least one keyframe")
        times = [k.t for k in keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("keyframe times must be strictly increasing")
        self.keyframes = list(keyframes)

    @classmethod
    def parse(cls, text: str) -> "CameraPath":
        frames = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ConfigError(f"line {lineno}: expected 8 fields 't px py pz lx ly lz fov'")
            v = [float(p) for p in parts]
            frames.append(Keyframe(v[0], tuple(v[1:4]), tuple(v[4:7]), v[7]))
        return cls(frames)

    @classmethod
    def load(cls, path) -> "CameraPath":
        return cls.parse(Path(path).read_text())

    def dumps(self) -> str:
        return "".join(f"{k.t!r} {' '.join(repr(float(c)) for c in (*k.position, *k.look_at))} {k.fov!r}\n"
                       for k in self.keyframes)

    @property
    def duration(self) -> float:
        return self.keyframes[-1].t - self.keyframes[0].t

    def at(self, t: float) -> Camera:
        """Linear interpolation of position, look-at and FOV (clamped to the path ends)."""
        ks = self.keyframes
        if t <= ks[0].t:
            k = ks[0]
            return Camera(k.position, k.look_at, k.fov)
        if t >= ks[-1].t:
            k = ks[-1]
            return Camera(k.position, k.look_at, k.fov)
        i = int(np.searchsorted([k.t for k in ks], t, side="right")) - 1
        a, b = ks[i], ks[i + 1]
        u = (t - a.t) / (b.t - a.t)
        lerp = lambda p, q: tuple(float(x + u * (y - x)) for x, y in zip(p, q))
        return Camera(lerp(a.position, b.position), lerp(a.look_at, b.look_at), a.fov + u * (b.fov - a.fov))

    def sample(self, rate: float | None = None) -> list[Camera]:
        """Cameras every ``1 / rate`` seconds (both ends included); keyframes only if ``rate`` is None."""
        if rate is None or len(self.keyframes) == 1:
            return [Camera(k.position, k.look_at, k.fov) for k in self.keyframes]
        if rate <= 0:
            raise ConfigError("sampling rate must be positive")
        n = int(np.floor(self.duration * rate + 1e-9)) + 1
        t0 = self.keyframes[0].t
        return [self.at(t0 + i / rate) for i in range(n)]


def random_path(config, n: int = 10, seed: int = 42, fov: float = 60.0,
                height: tuple[float, float] = (0.35, 0.8)) -> CameraPath:
    """``n`` seeded sample cameras looking across the world, one second apart."""
    rng = np.random.default_rng(seed)
    ext = config.world_extent()
    frames = []
    for i in range(n):
        p = rng.uniform(0.1, 0.9, 3) * ext
        p[1] = rng.uniform(*height) * ext[1]
        target = rng.uniform(0.2, 0.8, 3) * ext
        target[1] = rng.uniform(0.1, 0.4) * ext[1]
        frames.append(Keyframe(float(i), tuple(float(v) for v in p), tuple(float(v) for v in target), fov))
    return CameraPath(frames)
