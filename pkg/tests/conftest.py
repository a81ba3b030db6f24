import numpy as np
import pytest

from voxdag.lod import build_pyramid
from voxdag.scene import DenseChunk, SceneSpec, WorldConfig, chunkify, generate


def random_chunk(rng: np.random.Generator, res: int, p: float = 0.3, blobs: bool = True) -> DenseChunk:
    """Random occupancy with some coherent structure (so hash-consing has work to do)."""
    occ = rng.random((res, res, res)) < p
    if blobs:
        c = res // 4
        occ[:c, :c, :c] = True
        occ[-c:, -c:, :c] = False
        occ[:, :, -1] = rng.random() < 0.5
    if not occ.any():
        occ[0, 0, 0] = True
    col = rng.integers(0, 256, size=(res, res, res, 3), dtype=np.uint8)
    return DenseChunk(occ, col)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_config():
    return WorldConfig(chunk_res=16, voxel_size=1.0, world_dims=(4, 4, 4))


@pytest.fixture(scope="session")
def terrain16(small_config):
    return generate(SceneSpec.parse("terrain", seed=7), small_config)


@pytest.fixture(scope="session")
def terrain16_pyramid(terrain16, small_config):
    return build_pyramid(chunkify(terrain16), small_config)


@pytest.fixture(scope="session")
def city16(small_config):
    return generate(SceneSpec.parse("boxes_city?count=12", seed=3), small_config)


@pytest.fixture(scope="session")
def city16_pyramid(city16, small_config):
    return build_pyramid(chunkify(city16), small_config)


def lod0_snapshot(pyramid):
    from voxdag.streaming import snapshot_of

    return snapshot_of([pyramid.record(k) for k in sorted(pyramid.lod0_keys)], pyramid.config)


def make_world(spec: str, config: WorldConfig, seed: int = 42, e_c: float = 0.05):
    world = generate(SceneSpec.parse(spec, seed=seed), config)
    return world, build_pyramid(chunkify(world), config, e_c=e_c)


#: (number, PASS/FAIL line) pairs recorded by the acceptance suite
ACCEPTANCE: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
