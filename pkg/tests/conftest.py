"""Pytest configuration and fixtures for hazeorder tests."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from imaging.core import AtmosphericLight, PlanarImage, ScalarMap
from services.synthesis import SynthParams, synthesize_haze


@dataclass
class Scene:
    """A clear image, its depth and the hazy image synthesized from them."""

    clear: PlanarImage
    depth: ScalarMap
    airlight: AtmosphericLight
    beta: float
    hazy: PlanarImage

    @property
    def transmission(self) -> ScalarMap:
        return ScalarMap(np.exp(-self.beta * self.depth.data))


def smooth_depth(rng: np.random.Generator, height: int, width: int, near: float = 0.3, far: float = 3.0) -> ScalarMap:
    """Far at the top, near at the bottom, with gentle low-frequency variation."""
    rows = np.linspace(1.0, 0.0, height)[:, None] * np.ones((1, width))
    bumps = gaussian_filter(rng.standard_normal((height, width)), sigma=max(height, width) / 6.0, mode='reflect')
    bumps /= max(np.abs(bumps).max(), 1e-12)
    profile = np.clip(rows + 0.1 * bumps, 0.0, 1.0)
    return ScalarMap(near + (far - near) * profile)


def noise_depth(rng: np.random.Generator, height: int, width: int, near: float = 0.3, far: float = 3.0) -> ScalarMap:
    """Depth drawn independently per pixel; carries no spatial order."""
    return ScalarMap(rng.uniform(near, far, size=(height, width)))


def textured_clear(rng: np.random.Generator, height: int, width: int, channels: int = 3) -> PlanarImage:
    """Independent uniform samples, so every window holds dark and bright pixels."""
    return PlanarImage(rng.uniform(0.0, 1.0, size=(channels, height, width)))


def make_scene(
    rng: np.random.Generator,
    height: int = 96,
    width: int = 96,
    channels: int = 3,
    beta: float = None,
    airlight=None,
    depth: str = "smooth",
) -> Scene:
    """Random scene with beta in [0.8, 1.5] and airlight in [0.8, 0.97] per channel unless given."""
    beta = float(rng.uniform(0.8, 1.5)) if beta is None else beta
    if airlight is None:
        airlight = rng.uniform(0.8, 0.97, size=channels)
    airlight = AtmosphericLight(np.asarray(airlight, dtype=np.float64))

    clear = textured_clear(rng, height, width, channels)
    d = smooth_depth(rng, height, width) if depth == "smooth" else noise_depth(rng, height, width)
    hazy = synthesize_haze(clear, SynthParams(airlight, d, beta))
    return Scene(clear, d, airlight, beta, hazy)


@pytest.fixture
def rng():
    """Seeded generator; every test sees the same stream."""
    return np.random.default_rng(20240115)


@pytest.fixture
def scene(rng) -> Scene:
    return make_scene(rng)


@pytest.fixture
def scene_factory(rng):
    """Builds further scenes from the shared generator."""
    return lambda **kwargs: make_scene(rng, **kwargs)


@pytest.fixture(scope="module")
def scene_batch():
    """One hundred random scenes, shared by the tests of a module."""
    batch_rng = np.random.default_rng(20240116)
    return [make_scene(batch_rng) for _ in range(100)]


@pytest.fixture(scope="module")
def fidelity_batch():
    """One hundred scenes with the airlight drawn from the whole [0.8, 1.0] range."""
    batch_rng = np.random.default_rng(20240117)
    return [
        make_scene(batch_rng, airlight=batch_rng.uniform(0.8, 1.0, size=3))
        for _ in range(100)
    ]


@pytest.fixture
def gray_scene(rng) -> Scene:
    return make_scene(rng, channels=1, airlight=[0.9])


@pytest.fixture
def small_config():
    """Pipeline settings scaled to small test images."""
    from config import DehazeConfig
    return DehazeConfig(r=15, guided_radius=15, apply_clahe=False)


@pytest.fixture
def work_dir(tmp_path) -> Path:
    """Scratch directory for files written by a test."""
    path = tmp_path / "work"
    path.mkdir()
    return path


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Keep HAZEORDER_* variables and a stray hazeorder.json out of every test."""
    import os
    for key in list(os.environ):
        if key.startswith("HAZEORDER_"):
            monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)


# Configuration for pytest
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests as integration tests"
    )
    config.addinivalue_line(
        "markers", "unit: marks tests as unit tests"
    )
    config.addinivalue_line(
        "markers", "performance: marks tests as performance tests"
    )
