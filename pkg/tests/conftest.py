"""Shared fixtures: bundled presets and small test models."""

import json
from importlib import resources

import pytest

from vtac import FpgaSpec, ViTConfig, expand_model


def preset_path(name: str) -> str:
    return str(resources.files("vtac") / f"presets/{name}.json")


@pytest.fixture(scope="session")
def zcu102() -> FpgaSpec:
    """The shipped, calibrated board file."""
    return FpgaSpec.from_json(preset_path("zcu102"))


@pytest.fixture(scope="session")
def deit_base() -> ViTConfig:
    return ViTConfig.from_json(preset_path("deit-base"))


@pytest.fixture(scope="session")
def deit_tiny() -> ViTConfig:
    return ViTConfig.from_json(preset_path("deit-tiny"))


@pytest.fixture(scope="session")
def base_schedule(deit_base):
    return expand_model(deit_base)


@pytest.fixture(scope="session")
def toy_config() -> ViTConfig:
    """2-layer, 32-wide encoder; small enough for functional simulation."""
    return ViTConfig(
        image_height=32, image_width=32, in_channels=3, patch_size=8,
        embed_dim=32, depth=2, num_heads=2, mlp_ratio=4, num_classes=10,
        name="toy",
    )


@pytest.fixture()
def params8_file(tmp_path):
    """A packing-aligned 8-bit design as a JSON params file."""
    params = {
        "tile_m": 112, "tile_n": 4, "tile_m_q": 200, "tile_n_q": 8,
        "pack": 4, "pack_q": 8, "head_par": 4, "act_bits": 8,
    }
    path = tmp_path / "params8.json"
    path.write_text(json.dumps(params))
    return str(path)
