"""
Tests for run configuration files and metadata sidecars.
"""

from pathlib import Path

import pytest

from meshing import MeshPattern
from utils.run_config import (
    ConfigError, RunConfig, load_config, read_metadata, write_metadata,
)

CONFIG_DIR = Path(__file__).parent.parent / "config"


def test_defaults():
    config = RunConfig()
    assert config.experiment == "cavity"
    assert config.levels == (8, 16, 32, 64)
    assert config.mesh_pattern is MeshPattern.MIRRORED
    assert config.slice_height == 0.5


def test_load_config_file_with_overrides(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("# comment\nexperiment=manufactured\nmethods=hdg, cg\nk=1,2\nlevels=2,4\n")
    config = load_config(path, kappa=-3.0, workers=None)
    assert config.experiment == "manufactured"
    assert config.methods == ("hdg", "cg")
    assert config.k == (1, 2)
    assert config.levels == (2, 4)
    assert config.kappa == -3.0
    assert config.workers == 1


@pytest.mark.parametrize("name", ["symmetric.env", "nonsymmetric.env", "cavity_slice.env", "metamaterial.env",
                                  "manufactured.env"])
def test_shipped_presets_are_valid(name):
    load_config(CONFIG_DIR / name)


def test_metamaterial_preset_slices_at_mid_height():
    config = load_config(CONFIG_DIR / "metamaterial.env")
    assert config.experiment == "metamaterial"
    assert config.slice_height == 1.0


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("does/not/exist.env")


def test_unknown_key(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("colour=blue\n")
    with pytest.raises(ConfigError, match="colour"):
        load_config(path)


@pytest.mark.parametrize("overrides", [
    {"experiment": "waveguide"},
    {"methods": ("hdg", "fem")},
    {"methods": ("cg",), "k": (0, 1)},
    {"levels": (8, 8)},
    {"levels": (16, 8)},
    {"kappa": 0.5},
    {"sigma_plus": 0.0},
    {"gamma": -1.0},
    {"pattern": "zigzag"},
    {"workers": 0},
    {"slice_points": 1},
    {"k": "one"},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(**overrides)


def test_metadata_round_trip(tmp_path):
    config = RunConfig(experiment="metamaterial", methods=("hdg", "cg"), k=(3,), levels=(32,),
                       kappa=-1.6, output_dir="out dir/with space", slice_x2=1.0)
    path = write_metadata(tmp_path / "run.meta.env", config, {"cells": "20480", "note": "a b"})
    restored, extra = read_metadata(path)
    assert restored == config
    assert extra == {"cells": "20480", "note": "a b"}


def test_metadata_rejects_colliding_keys(tmp_path):
    with pytest.raises(ConfigError):
        write_metadata(tmp_path / "run.meta.env", RunConfig(), {"kappa": "-2"})


def test_optional_fields_round_trip_as_empty():
    env = RunConfig().to_env()
    assert env["quadrature_degree"] == ""
    assert RunConfig.from_mapping(env) == RunConfig()
