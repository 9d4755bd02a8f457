import numpy as np
import pytest

from app.engine.model import ModelConfig, VRNNaug


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(input_dim=1, output_dim=1, latent_dim=2, hidden_size=3, mlp_min_width=3)


@pytest.fixture
def tiny_model(tiny_config) -> VRNNaug:
    return VRNNaug(tiny_config, seed=7)


@pytest.fixture
def env(tmp_path, monkeypatch):
    """
    Point every configured directory into tmp_path and disable log files.
    """
    monkeypatch.setenv("VRNNAUG_RUNS_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("VRNNAUG_DATA_DIR", str(tmp_path / "data"))
    monkeypatch.setenv("VRNNAUG_LOGS_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("VRNNAUG_LOG_TO_FILE", "false")
    monkeypatch.chdir(tmp_path)
    return tmp_path
