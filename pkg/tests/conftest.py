import numpy as np
import pytest

from data_models.config_validator import CicmeConfig, ModelConfig, SolverConfig
from scm.generator import make_experiment


@pytest.fixture
def small_model_config() -> ModelConfig:
    """A narrow MLP keeping optimizer tests fast."""
    return ModelConfig(hidden_units=3)


@pytest.fixture
def fast_solver_config() -> SolverConfig:
    """Short augmented-Lagrangian schedule; fits need not converge."""
    return SolverConfig(max_dual_steps=4, inner_max_iter=60, inner_max_fun=120)


@pytest.fixture
def fast_cicme_config(small_model_config, fast_solver_config) -> CicmeConfig:
    return CicmeConfig(seed=11, model=small_model_config, solver=fast_solver_config)


@pytest.fixture
def e1_dataset():
    """Experiment E1 with 30 samples per domain."""
    return make_experiment("E1", 30, seed=5)


@pytest.fixture
def e2_dataset():
    return make_experiment("E2", 30, seed=8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
