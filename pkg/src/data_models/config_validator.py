from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator


class Activation(str, Enum):
    """Enum for the hidden-layer activation of the per-variable MLPs"""

    SIGMOID = "sigmoid"


class LossKind(str, Enum):
    """Enum for the data-fit loss of the causal discovery objective"""

    LEAST_SQUARES = "least-squares"


class Variant(str, Enum):
    """Enum for the step-3 variant of CICME"""

    FREEZE = "freeze"
    LOSS_PENALTY = "loss-penalty"


class PValueMethod(str, Enum):
    """Enum for how the HSIC p-value is obtained"""

    GAMMA = "gamma"
    PERMUTATION = "permutation"


class Method(str, Enum):
    """Enum for the methods the harness can run"""

    CICME_F = "cicme-f"
    CICME_L = "cicme-l"
    NOTEARS_POOL = "notears-pool"
    NOTEARS_IND = "notears-ind"


class Experiment(str, Enum):
    """Enum for the synthetic experiment scenarios"""

    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    E4 = "E4"

    @property
    def number(self) -> int:
        return int(self.value[1:])


class ModelConfig(BaseModel):
    """
    Architecture and penalties of the per-variable MLPs.
    """

    hidden_units: int = Field(default=10, ge=1)
    num_hidden_layers: int = Field(default=1, ge=1)
    activation: Activation = Activation.SIGMOID
    lambda1: float = Field(default=0.01, ge=0)
    lambda2: float = Field(default=0.01, ge=0)
    loss_kind: LossKind = LossKind.LEAST_SQUARES

    @property
    def layer_sizes(self) -> List[int]:
        """Hidden and output layer widths (input width d excluded)."""
        return [self.hidden_units] * self.num_hidden_layers + [1]


class SolverConfig(BaseModel):
    """
    Augmented-Lagrangian schedule and inner L-BFGS-B settings.
    """

    rho_init: float = Field(default=1.0, gt=0)
    rho_max: float = Field(default=1e16, gt=0)
    rho_multiplier: float = Field(default=10.0, gt=1)
    h_decrease_ratio: float = Field(default=0.25, gt=0, lt=1)
    h_tol: float = Field(default=1e-8, gt=0)
    max_dual_steps: int = Field(default=100, ge=1)
    inner_max_iter: int = Field(default=15000, ge=1)
    inner_max_fun: int = Field(default=15000, ge=1)
    inner_gtol: float = Field(default=1e-5, gt=0)
    inner_ftol: float = Field(default=2.220446049250313e-09, gt=0)
    init_scale: float = Field(default=0.1, gt=0)

    @model_validator(mode="after")
    def rho_bounds(self):
        if not self.rho_init < self.rho_max:
            raise ValueError(
                f"rho_init must be smaller than rho_max. Given {self.rho_init}, "
                f"{self.rho_max}"
            )
        return self


class CicmeConfig(BaseModel):
    """
    Settings of the three CICME steps.
    """

    variant: Variant = Variant.FREEZE
    gamma: float = Field(default=10.0, ge=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)
    test_method: PValueMethod = PValueMethod.GAMMA
    n_permutations: int = Field(default=1000, ge=1)
    n_jobs: int = 1
    seed: int = Field(default=0, ge=0)
    model: ModelConfig = ModelConfig()
    solver: SolverConfig = SolverConfig()


class RunPlan(BaseModel):
    """
    The experiment sweep: which scenarios, sizes, repeats and methods to run.
    """

    experiments: List[Experiment]
    sample_sizes: List[int] = [10, 100, 1000]
    repeats: int = Field(default=100, ge=1)
    methods: List[Method]
    master_seed: int = Field(default=0, ge=0)
    output_dir: str
    jobs: int = 1
    threshold: float = Field(default=0.3, gt=0)
    save_results: bool = False
    cicme: CicmeConfig = CicmeConfig()

    @field_validator("experiments", "methods", "sample_sizes")
    @classmethod
    def non_empty_unique(cls, v):
        if len(v) == 0:
            raise ValueError("Selection must not be empty")
        if len(set(v)) != len(v):
            raise ValueError(f"Selection contains duplicates: {v}")
        return v

    @field_validator("sample_sizes")
    @classmethod
    def positive_sizes(cls, v):
        if any(n < 1 for n in v):
            raise ValueError(f"Sample sizes must be positive. Given {v}")
        return v


def load_cicme_config(config_dict: dict, seed: Optional[int] = None) -> CicmeConfig:
    """
    Build a CicmeConfig from the nested model-config dictionary
    ({"model": ..., "solver": ..., "cicme": ...}).

    Args:
        config_dict (dict): The configuration as a python dictionary.
        seed (Optional[int]): Master seed to store in the config.

    Raises:
        ValueError: if the configuration is invalid

    Returns:
        CicmeConfig: The validated configuration.
    """
    try:
        cicme_dict = dict(config_dict.get("cicme", {}))
        if seed is not None:
            cicme_dict["seed"] = seed
        return CicmeConfig(
            model=ModelConfig.model_validate(config_dict.get("model", {})),
            solver=SolverConfig.model_validate(config_dict.get("solver", {})),
            **cicme_dict,
        )
    except ValidationError as exc:
        raise ValueError(f"Invalid model config: {exc}") from exc


def validate_run_plan_dict(plan_dict: dict) -> RunPlan:
    """
    Validate a run plan given as a python dictionary.

    Raises:
        ValueError: if the plan is invalid

    Returns:
        RunPlan: validated run plan
    """
    try:
        return RunPlan.model_validate(plan_dict)
    except ValidationError as exc:
        raise ValueError(f"Invalid run plan: {exc}") from exc
