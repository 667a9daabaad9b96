from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Union

import numpy as np

from data_models.config_validator import PValueMethod
from logger import get_logger
from notears.acyclicity import NumericalError
from notears.mlp import ModelSet, forward
from stability.hsic import (
    KernelMatrices,
    ResidualSample,
    gamma_pvalue_from_kernels,
    permutation_pvalue_from_kernels,
)
from utils import derive_seed

logger = get_logger(task_name="stability")


@dataclass(frozen=True)
class VariableStability:
    """Outcome of the residual/domain independence test for one variable."""

    index: int
    name: str
    statistic: float
    p_value: float
    bandwidth: float
    method: str
    # the Gamma moments were degenerate and the permutation p-value was used
    fallback: bool = False
    error: Optional[str] = None


@dataclass(frozen=True)
class StabilityReport:
    """
    Per-variable HSIC statistics and p-values with the verdicts they imply
    at level alpha. A variable is stable iff its p-value exceeds alpha.
    """

    alpha: float
    variables: List[VariableStability] = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1). Given {self.alpha}")

    @property
    def d(self) -> int:
        return len(self.variables)

    @property
    def verdicts(self) -> List[bool]:
        return [v.error is None and v.p_value > self.alpha for v in self.variables]

    @property
    def stable_set(self) -> List[int]:
        return [v.index for v, stable in zip(self.variables, self.verdicts) if stable]

    @property
    def p_values(self) -> np.ndarray:
        return np.array([v.p_value for v in self.variables])

    def with_alpha(self, alpha: float) -> "StabilityReport":
        """Same statistics and p-values judged at another level."""
        return replace(self, alpha=alpha)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "stable_set": self.stable_set,
            "variables": [
                {**asdict(v), "verdict": "stable" if stable else "unstable"}
                for v, stable in zip(self.variables, self.verdicts)
            ],
        }

    @classmethod
    def from_dict(cls, document: dict) -> "StabilityReport":
        variables = []
        for entry in document["variables"]:
            entry = {k: v for k, v in entry.items() if k != "verdict"}
            variables.append(VariableStability(**entry))
        return cls(alpha=document["alpha"], variables=variables)


def run_variable_test(
    z: ResidualSample,
    index: int,
    name: str,
    method: Union[PValueMethod, str] = PValueMethod.GAMMA,
    n_permutations: int = 1000,
    seed: int = 0,
) -> VariableStability:
    """
    Runs the independence test for one variable's residuals.

    Degenerate Gamma moments fall back to the permutation p-value and set
    the `fallback` flag.
    """
    method = PValueMethod(method)
    kernels = KernelMatrices(z)
    statistic = kernels.statistic()
    fallback = False
    if method == PValueMethod.GAMMA:
        try:
            p_value = gamma_pvalue_from_kernels(kernels)
        except NumericalError as exc:
            logger.warning(f"{name}: {exc}; using the permutation p-value")
            p_value = permutation_pvalue_from_kernels(kernels, n_permutations, seed)
            fallback = True
    else:
        p_value = permutation_pvalue_from_kernels(kernels, n_permutations, seed)
    return VariableStability(
        index=index,
        name=name,
        statistic=statistic,
        p_value=p_value,
        bandwidth=kernels.bandwidth,
        method=method.value,
        fallback=fallback,
    )


def detect_stable(
    models: ModelSet,
    X: np.ndarray,
    D: np.ndarray,
    alpha: float = 0.05,
    method: Union[PValueMethod, str] = PValueMethod.GAMMA,
    n_permutations: int = 1000,
    seed: int = 0,
    variable_names: Optional[Sequence[str]] = None,
) -> StabilityReport:
    """
    Tests every variable's pooled-model residuals for independence of the
    domain index.

    Args:
        models (ModelSet): Models fitted on the pooled data.
        X (np.ndarray): The pooled n x d data the models were fitted on.
        D (np.ndarray): Domain label of every row of X.
        alpha (float): Significance level; p-value > alpha means stable.
        method (PValueMethod): Gamma approximation or permutation test.
        n_permutations (int): Permutations for the permutation p-value.
        seed (int): Seed of the permutations; variable j uses a derived stream.
        variable_names (Optional[Sequence[str]]): Names used in logs and the report.

    Returns:
        StabilityReport: One entry per variable. A variable whose test
            fails is reported unstable with the error attached.
    """
    X = np.asarray(X, dtype=np.float64)
    D = np.asarray(D)
    if X.shape[1] != models.d:
        raise ValueError(f"Data has {X.shape[1]} columns for {models.d} models")
    if D.shape[0] != X.shape[0]:
        raise ValueError(f"Got {D.shape[0]} domain labels for {X.shape[0]} rows")
    names = list(variable_names) if variable_names is not None else [
        f"X{j + 1}" for j in range(models.d)
    ]
    if len(np.unique(D)) < 2:
        logger.warning("Only one domain present; the stability test has no power")

    variables = []
    for j in range(models.d):
        try:
            residuals = X[:, j] - forward(models[j], X, models.config)
            variables.append(
                run_variable_test(
                    ResidualSample(residuals=residuals, domains=D),
                    index=j,
                    name=names[j],
                    method=method,
                    n_permutations=n_permutations,
                    seed=derive_seed(seed, j),
                )
            )
        except (ValueError, ArithmeticError) as exc:
            logger.warning(f"Stability test of {names[j]} failed, marking it unstable: {exc}")
            variables.append(
                VariableStability(
                    index=j,
                    name=names[j],
                    statistic=float("nan"),
                    p_value=0.0,
                    bandwidth=float("nan"),
                    method=PValueMethod(method).value,
                    error=str(exc),
                )
            )
    report = StabilityReport(alpha=alpha, variables=variables)
    logger.info(
        "Stable variables: "
        + (", ".join(names[j] for j in report.stable_set) or "none")
    )
    return report
