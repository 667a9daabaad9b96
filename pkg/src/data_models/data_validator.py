from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator


def get_domain_data_validator(variable_names: List[str]) -> type:
    """
    Returns a dynamic Pydantic data validator class for per-domain sample
    matrices over the given variables.

    The resulting validator checks the following:

    1. That at least one domain is given.
    2. That every domain matrix is two-dimensional with at least one row.
    3. That every domain matrix has one column per variable name.
    4. That all values are finite real numbers.

    If any of these checks fail, the validator will raise a ValueError.

    Args:
        variable_names (List[str]): Column labels shared by all domains.

    Returns:
        type: A dynamic Pydantic BaseModel class for data validation.
    """

    class DomainDataValidator(BaseModel):
        model_config = ConfigDict(arbitrary_types_allowed=True)

        domains: List[np.ndarray]

        @field_validator("domains")
        @classmethod
        def validate_domains(cls, domains):
            if len(domains) == 0:
                raise ValueError("At least one domain is required")

            d = len(variable_names)
            for k, matrix in enumerate(domains, start=1):
                if matrix.ndim != 2:
                    raise ValueError(
                        f"Domain {k} must be a 2-D matrix. Given shape {matrix.shape}"
                    )
                if matrix.shape[0] < 1:
                    raise ValueError(f"Domain {k} has no samples")
                if matrix.shape[1] != d:
                    raise ValueError(
                        f"Domain {k} has {matrix.shape[1]} columns, expected {d} "
                        f"({', '.join(variable_names)})"
                    )
                if not np.issubdtype(matrix.dtype, np.number):
                    raise ValueError(f"Domain {k} contains non-numeric data")
                if not np.all(np.isfinite(matrix)):
                    raise ValueError(f"Domain {k} contains NaN or infinite values")
            return domains

    return DomainDataValidator


def validate_domain_data(
    domains: List[np.ndarray], variable_names: List[str]
) -> List[np.ndarray]:
    """
    Validates per-domain sample matrices.

    Args:
        domains (List[np.ndarray]): One n_k x d matrix per domain.
        variable_names (List[str]): Column labels shared by all domains.

    Returns:
        List[np.ndarray]: The validated matrices as float64 arrays.
    """
    DomainDataValidator = get_domain_data_validator(variable_names)
    try:
        validated = DomainDataValidator(
            domains=[np.asarray(matrix) for matrix in domains]
        )
    except ValidationError as exc:
        raise ValueError(f"Data validation failed: {str(exc)}") from exc
    return [matrix.astype(np.float64, copy=False) for matrix in validated.domains]
