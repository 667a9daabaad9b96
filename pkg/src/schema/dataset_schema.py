import os
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from data_models.data_validator import validate_domain_data
from data_models.scm_validator import DomainSpec, validate_domain_spec_dict
from utils import read_json_as_dict, save_dataframe_as_csv, save_json

SIDECAR_FILE_NAME = "dataset.json"
POOLED_FILE_NAME = "pooled.csv"
DOMAIN_COLUMN = "domain"


def domain_file_name(k: int) -> str:
    return f"domain_{k}.csv"


class MultiDomainDataset:
    """
    K per-domain sample matrices over the same d variables.

    Domains are numbered 1..K in the order given. The pooled view stacks the
    domain matrices row-wise in domain order and labels every row with its
    domain index. Synthetic datasets also carry their ground-truth
    DomainSpecs and the seed they were sampled with.
    """

    def __init__(
        self,
        domains: List[np.ndarray],
        variable_names: List[str],
        truth: Optional[List[DomainSpec]] = None,
        seed: Optional[int] = None,
        experiment: Optional[str] = None,
    ) -> None:
        """
        Initializes a new instance of the `MultiDomainDataset` class.

        Args:
            domains (List[np.ndarray]): One n_k x d sample matrix per domain.
            variable_names (List[str]): Column labels shared by all domains.
            truth (Optional[List[DomainSpec]]): Ground-truth spec per domain.
            seed (Optional[int]): Seed the data was sampled with.
            experiment (Optional[str]): Scenario id the data belongs to.
        """
        self._domains = validate_domain_data(domains, variable_names)
        self._variable_names = list(variable_names)
        if truth is not None and len(truth) != len(self._domains):
            raise ValueError(
                f"Got {len(truth)} ground-truth specs for {len(self._domains)} domains"
            )
        self._truth = truth
        self.seed = seed
        self.experiment = experiment

    @property
    def num_domains(self) -> int:
        """The number of domains K."""
        return len(self._domains)

    @property
    def d(self) -> int:
        """The number of variables."""
        return len(self._variable_names)

    @property
    def variable_names(self) -> List[str]:
        return list(self._variable_names)

    @property
    def domains(self) -> List[np.ndarray]:
        return list(self._domains)

    @property
    def sample_sizes(self) -> List[int]:
        return [matrix.shape[0] for matrix in self._domains]

    @property
    def truth(self) -> Optional[List[DomainSpec]]:
        return self._truth

    def domain(self, k: int) -> np.ndarray:
        """
        Gets the sample matrix of one domain.

        Args:
            k (int): 1-based domain index.

        Returns:
            np.ndarray: The n_k x d matrix of domain k.
        """
        if not 1 <= k <= self.num_domains:
            raise ValueError(f"Domain index {k} outside [1, {self.num_domains}]")
        return self._domains[k - 1]

    def true_adjacencies(self) -> List[np.ndarray]:
        """Binary ground-truth graph per domain."""
        if self._truth is None:
            raise ValueError("Dataset carries no ground truth")
        return [spec.true_adjacency() for spec in self._truth]

    def pool(self) -> Tuple[np.ndarray, np.ndarray]:
        return pool(self._domains)


def pool(domains: List[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row-concatenates domain matrices in domain order.

    Args:
        domains (List[np.ndarray]): One n_k x d matrix per domain.

    Returns:
        Tuple[np.ndarray, np.ndarray]: The pooled (sum n_k) x d matrix and the
            aligned domain index vector with values in {1, ..., K}.
    """
    widths = {matrix.shape[1] for matrix in domains}
    if len(widths) != 1:
        raise ValueError(f"Domains disagree on the number of variables: {sorted(widths)}")
    pooled = np.concatenate(domains, axis=0)
    domain_index = np.concatenate(
        [np.full(matrix.shape[0], k, dtype=int) for k, matrix in enumerate(domains, 1)]
    )
    return pooled, domain_index


def split(pooled: np.ndarray, domain_index: np.ndarray) -> List[np.ndarray]:
    """
    Inverse of `pool`: splits a pooled matrix back into per-domain matrices.

    Args:
        pooled (np.ndarray): The pooled sample matrix.
        domain_index (np.ndarray): Domain label of every row, values in {1..K}.

    Returns:
        List[np.ndarray]: One matrix per domain, ordered by domain label.
    """
    domain_index = np.asarray(domain_index)
    if domain_index.shape[0] != pooled.shape[0]:
        raise ValueError(
            f"Domain index has {domain_index.shape[0]} entries for "
            f"{pooled.shape[0]} rows"
        )
    return [pooled[domain_index == k] for k in np.unique(domain_index)]


def save_dataset(dataset: MultiDomainDataset, save_dir_path: str) -> None:
    """
    Save a dataset as one CSV per domain, a pooled CSV with a `domain`
    column, and a JSON sidecar with the ground truth and seed.

    Args:
        dataset (MultiDomainDataset): The dataset to be saved.
        save_dir_path (str): The dir path to save the dataset to.
    """
    os.makedirs(save_dir_path, exist_ok=True)
    for k, matrix in enumerate(dataset.domains, start=1):
        save_dataframe_as_csv(
            pd.DataFrame(matrix, columns=dataset.variable_names),
            os.path.join(save_dir_path, domain_file_name(k)),
            float_format=None,
        )
    pooled, domain_index = dataset.pool()
    pooled_df = pd.DataFrame(pooled, columns=dataset.variable_names)
    pooled_df[DOMAIN_COLUMN] = domain_index
    save_dataframe_as_csv(
        pooled_df, os.path.join(save_dir_path, POOLED_FILE_NAME), float_format=None
    )
    sidecar = {
        "experiment": dataset.experiment,
        "seed": dataset.seed,
        "num_domains": dataset.num_domains,
        "variable_names": dataset.variable_names,
        "truth": (
            None
            if dataset.truth is None
            else [spec.model_dump(mode="json") for spec in dataset.truth]
        ),
    }
    save_json(os.path.join(save_dir_path, SIDECAR_FILE_NAME), sidecar)


def load_dataset(save_dir_path: str) -> MultiDomainDataset:
    """
    Load a dataset written by `save_dataset`.

    Args:
        save_dir_path (str): The path to load the dataset from.

    Returns:
        MultiDomainDataset: The loaded dataset.
    """
    sidecar_path = os.path.join(save_dir_path, SIDECAR_FILE_NAME)
    if not os.path.exists(sidecar_path):
        raise FileNotFoundError(f"No such file or directory: '{sidecar_path}'")
    sidecar = read_json_as_dict(sidecar_path)
    names = sidecar["variable_names"]
    domains = []
    for k in range(1, sidecar["num_domains"] + 1):
        domain_path = os.path.join(save_dir_path, domain_file_name(k))
        if not os.path.exists(domain_path):
            raise FileNotFoundError(f"No such file or directory: '{domain_path}'")
        frame = pd.read_csv(domain_path, float_precision="round_trip")
        domains.append(frame[names].to_numpy(dtype=np.float64))
    truth = sidecar.get("truth")
    return MultiDomainDataset(
        domains=domains,
        variable_names=names,
        truth=None if truth is None else [validate_domain_spec_dict(t) for t in truth],
        seed=sidecar.get("seed"),
        experiment=sidecar.get("experiment"),
    )
