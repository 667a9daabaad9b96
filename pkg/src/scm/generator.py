from typing import List, Union

import numpy as np

from data_models.config_validator import Experiment
from data_models.scm_validator import (
    DomainOverrides,
    DomainSpec,
    Edge,
    EdgeOverride,
    FcmSpec,
    NoiseOverride,
)
from logger import get_logger
from schema.dataset_schema import MultiDomainDataset
from utils import derive_seed

logger = get_logger(task_name="scm")

NUM_DOMAINS = 3
VARIABLE_NAMES = ["X1", "X2", "X3", "X4"]
# (parent, child) of the edge whose weight carries the leakage factor H
LEAKAGE_EDGE = (2, 3)
SHIFTED_VARIABLE = 1
SHIFT_LOW, SHIFT_HIGH = 0.5, 2.0

# seed keys of make_experiment's streams; domains use their 1-based index
PARAMETER_STREAM = 0


def leakage_test_fcm(leakage: float = 1.0) -> FcmSpec:
    """
    The four-variable leakage-test system: temperature X1 and flow rate X2
    drive the pre-test pressure X3, which drives the post-test pressure X4
    through the leakage factor.

        X1 := N1, X2 := N2, X3 := X1 + X2 + N3, X4 := leakage * X3 + N4

    with standard Gaussian noises.
    """
    return FcmSpec(
        d=4,
        edges=[
            Edge(parent=0, child=2, weight=1.0),
            Edge(parent=1, child=2, weight=1.0),
            Edge(parent=LEAKAGE_EDGE[0], child=LEAKAGE_EDGE[1], weight=leakage),
        ],
        noise_means=[0.0] * 4,
        noise_stds=[1.0] * 4,
        variable_names=list(VARIABLE_NAMES),
    )


def draw_shift(rng: np.random.Generator) -> float:
    """Draws from [-2, -0.5] U [0.5, 2] as a fair sign times Uniform[0.5, 2]."""
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return sign * rng.uniform(SHIFT_LOW, SHIFT_HIGH)


def sample_domain(spec: Union[DomainSpec, FcmSpec], n: int, seed: int) -> np.ndarray:
    """
    Samples n rows from a domain's linear additive-noise model.

    Variables are computed in topological order as the weighted sum of their
    parents plus Gaussian noise; a noise std of 0 yields the constant mean.

    Args:
        spec (Union[DomainSpec, FcmSpec]): The (domain) model to sample.
        n (int): Number of samples, at least 1.
        seed (int): Seed of the sampling stream.

    Returns:
        np.ndarray: n x d sample matrix.
    """
    if n < 1:
        raise ValueError(f"Sample count must be at least 1. Given {n}")
    fcm = spec.effective_spec() if isinstance(spec, DomainSpec) else spec
    rng = np.random.default_rng(seed)

    means = np.asarray(fcm.noise_means)
    stds = np.asarray(fcm.noise_stds)
    noise = means + stds * rng.standard_normal((n, fcm.d))

    weights = fcm.weight_matrix()
    samples = np.zeros((n, fcm.d))
    for j in fcm.topological_order():
        samples[:, j] = samples @ weights[:, j] + noise[:, j]
    return samples


def make_domain_specs(experiment: Union[Experiment, str], seed: int) -> List[DomainSpec]:
    """
    Builds the three domain models of a scenario.

    E1: each domain draws its own leakage factor H.
    E2: as E1, but H is 0 in one uniformly chosen domain (edge X3 -> X4 cut).
    E3: H = 1; each domain draws its own mean for N2 (std stays 1).
    E4: H = 1; each domain fixes N2 to its own drawn constant (std 0).

    Args:
        experiment (Union[Experiment, str]): Scenario id.
        seed (int): Seed of the scenario's parameter draws.

    Returns:
        List[DomainSpec]: One spec per domain, k = 1..3.
    """
    experiment = Experiment(experiment)
    rng = np.random.default_rng(derive_seed(seed, PARAMETER_STREAM))
    base = leakage_test_fcm()
    parent, child = LEAKAGE_EDGE

    specs = []
    if experiment in (Experiment.E1, Experiment.E2):
        leakages = [draw_shift(rng) for _ in range(NUM_DOMAINS)]
        if experiment == Experiment.E2:
            cut_domain = int(rng.integers(NUM_DOMAINS))
            leakages[cut_domain] = 0.0
        for k, leakage in enumerate(leakages, start=1):
            overrides = DomainOverrides(
                edge_weights=[EdgeOverride(parent=parent, child=child, weight=leakage)]
            )
            specs.append(DomainSpec(base=base, k=k, overrides=overrides))
    else:
        std = 1.0 if experiment == Experiment.E3 else 0.0
        for k in range(1, NUM_DOMAINS + 1):
            overrides = DomainOverrides(
                noise=[
                    NoiseOverride(
                        variable=SHIFTED_VARIABLE, mean=draw_shift(rng), std=std
                    )
                ]
            )
            specs.append(DomainSpec(base=base, k=k, overrides=overrides))
    return specs


def make_experiment(
    experiment: Union[Experiment, str], n: int, seed: int
) -> MultiDomainDataset:
    """
    Generates the dataset of one scenario with n samples per domain.

    All randomness derives from `seed`: the scenario parameters use one
    stream and every domain samples from its own stream keyed by its index.

    Args:
        experiment (Union[Experiment, str]): Scenario id (E1..E4).
        n (int): Per-domain sample count.
        seed (int): Master seed of the dataset.

    Returns:
        MultiDomainDataset: Three domains with their ground truth attached.
    """
    if n < 1:
        raise ValueError(f"Per-domain sample count must be at least 1. Given {n}")
    experiment = Experiment(experiment)
    specs = make_domain_specs(experiment, seed)
    domains = [sample_domain(spec, n, derive_seed(seed, spec.k)) for spec in specs]
    logger.debug(f"Sampled {experiment.value} with n={n}, seed={seed}")
    return MultiDomainDataset(
        domains=domains,
        variable_names=specs[0].base.variable_names,
        truth=specs,
        seed=seed,
        experiment=experiment.value,
    )
