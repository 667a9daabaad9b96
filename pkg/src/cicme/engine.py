import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from data_models.config_validator import CicmeConfig, Method, Variant
from evaluation.metrics import DEFAULT_THRESHOLD, threshold
from logger import get_logger
from notears.mlp import (
    ModelSet,
    extract_adjacency,
    init_model_set,
    load_model_set,
    save_model_set,
)
from notears.solver import FitResult, fit
from schema.dataset_schema import MultiDomainDataset
from stability.detector import StabilityReport, detect_stable
from utils import Stopwatch, derive_seed, read_json_as_dict, save_json

logger = get_logger(task_name="cicme")

# seed keys derived from CicmeConfig.seed
POOL_STREAM = 0
STABILITY_STREAM = 1
DOMAIN_STREAM = 2

RESULT_FILE_NAME = "result.json"
POOLED_MODEL_FILE_NAME = "pooled_model.json"
STEPS = ("step1", "step2", "step3", "total")


def domain_model_file_name(k: int) -> str:
    return f"domain_{k}_model.json"


def stable_mask(stable_set: Sequence[int], d: int) -> np.ndarray:
    """d x d mask whose column j is all ones iff variable j is stable."""
    if any(j < 0 or j >= d for j in stable_set):
        raise ValueError(f"Stable set {list(stable_set)} references variables outside [0, {d})")
    M = np.zeros((d, d))
    M[:, list(stable_set)] = 1.0
    return M


def common_structure_loss(
    W_pool: np.ndarray, W_ind: np.ndarray, M: np.ndarray
) -> Tuple[float, np.ndarray]:
    """
    Masked mean-squared difference between a domain's adjacency and the
    pooled one, with its gradient with respect to W_ind.

    (1 / sum M) * sum M * (W_pool - W_ind)^2; 0 with a zero gradient when
    the mask is empty.
    """
    if not W_pool.shape == W_ind.shape == M.shape:
        raise ValueError(
            f"Shapes differ: W_pool {W_pool.shape}, W_ind {W_ind.shape}, M {M.shape}"
        )
    total = float(M.sum())
    if total == 0:
        return 0.0, np.zeros_like(W_ind)
    diff = W_ind - W_pool
    return float(np.sum(M * diff**2)) / total, 2.0 * M * diff / total


class CommonStructurePenalty:
    """gamma * common_structure_loss as a structure penalty of the solver."""

    def __init__(self, W_pool: np.ndarray, M: np.ndarray, gamma: float):
        if gamma < 0:
            raise ValueError(f"gamma must be non-negative. Given {gamma}")
        self.W_pool = W_pool
        self.M = M
        self.gamma = gamma

    def __call__(self, W: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = common_structure_loss(self.W_pool, W, self.M)
        return self.gamma * value, self.gamma * grad


@dataclass
class DomainFit:
    """Per-domain outcome of step 3. `error` is set and models are None on failure."""

    domain: int
    models: Optional[ModelSet] = None
    W: Optional[np.ndarray] = None
    converged: bool = False
    h: Optional[float] = None
    dual_steps: int = 0
    error: Optional[str] = None

    @classmethod
    def from_fit(cls, k: int, result: FitResult) -> "DomainFit":
        return cls(
            domain=k,
            models=result.models,
            W=extract_adjacency(result.models),
            converged=result.converged,
            h=result.h,
            dual_steps=result.dual_steps,
        )


@dataclass
class CicmeResult:
    """Everything one method produced on one dataset."""

    method: Method
    config: CicmeConfig
    domains: List[DomainFit]
    pooled_model: Optional[ModelSet] = None
    W_pool: Optional[np.ndarray] = None
    pooled_converged: Optional[bool] = None
    stability: Optional[StabilityReport] = None
    timings: Dict[str, float] = field(default_factory=lambda: dict.fromkeys(STEPS, 0.0))

    @property
    def num_domains(self) -> int:
        return len(self.domains)

    @property
    def stable_set(self) -> List[int]:
        return [] if self.stability is None else self.stability.stable_set

    @property
    def domain_W(self) -> List[Optional[np.ndarray]]:
        return [fit.W for fit in self.domains]

    @property
    def errors(self) -> Dict[int, str]:
        return {fit.domain: fit.error for fit in self.domains if fit.error is not None}

    @property
    def failed(self) -> bool:
        return bool(self.errors)

    @property
    def converged(self) -> bool:
        flags = [fit.converged for fit in self.domains]
        if self.pooled_converged is not None:
            flags.append(self.pooled_converged)
        return all(flags)

    def convergence_flags(self) -> Dict[str, bool]:
        flags = {f"domain_{fit.domain}": fit.converged for fit in self.domains}
        if self.pooled_converged is not None:
            flags["pooled"] = self.pooled_converged
        return flags


def step1_pool(
    dataset: MultiDomainDataset, config: CicmeConfig
) -> Tuple[FitResult, np.ndarray]:
    """
    Fits the causal model on the pooled data of all domains.

    The domain labels are not a model input; only step 2 uses them.

    Returns:
        Tuple[FitResult, np.ndarray]: The pooled fit and its W_pool.
    """
    X, _ = dataset.pool()
    result = fit(
        X,
        config.model,
        config.solver,
        seed=derive_seed(config.seed, POOL_STREAM),
    )
    return result, extract_adjacency(result.models)


def step2_detect(
    dataset: MultiDomainDataset, pooled_model: ModelSet, config: CicmeConfig
) -> StabilityReport:
    """Tests each variable's pooled residuals for independence of the domain index."""
    X, D = dataset.pool()
    return detect_stable(
        pooled_model,
        X,
        D,
        alpha=config.alpha,
        method=config.test_method,
        n_permutations=config.n_permutations,
        seed=derive_seed(config.seed, STABILITY_STREAM),
        variable_names=dataset.variable_names,
    )


def domain_seed(config: CicmeConfig, k: int) -> int:
    """Initialization seed of domain k's step-3 fit; shared by every method."""
    return derive_seed(config.seed, DOMAIN_STREAM, k)


def _fit_domain(
    k: int,
    X: np.ndarray,
    config: CicmeConfig,
    pooled_model: Optional[ModelSet],
    stable_set: Sequence[int],
    penalty: Optional[CommonStructurePenalty],
) -> DomainFit:
    try:
        init = init_model_set(
            X.shape[1], config.model, domain_seed(config, k), config.solver.init_scale
        )
        freeze = None
        if pooled_model is not None and stable_set:
            models = list(init.models)
            for j in stable_set:
                models[j] = pooled_model[j].copy()
            init = ModelSet(models=models, config=init.config)
            freeze = list(stable_set)
        result = fit(X, config.model, config.solver, init=init, freeze=freeze, penalty=penalty)
        return DomainFit.from_fit(k, result)
    except (ValueError, ArithmeticError) as exc:
        logger.warning(f"Domain {k} fit failed: {exc}")
        return DomainFit(domain=k, error=str(exc))


def _fit_domains(
    dataset: MultiDomainDataset,
    config: CicmeConfig,
    pooled_model: Optional[ModelSet] = None,
    stable_set: Sequence[int] = (),
    penalty: Optional[CommonStructurePenalty] = None,
) -> List[DomainFit]:
    # every domain's seed is fixed before dispatch; scheduling cannot change results
    return list(
        Parallel(n_jobs=config.n_jobs)(
            delayed(_fit_domain)(k, dataset.domain(k), config, pooled_model, stable_set, penalty)
            for k in range(1, dataset.num_domains + 1)
        )
    )


def step3_freeze(
    dataset: MultiDomainDataset,
    pooled_model: ModelSet,
    stable_set: Sequence[int],
    config: CicmeConfig,
) -> List[DomainFit]:
    """
    Re-estimates every domain with the stable variables' MLPs loaded from
    the pooled fit and frozen; the unstable ones start from a fresh random
    initialization. Acyclicity covers the full W including frozen columns.
    """
    return _fit_domains(dataset, config, pooled_model=pooled_model, stable_set=stable_set)


def step3_penalty(
    dataset: MultiDomainDataset,
    W_pool: np.ndarray,
    stable_set: Sequence[int],
    config: CicmeConfig,
) -> List[DomainFit]:
    """
    Re-estimates every domain from a fresh random initialization with
    gamma * common_structure_loss pulling the stable columns of W towards
    W_pool.
    """
    penalty = CommonStructurePenalty(W_pool, stable_mask(stable_set, dataset.d), config.gamma)
    return _fit_domains(dataset, config, penalty=penalty)


def run(
    dataset: MultiDomainDataset,
    method: Union[Method, str, None] = None,
    config: Optional[CicmeConfig] = None,
    stable_set: Optional[Sequence[int]] = None,
) -> CicmeResult:
    """
    Runs one method on a multi-domain dataset.

    cicme-f and cicme-l run the pooled fit, the stability test and the
    matching step-3 variant. notears-pool copies W_pool to every domain.
    notears-ind fits each domain on its own.

    Args:
        dataset (MultiDomainDataset): The data.
        method (Union[Method, str, None]): Method to run; the CICME variant
            of `config` when omitted.
        config (Optional[CicmeConfig]): Settings; defaults when omitted.
        stable_set (Optional[Sequence[int]]): Overrides the detected stable
            set in step 3 (the report keeps the detected verdicts).

    Returns:
        CicmeResult: Models, adjacencies, stability report and timings.
    """
    config = config or CicmeConfig()
    if method is None:
        method = Method.CICME_F if config.variant == Variant.FREEZE else Method.CICME_L
    method = Method(method)
    logger.info(f"Running {method.value} on {dataset.num_domains} domains, d={dataset.d}")

    timings = dict.fromkeys(STEPS, 0.0)
    result = CicmeResult(method=method, config=config, domains=[], timings=timings)
    with Stopwatch() as total:
        if method == Method.NOTEARS_IND:
            with Stopwatch() as watch:
                result.domains = _fit_domains(dataset, config)
            timings["step3"] = watch.elapsed
        else:
            with Stopwatch() as watch:
                pooled, W_pool = step1_pool(dataset, config)
            timings["step1"] = watch.elapsed
            result.pooled_model = pooled.models
            result.W_pool = W_pool
            result.pooled_converged = pooled.converged

            if method == Method.NOTEARS_POOL:
                result.domains = [
                    DomainFit(
                        domain=k,
                        models=pooled.models,
                        W=W_pool,
                        converged=pooled.converged,
                        h=pooled.h,
                        dual_steps=pooled.dual_steps,
                    )
                    for k in range(1, dataset.num_domains + 1)
                ]
            else:
                with Stopwatch() as watch:
                    result.stability = step2_detect(dataset, pooled.models, config)
                timings["step2"] = watch.elapsed
                chosen = result.stable_set if stable_set is None else list(stable_set)
                with Stopwatch() as watch:
                    if method == Method.CICME_F:
                        result.domains = step3_freeze(dataset, pooled.models, chosen, config)
                    else:
                        result.domains = step3_penalty(dataset, W_pool, chosen, config)
                timings["step3"] = watch.elapsed
    timings["total"] = total.elapsed

    for k, error in result.errors.items():
        logger.warning(f"{method.value}: domain {k} failed ({error})")
    logger.info(
        f"{method.value} done in {timings['total']:.2f}s "
        f"(step1 {timings['step1']:.2f}s, step2 {timings['step2']:.2f}s, "
        f"step3 {timings['step3']:.2f}s)"
    )
    return result


def save_cicme_result(
    result: CicmeResult, save_dir_path: str, tau: float = DEFAULT_THRESHOLD
) -> None:
    """
    Writes a result bundle: `result.json` with the config, stability report,
    raw and thresholded adjacencies, timings and convergence flags, plus one
    model checkpoint per ModelSet.

    Args:
        result (CicmeResult): The result to save.
        save_dir_path (str): Target directory, created if missing.
        tau (float): Threshold of the stored binary graphs.
    """
    os.makedirs(save_dir_path, exist_ok=True)
    document = {
        "method": result.method.value,
        "config": result.config.model_dump(mode="json"),
        "threshold": tau,
        "stable_set": result.stable_set,
        "stability": None if result.stability is None else result.stability.to_dict(),
        "W_pool": result.W_pool,
        "W_pool_thresholded": None if result.W_pool is None else threshold(result.W_pool, tau),
        "pooled_converged": result.pooled_converged,
        "timings": result.timings,
        "domains": [
            {
                "domain": fit.domain,
                "W": fit.W,
                "W_thresholded": None if fit.W is None else threshold(fit.W, tau),
                "converged": fit.converged,
                "h": fit.h,
                "dual_steps": fit.dual_steps,
                "error": fit.error,
            }
            for fit in result.domains
        ],
    }
    save_json(os.path.join(save_dir_path, RESULT_FILE_NAME), document)
    if result.pooled_model is not None:
        save_model_set(result.pooled_model, os.path.join(save_dir_path, POOLED_MODEL_FILE_NAME))
    for fit in result.domains:
        if fit.models is not None:
            model_path = os.path.join(save_dir_path, domain_model_file_name(fit.domain))
            save_model_set(fit.models, model_path)


def load_cicme_result(save_dir_path: str) -> CicmeResult:
    """Restores a bundle written by `save_cicme_result`."""
    result_path = os.path.join(save_dir_path, RESULT_FILE_NAME)
    if not os.path.exists(result_path):
        raise FileNotFoundError(f"No such file or directory: '{result_path}'")
    document = read_json_as_dict(result_path)

    def _matrix(value):
        return None if value is None else np.array(value, dtype=np.float64)

    def _models(file_name):
        path = os.path.join(save_dir_path, file_name)
        return load_model_set(path) if os.path.exists(path) else None

    domains = [
        DomainFit(
            domain=entry["domain"],
            models=_models(domain_model_file_name(entry["domain"])),
            W=_matrix(entry["W"]),
            converged=entry["converged"],
            h=entry["h"],
            dual_steps=entry["dual_steps"],
            error=entry["error"],
        )
        for entry in document["domains"]
    ]
    stability = document["stability"]
    return CicmeResult(
        method=Method(document["method"]),
        config=CicmeConfig.model_validate(document["config"]),
        domains=domains,
        pooled_model=_models(POOLED_MODEL_FILE_NAME),
        W_pool=_matrix(document["W_pool"]),
        pooled_converged=document["pooled_converged"],
        stability=None if stability is None else StabilityReport.from_dict(stability),
        timings=document["timings"],
    )
