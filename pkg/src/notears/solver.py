from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize as sopt

from data_models.config_validator import ModelConfig, SolverConfig
from logger import get_logger
from notears.acyclicity import NumericalError, acyclicity_from_squared
from notears.mlp import (
    MlpParams,
    ModelSet,
    backward,
    forward_with_cache,
    init_model_set,
    squared_adjacency,
)

logger = get_logger(task_name="notears")

# (W) -> (value, dvalue/dW); an extra smooth term on the weighted adjacency
StructurePenalty = Callable[[np.ndarray], Tuple[float, np.ndarray]]

ParamGrads = Tuple[List[np.ndarray], List[np.ndarray]]


@dataclass
class FitResult:
    """
    Outcome of one augmented-Lagrangian fit.

    `converged` is False when the run stopped with h above h_tol (rho hit
    rho_max or the dual-step cap was reached); the models are returned anyway.
    """

    models: ModelSet
    converged: bool
    h: float
    rho: float
    alpha: float
    dual_steps: int
    rho_history: List[float] = field(default_factory=list)


def _least_squares(models: ModelSet, X: np.ndarray) -> Tuple[float, List[ParamGrads]]:
    """(1/n) sum_j 1/2 ||x_j - MLP(X; theta_j)||^2 and its parameter gradients."""
    n = X.shape[0]
    activation = models.config.activation
    loss = 0.0
    grads = []
    for j, model in enumerate(models.models):
        predictions, activations = forward_with_cache(model, X, activation)
        residuals = predictions - X[:, j]
        loss += 0.5 / n * float(residuals @ residuals)
        grads.append(backward(model, activations, residuals / n, activation))
    if not np.isfinite(loss):
        raise NumericalError("Non-finite loss in the MLP forward pass")
    return loss, grads


def _ridge(models: ModelSet, grads: List[ParamGrads]) -> float:
    lambda2 = models.config.lambda2
    if lambda2 == 0:
        return 0.0
    value = 0.0
    for model, (grad_weights, _) in zip(models.models, grads):
        for weights, grad in zip(model.layer_weights, grad_weights):
            value += 0.5 * lambda2 * float(np.sum(weights**2))
            grad += lambda2 * weights
    return value


def objective(models: ModelSet, X: np.ndarray) -> Tuple[float, List[ParamGrads]]:
    """
    Penalized least-squares score of a model set.

    (1/n) sum_j 1/2 ||x_j - MLP(X; theta_j)||^2 + lambda1 ||A_j^(1)||_1
    (+ the optional ridge term). The l1 term contributes sign(A) to the
    first-layer gradient; inside `fit` it is handled exactly by splitting the
    first layer into non-negative parts.

    Args:
        models (ModelSet): The models to score.
        X (np.ndarray): n x d data matrix, n >= 1.

    Returns:
        Tuple[float, List[ParamGrads]]: The loss and, per variable, the
            gradients of its layer weights and biases.
    """
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"Objective needs a non-empty n x d matrix. Given {X.shape}")
    loss, grads = _least_squares(models, X)
    loss += _ridge(models, grads)
    lambda1 = models.config.lambda1
    for model, (grad_weights, _) in zip(models.models, grads):
        loss += lambda1 * float(np.abs(model.first_layer).sum())
        grad_weights[0] += lambda1 * np.sign(model.first_layer)
    return loss, grads


class _ParameterPacker:
    """
    Maps the trainable variables' parameters to the flat, bound-constrained
    vector L-BFGS-B works on.

    Per trainable variable the vector holds the positive and negative parts
    of the first layer, then the first-layer bias, then every further
    layer's weights and bias. Frozen variables are not in the vector; their
    arrays are reused from the template untouched.
    """

    def __init__(self, template: ModelSet, trainable: Sequence[int]):
        self.template = template
        self.trainable = list(trainable)
        reference = template.models[0]
        self.weight_shapes = [w.shape for w in reference.layer_weights]
        self.bias_shapes = [b.shape for b in reference.layer_biases]
        self.first_size = int(np.prod(self.weight_shapes[0]))
        self.block_size = 2 * self.first_size + sum(
            int(np.prod(s)) for s in self.weight_shapes[1:] + self.bias_shapes
        )

    @property
    def size(self) -> int:
        return self.block_size * len(self.trainable)

    def bounds(self) -> List[Tuple[Optional[float], Optional[float]]]:
        m1, d = self.weight_shapes[0]
        bounds = []
        for j in self.trainable:
            first = [(0.0, 0.0) if k == j else (0.0, None) for _ in range(m1) for k in range(d)]
            bounds += first + first
            bounds += [(None, None)] * (self.block_size - 2 * self.first_size)
        return bounds

    def pack(self, models: ModelSet) -> np.ndarray:
        blocks = []
        for j in self.trainable:
            model = models.models[j]
            first = model.first_layer.ravel()
            blocks.append(np.maximum(first, 0.0))
            blocks.append(np.maximum(-first, 0.0))
            blocks.append(model.layer_biases[0].ravel())
            for weights, biases in zip(model.layer_weights[1:], model.layer_biases[1:]):
                blocks.append(weights.ravel())
                blocks.append(biases.ravel())
        if not blocks:
            return np.zeros(0)
        return np.concatenate(blocks)

    def unpack(self, x: np.ndarray) -> ModelSet:
        models = list(self.template.models)
        for block, j in enumerate(self.trainable):
            offset = block * self.block_size
            positive = x[offset : offset + self.first_size]
            negative = x[offset + self.first_size : offset + 2 * self.first_size]
            offset += 2 * self.first_size
            weights = [(positive - negative).reshape(self.weight_shapes[0])]
            biases = []
            for ell in range(len(self.weight_shapes)):
                if ell > 0:
                    size = int(np.prod(self.weight_shapes[ell]))
                    weights.append(x[offset : offset + size].reshape(self.weight_shapes[ell]))
                    offset += size
                size = int(np.prod(self.bias_shapes[ell]))
                biases.append(x[offset : offset + size].copy())
                offset += size
            models[j] = MlpParams(layer_weights=weights, layer_biases=biases)
        return ModelSet(models=models, config=self.template.config)

    def pack_gradient(self, grads: List[ParamGrads], lambda1: float) -> np.ndarray:
        blocks = []
        for j in self.trainable:
            grad_weights, grad_biases = grads[j]
            first = grad_weights[0].ravel()
            blocks.append(first + lambda1)
            blocks.append(-first + lambda1)
            blocks.append(grad_biases[0].ravel())
            for grad_w, grad_b in zip(grad_weights[1:], grad_biases[1:]):
                blocks.append(grad_w.ravel())
                blocks.append(grad_b.ravel())
        return np.concatenate(blocks)

    def l1_norm(self, x: np.ndarray) -> float:
        total = 0.0
        for block in range(len(self.trainable)):
            offset = block * self.block_size
            total += float(x[offset : offset + 2 * self.first_size].sum())
        return total


def _augmented_lagrangian(
    x: np.ndarray,
    packer: _ParameterPacker,
    X: np.ndarray,
    rho: float,
    alpha: float,
    penalty: Optional[StructurePenalty],
) -> Tuple[float, np.ndarray]:
    """Value and gradient of the smooth bound-constrained subproblem."""
    try:
        models = packer.unpack(x)
        loss, grads = _least_squares(models, X)
        loss += _ridge(models, grads)
        S = squared_adjacency(models)
        h, grad_S = acyclicity_from_squared(S)
    except NumericalError as exc:
        logger.debug(f"Rejecting trial point: {exc}")
        return np.inf, np.zeros_like(x)

    lambda1 = models.config.lambda1
    with np.errstate(over="ignore", invalid="ignore"):
        value = loss + 0.5 * rho * h * h + alpha * h + lambda1 * packer.l1_norm(x)
        # d/dS of the constraint terms
        grad_S = (rho * h + alpha) * grad_S

        grad_W = None
        if penalty is not None:
            W = np.sqrt(S)
            penalty_value, grad_W = penalty(W)
            value += penalty_value

        for j in packer.trainable:
            first = models.models[j].first_layer
            chain = 2.0 * first * grad_S[:, j][None, :]
            if grad_W is not None:
                norms = np.sqrt(S[:, j])
                # zero-norm columns get a zero subgradient
                scale = np.divide(
                    grad_W[:, j], norms, out=np.zeros_like(norms), where=norms > 0
                )
                chain = chain + first * scale[None, :]
            grads[j][0][0] += chain
        gradient = packer.pack_gradient(grads, lambda1)
    if not (np.isfinite(value) and np.all(np.isfinite(gradient))):
        logger.debug(f"Rejecting trial point with non-finite score (rho={rho:.1e})")
        return np.inf, np.zeros_like(x)
    return value, gradient


def fit(
    X: np.ndarray,
    config: ModelConfig,
    solver: SolverConfig,
    init: Optional[ModelSet] = None,
    seed: Optional[int] = None,
    freeze: Optional[Sequence[int]] = None,
    penalty: Optional[StructurePenalty] = None,
) -> FitResult:
    """
    Fits one MLP per variable under the acyclicity constraint with the
    augmented Lagrangian method and L-BFGS-B inner solves.

    Args:
        X (np.ndarray): n x d data matrix, used as-is.
        config (ModelConfig): Architecture and penalties.
        solver (SolverConfig): Augmented-Lagrangian schedule.
        init (Optional[ModelSet]): Starting parameters; fresh random ones
            drawn from `seed` when omitted.
        seed (Optional[int]): Seed of the random initialization.
        freeze (Optional[Sequence[int]]): Variables whose parameters stay
            exactly at their initial values.
        penalty (Optional[StructurePenalty]): Extra smooth term on W(theta)
            added to the score.

    Returns:
        FitResult: The fitted models and convergence diagnostics.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"fit needs a non-empty n x d matrix. Given shape {X.shape}")
    d = X.shape[1]
    if init is None:
        if seed is None:
            raise ValueError("Either an initial model set or a seed is required")
        init = init_model_set(d, config, seed, solver.init_scale)
    elif init.d != d:
        raise ValueError(f"Initial models cover {init.d} variables, data has {d}")
    template = ModelSet(models=list(init.models), config=config.model_copy())

    frozen = set(freeze or [])
    if any(j < 0 or j >= d for j in frozen):
        raise ValueError(f"Freeze mask {sorted(frozen)} references variables outside [0, {d})")
    trainable = [j for j in range(d) if j not in frozen]
    packer = _ParameterPacker(template, trainable)

    rho, alpha, h = solver.rho_init, 0.0, np.inf
    rho_history = [rho]
    x = packer.pack(template)
    dual_steps = 0
    if not trainable:
        h, _ = acyclicity_from_squared(squared_adjacency(template))
    else:
        bounds = packer.bounds()
        options = {
            "maxiter": solver.inner_max_iter,
            "maxfun": solver.inner_max_fun,
            "gtol": solver.inner_gtol,
            "ftol": solver.inner_ftol,
        }
        for dual_steps in range(1, solver.max_dual_steps + 1):
            h_new = None
            while rho < solver.rho_max:
                solution = sopt.minimize(
                    _augmented_lagrangian,
                    x,
                    args=(packer, X, rho, alpha, penalty),
                    method="L-BFGS-B",
                    jac=True,
                    bounds=bounds,
                    options=options,
                )
                x = solution.x
                h_new, _ = acyclicity_from_squared(squared_adjacency(packer.unpack(x)))
                if h_new > solver.h_decrease_ratio * h:
                    rho *= solver.rho_multiplier
                else:
                    break
            rho_history.append(rho)
            h = h_new
            alpha += rho * h
            if h <= solver.h_tol or rho >= solver.rho_max:
                break

    models = packer.unpack(x)
    if not all(np.all(np.isfinite(w)) for m in models.models for w in m.layer_weights):
        raise NumericalError("Fit produced non-finite parameters")
    converged = bool(h <= solver.h_tol)
    if not converged:
        logger.warning(
            f"Fit stopped with h={h:.3e} > h_tol={solver.h_tol:.0e} "
            f"(rho={rho:.1e}, dual steps={dual_steps})"
        )
    return FitResult(
        models=models,
        converged=converged,
        h=float(h),
        rho=float(rho),
        alpha=float(alpha),
        dual_steps=dual_steps,
        rho_history=rho_history,
    )
