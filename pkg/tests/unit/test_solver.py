import numpy as np
import pytest

from cicme.engine import CommonStructurePenalty, stable_mask
from data_models.config_validator import ModelConfig, SolverConfig
from evaluation.metrics import threshold
from notears.acyclicity import acyclicity
from notears.mlp import MlpParams, ModelSet, extract_adjacency, init_model_set
from notears.solver import _augmented_lagrangian, _ParameterPacker, fit, objective


def _two_node_data(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    x2 = 1.5 * x1 + 0.1 * rng.standard_normal(n)
    return np.column_stack([x1, x2])


def _perfect_linear_model_set(config: ModelConfig) -> ModelSet:
    """Affine outputs reproducing both columns exactly through zero first layers."""
    models = []
    for _ in range(2):
        models.append(
            MlpParams(
                layer_weights=[np.zeros((1, 2)), np.zeros((1, 1))],
                layer_biases=[np.zeros(1), np.zeros(1)],
            )
        )
    return ModelSet(models=models, config=config)


def test_objective_is_zero_for_perfect_predictor():
    config = ModelConfig(hidden_units=1, lambda1=0.0)
    models = _perfect_linear_model_set(config)
    X = np.zeros((5, 2))
    loss, _ = objective(models, X)
    assert loss == 0.0


def test_objective_of_constant_predictor(rng):
    config = ModelConfig(hidden_units=1, lambda1=0.0)
    models = _perfect_linear_model_set(config)
    models[0].layer_biases[1][:] = 0.3
    X = rng.normal(size=(20, 2))
    loss, _ = objective(models, X)
    expected = 0.5 / 20 * (np.sum((X[:, 0] - 0.3) ** 2) + np.sum(X[:, 1] ** 2))
    assert loss == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("lambda2", [0.0, 0.1])
def test_objective_gradient_matches_finite_differences(rng, lambda2):
    config = ModelConfig(hidden_units=4, lambda1=0.01, lambda2=lambda2)
    models = init_model_set(3, config, seed=4, scale=0.5)
    for j, model in enumerate(models.models):
        # keep the l1 term differentiable
        first = model.layer_weights[0]
        first[np.abs(first) < 0.05] = 0.2
        first[:, j] = 0.3
    X = rng.normal(size=(20, 3))
    _, grads = objective(models, X)
    eps = 1e-6
    for j, model in enumerate(models.models):
        grad_weights, grad_biases = grads[j]
        pairs = ((model.layer_weights, grad_weights), (model.layer_biases, grad_biases))
        for params, analytic in pairs:
            for array, grad in zip(params, analytic):
                numeric = np.zeros_like(array)
                for idx in np.ndindex(array.shape):
                    original = array[idx]
                    array[idx] = original + eps
                    plus = objective(models, X)[0]
                    array[idx] = original - eps
                    minus = objective(models, X)[0]
                    array[idx] = original
                    numeric[idx] = (plus - minus) / (2 * eps)
                np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-7)


def _check_packed_gradient(packer, X, rho, alpha, penalty, x):
    _, analytic = _augmented_lagrangian(x, packer, X, rho, alpha, penalty)
    bounds = packer.bounds()
    eps = 1e-6
    for i in range(x.size):
        if bounds[i] == (0.0, 0.0):
            continue
        step = np.zeros_like(x)
        step[i] = eps
        plus = _augmented_lagrangian(x + step, packer, X, rho, alpha, penalty)[0]
        minus = _augmented_lagrangian(x - step, packer, X, rho, alpha, penalty)[0]
        numeric = (plus - minus) / (2 * eps)
        assert analytic[i] == pytest.approx(numeric, rel=1e-4, abs=1e-6), i


def test_augmented_lagrangian_gradient(rng):
    config = ModelConfig(hidden_units=3)
    init = init_model_set(3, config, seed=2, scale=0.5)
    packer = _ParameterPacker(init, [0, 1, 2])
    x = packer.pack(init) + 0.05  # away from the bounds
    X = rng.normal(size=(15, 3))
    _check_packed_gradient(packer, X, rho=10.0, alpha=0.5, penalty=None, x=x)


def test_penalty_gradient_flows_into_first_layers(rng):
    config = ModelConfig(hidden_units=3)
    init = init_model_set(3, config, seed=6, scale=0.5)
    W_pool = extract_adjacency(init_model_set(3, config, seed=7, scale=0.5))
    penalty = CommonStructurePenalty(W_pool, stable_mask([1], 3), gamma=10.0)
    packer = _ParameterPacker(init, [0, 1, 2])
    x = packer.pack(init) + 0.05
    X = rng.normal(size=(15, 3))
    _check_packed_gradient(packer, X, rho=1.0, alpha=0.0, penalty=penalty, x=x)


def test_overflowing_trial_point_is_rejected(rng):
    init = init_model_set(3, ModelConfig(), seed=0, scale=0.1)
    # 2-cycle X1 <-> X2 with large first-layer weights
    init.models[0].first_layer[:, 1] = 6.0
    init.models[1].first_layer[:, 0] = 6.0
    packer = _ParameterPacker(init, [0, 1, 2])
    X = rng.normal(size=(15, 3))
    value, gradient = _augmented_lagrangian(
        packer.pack(init), packer, X, rho=1e16, alpha=1e10, penalty=None
    )
    assert value == np.inf
    assert np.all(np.isfinite(gradient))
    np.testing.assert_array_equal(gradient, np.zeros_like(gradient))


def test_default_config_penalizes_output_weights():
    config = ModelConfig()
    assert config.lambda2 > 0
    models = _perfect_linear_model_set(config)
    models[1].layer_weights[1][:] = 2.0
    # hidden unit sits at sigmoid(0) = 0.5, so X2 = 1 is fitted exactly
    X = np.column_stack([np.zeros(5), np.ones(5)])
    loss, grads = objective(models, X)
    assert loss == pytest.approx(0.5 * config.lambda2 * 4.0)
    np.testing.assert_allclose(grads[1][0][1], [[config.lambda2 * 2.0]])


def test_frozen_variables_are_bit_identical(small_model_config, fast_solver_config):
    X = _two_node_data(60, seed=1)
    X = np.column_stack([X, X[:, 1] + np.random.default_rng(2).standard_normal(60)])
    init = init_model_set(3, small_model_config, seed=3)
    before = [model.copy() for model in init.models]
    result = fit(X, small_model_config, fast_solver_config, init=init, freeze=[0, 2])
    assert result.models[0].equals(before[0])
    assert result.models[2].equals(before[2])
    assert not result.models[1].equals(before[1])


def test_fully_frozen_fit_returns_initial_parameters(small_model_config, fast_solver_config):
    X = _two_node_data(30, seed=0)
    init = init_model_set(2, small_model_config, seed=1)
    result = fit(X, small_model_config, fast_solver_config, init=init, freeze=[0, 1])
    assert all(a.equals(b) for a, b in zip(result.models.models, init.models))
    assert result.dual_steps == 0


def test_fit_is_deterministic(small_model_config, fast_solver_config):
    X = _two_node_data(40, seed=4)
    first = fit(X, small_model_config, fast_solver_config, seed=9)
    second = fit(X, small_model_config, fast_solver_config, seed=9)
    assert all(a.equals(b) for a, b in zip(first.models.models, second.models.models))


def test_fit_requires_init_or_seed(small_model_config, fast_solver_config):
    with pytest.raises(ValueError):
        fit(np.zeros((5, 2)), small_model_config, fast_solver_config)


def test_fit_rejects_out_of_range_freeze(small_model_config, fast_solver_config):
    with pytest.raises(ValueError):
        fit(np.zeros((5, 2)), small_model_config, fast_solver_config, seed=0, freeze=[2])


def test_rho_is_non_decreasing(small_model_config):
    X = _two_node_data(80, seed=5)
    result = fit(X, small_model_config, SolverConfig(max_dual_steps=6, inner_max_iter=200), seed=1)
    assert all(a <= b for a, b in zip(result.rho_history, result.rho_history[1:]))


def test_two_node_pair_is_recovered():
    X = _two_node_data(1000, seed=0)
    result = fit(X, ModelConfig(), SolverConfig(), seed=0)
    assert result.converged
    W = extract_adjacency(result.models)
    assert acyclicity(W)[0] <= 1e-8
    np.testing.assert_array_equal(threshold(W, 0.3), [[0, 1], [0, 0]])


@pytest.mark.slow
def test_two_node_pair_is_recovered_across_seeds():
    hits = 0
    for seed in range(100):
        X = _two_node_data(1000, seed=seed)
        result = fit(X, ModelConfig(), SolverConfig(), seed=seed)
        W = threshold(extract_adjacency(result.models), 0.3)
        hits += int(np.array_equal(W, [[0, 1], [0, 0]]))
    assert hits >= 90
