import numpy as np
import pytest

import cicme.engine as engine
from cicme.engine import (
    POOL_STREAM,
    CommonStructurePenalty,
    common_structure_loss,
    load_cicme_result,
    run,
    save_cicme_result,
    stable_mask,
    step1_pool,
)
from data_models.config_validator import Method
from evaluation.metrics import evaluate
from notears.acyclicity import NumericalError
from notears.solver import fit
from schema.dataset_schema import MultiDomainDataset
from utils import derive_seed


def _same_models(left, right) -> bool:
    return all(a.equals(b) for a, b in zip(left.models, right.models))


def test_stable_mask_columns():
    M = stable_mask([0, 2], 3)
    np.testing.assert_array_equal(M[:, 0], 1)
    np.testing.assert_array_equal(M[:, 1], 0)
    np.testing.assert_array_equal(M[:, 2], 1)
    with pytest.raises(ValueError):
        stable_mask([3], 3)


def test_common_structure_loss_examples(rng):
    W = rng.uniform(size=(2, 2))
    assert common_structure_loss(W, W, stable_mask([0, 1], 2))[0] == 0.0
    value, grad = common_structure_loss(W, W + 1, np.zeros((2, 2)))
    assert value == 0.0
    np.testing.assert_array_equal(grad, np.zeros((2, 2)))

    W_pool = np.array([[0.9, 0.5], [0.3, 0.0]])
    W_ind = np.array([[0.1, 0.1], [0.7, 0.2]])
    value, _ = common_structure_loss(W_pool, W_ind, stable_mask([1], 2))
    assert value == pytest.approx(0.1)


def test_common_structure_loss_gradient(rng):
    W_pool, W_ind = rng.uniform(size=(3, 3)), rng.uniform(size=(3, 3))
    M = stable_mask([0, 2], 3)
    _, grad = common_structure_loss(W_pool, W_ind, M)
    eps = 1e-6
    for idx in np.ndindex(W_ind.shape):
        step = np.zeros_like(W_ind)
        step[idx] = eps
        numeric = (
            common_structure_loss(W_pool, W_ind + step, M)[0]
            - common_structure_loss(W_pool, W_ind - step, M)[0]
        ) / (2 * eps)
        assert grad[idx] == pytest.approx(numeric, abs=1e-8)


def test_penalty_scales_with_gamma(rng):
    W_pool, W = rng.uniform(size=(3, 3)), rng.uniform(size=(3, 3))
    M = stable_mask([1], 3)
    value, grad = CommonStructurePenalty(W_pool, M, gamma=10.0)(W)
    base_value, base_grad = common_structure_loss(W_pool, W, M)
    assert value == pytest.approx(10.0 * base_value)
    np.testing.assert_allclose(grad, 10.0 * base_grad)
    with pytest.raises(ValueError):
        CommonStructurePenalty(W_pool, M, gamma=-1.0)


def test_freeze_keeps_stable_models_bit_identical(e1_dataset, fast_cicme_config):
    result = run(e1_dataset, "cicme-f", fast_cicme_config, stable_set=[0, 1])
    for fit_k in result.domains:
        for j in (0, 1):
            assert fit_k.models[j].equals(result.pooled_model[j])
        np.testing.assert_array_equal(fit_k.W[:, [0, 1]], result.W_pool[:, [0, 1]])


def test_all_stable_reproduces_pooled_models(e1_dataset, fast_cicme_config):
    result = run(e1_dataset, "cicme-f", fast_cicme_config, stable_set=[0, 1, 2, 3])
    for fit_k in result.domains:
        assert _same_models(fit_k.models, result.pooled_model)


def test_empty_stable_set_matches_individual_baseline(e1_dataset, fast_cicme_config):
    frozen = run(e1_dataset, "cicme-f", fast_cicme_config, stable_set=[])
    individual = run(e1_dataset, "notears-ind", fast_cicme_config)
    for left, right in zip(frozen.domains, individual.domains):
        assert _same_models(left.models, right.models)


def test_zero_gamma_matches_individual_baseline(e1_dataset, fast_cicme_config):
    config = fast_cicme_config.model_copy(update={"gamma": 0.0})
    penalized = run(e1_dataset, "cicme-l", config, stable_set=[0, 1])
    individual = run(e1_dataset, "notears-ind", config)
    for left, right in zip(penalized.domains, individual.domains):
        assert _same_models(left.models, right.models)


def test_single_domain_pool_equals_plain_fit(e1_dataset, fast_cicme_config):
    single = MultiDomainDataset([e1_dataset.domain(1)], e1_dataset.variable_names)
    pooled, W_pool = step1_pool(single, fast_cicme_config)
    plain = fit(
        e1_dataset.domain(1),
        fast_cicme_config.model,
        fast_cicme_config.solver,
        seed=derive_seed(fast_cicme_config.seed, POOL_STREAM),
    )
    assert _same_models(pooled.models, plain.models)
    assert W_pool.shape == (4, 4)


def test_run_is_deterministic(e1_dataset, fast_cicme_config):
    first = run(e1_dataset, "cicme-l", fast_cicme_config)
    second = run(e1_dataset, "cicme-l", fast_cicme_config)
    assert first.stable_set == second.stable_set
    for left, right in zip(first.domains, second.domains):
        assert left.W.tobytes() == right.W.tobytes()


def test_parallel_domains_match_sequential(e1_dataset, fast_cicme_config):
    sequential = run(e1_dataset, "notears-ind", fast_cicme_config)
    parallel = run(
        e1_dataset, "notears-ind", fast_cicme_config.model_copy(update={"n_jobs": 2})
    )
    for left, right in zip(sequential.domains, parallel.domains):
        assert left.W.tobytes() == right.W.tobytes()


def test_notears_pool_copies_pooled_graph(e2_dataset, fast_cicme_config):
    result = run(e2_dataset, "notears-pool", fast_cicme_config)
    assert result.stability is None
    for fit_k in result.domains:
        np.testing.assert_array_equal(fit_k.W, result.W_pool)
    record = evaluate(result, e2_dataset.true_adjacencies())
    # one graph cannot match two different truths
    assert max(record.domain_shd) > 0


def test_notears_ind_skips_pooling(e1_dataset, fast_cicme_config):
    result = run(e1_dataset, Method.NOTEARS_IND, fast_cicme_config)
    assert result.pooled_model is None and result.W_pool is None
    assert result.timings["step1"] == 0.0 and result.timings["step2"] == 0.0


def test_timings_are_recorded(e1_dataset, fast_cicme_config):
    result = run(e1_dataset, "cicme-f", fast_cicme_config)
    assert set(result.timings) == {"step1", "step2", "step3", "total"}
    assert all(value >= 0 for value in result.timings.values())
    assert result.timings["total"] >= result.timings["step1"] + result.timings["step3"]
    assert result.stability.d == 4
    assert result.num_domains == 3


def test_variant_selects_default_method(e1_dataset, fast_cicme_config):
    config = fast_cicme_config.model_copy(update={"variant": "loss-penalty"})
    assert run(e1_dataset, config=config).method == Method.CICME_L


def test_domain_failure_is_contained(e1_dataset, fast_cicme_config, monkeypatch):
    failing = e1_dataset.domain(2)

    def flaky_fit(X, *args, **kwargs):
        if np.array_equal(X, failing):
            raise NumericalError("forced failure")
        return fit(X, *args, **kwargs)

    monkeypatch.setattr(engine, "fit", flaky_fit)
    result = run(e1_dataset, "notears-ind", fast_cicme_config)
    assert result.failed
    assert list(result.errors) == [2]
    assert result.domains[0].W is not None and result.domains[2].W is not None
    record = evaluate(result, e1_dataset.true_adjacencies())
    assert record.domain_shd[1] is None
    assert record.failed_domains == [2]


def test_result_bundle_round_trip(tmp_path, e1_dataset, fast_cicme_config):
    result = run(e1_dataset, "cicme-f", fast_cicme_config)
    save_cicme_result(result, str(tmp_path))
    loaded = load_cicme_result(str(tmp_path))
    assert loaded.method == result.method
    assert loaded.stable_set == result.stable_set
    np.testing.assert_array_equal(loaded.W_pool, result.W_pool)
    assert _same_models(loaded.pooled_model, result.pooled_model)
    for left, right in zip(loaded.domains, result.domains):
        assert _same_models(left.models, right.models)
        np.testing.assert_array_equal(left.W, right.W)
