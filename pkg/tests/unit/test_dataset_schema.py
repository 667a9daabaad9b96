import numpy as np
import pandas as pd
import pytest

from schema.dataset_schema import (
    DOMAIN_COLUMN,
    POOLED_FILE_NAME,
    MultiDomainDataset,
    load_dataset,
    pool,
    save_dataset,
    split,
)


def test_pool_orders_rows_by_domain(rng):
    domains = [rng.normal(size=(3, 2)), rng.normal(size=(2, 2))]
    pooled, index = pool(domains)
    assert pooled.shape == (5, 2)
    np.testing.assert_array_equal(index, [1, 1, 1, 2, 2])
    np.testing.assert_array_equal(pooled[3:], domains[1])


def test_pool_rejects_mismatched_widths(rng):
    with pytest.raises(ValueError):
        pool([rng.normal(size=(3, 2)), rng.normal(size=(3, 3))])


def test_split_inverts_pool(rng):
    domains = [rng.normal(size=(4, 3)), rng.normal(size=(2, 3)), rng.normal(size=(5, 3))]
    parts = split(*pool(domains))
    for part, domain in zip(parts, domains):
        assert part.tobytes() == domain.tobytes()


def test_dataset_validates_columns(rng):
    with pytest.raises(ValueError):
        MultiDomainDataset([rng.normal(size=(3, 2))], variable_names=["A", "B", "C"])


def test_dataset_rejects_non_finite():
    with pytest.raises(ValueError):
        MultiDomainDataset([np.array([[1.0, np.nan]])], variable_names=["A", "B"])


def test_domain_index_is_one_based(e1_dataset):
    assert e1_dataset.domain(1).shape == (30, 4)
    with pytest.raises(ValueError):
        e1_dataset.domain(0)


def test_save_and_load_keep_data_and_truth(tmp_path, e2_dataset):
    save_dataset(e2_dataset, str(tmp_path))
    loaded = load_dataset(str(tmp_path))
    for k in range(1, e2_dataset.num_domains + 1):
        assert loaded.domain(k).tobytes() == e2_dataset.domain(k).tobytes()
    for left, right in zip(loaded.true_adjacencies(), e2_dataset.true_adjacencies()):
        np.testing.assert_array_equal(left, right)
    assert loaded.seed == e2_dataset.seed
    pooled = pd.read_csv(tmp_path / POOLED_FILE_NAME)
    assert list(pooled[DOMAIN_COLUMN].unique()) == [1, 2, 3]


def test_load_missing_dataset_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(str(tmp_path))
