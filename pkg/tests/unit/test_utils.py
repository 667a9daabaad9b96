import json

import numpy as np
import pytest

from utils import Stopwatch, derive_seed, read_json_as_dict, save_json


def test_derive_seed_is_stable_and_key_sensitive():
    assert derive_seed(0, 1, 100, 3) == derive_seed(0, 1, 100, 3)
    seeds = {derive_seed(0, 1, 100, r) for r in range(50)}
    assert len(seeds) == 50
    assert derive_seed(0, 1) != derive_seed(1, 1)
    assert derive_seed(0, 1, 100, 3) != derive_seed(0, 1, 100, 3, 1)
    assert 0 <= derive_seed(7) < 2**32


def test_derive_seed_rejects_negative_inputs():
    with pytest.raises(ValueError):
        derive_seed(-1, 0)
    with pytest.raises(ValueError):
        derive_seed(0, 2, -3)


def test_save_json_handles_numpy_values(tmp_path):
    path = tmp_path / "out.json"
    save_json(
        str(path),
        {"array": np.eye(2), "count": np.int64(3), "p": np.float64(0.5), "ok": np.bool_(True)},
    )
    loaded = read_json_as_dict(str(path))
    assert loaded == {"array": [[1.0, 0.0], [0.0, 1.0]], "count": 3, "p": 0.5, "ok": True}


def test_save_json_rejects_unknown_objects(tmp_path):
    with pytest.raises(TypeError):
        save_json(str(tmp_path / "bad.json"), {"value": object()})


def test_read_json_from_directory_takes_first_file(tmp_path):
    (tmp_path / "b.json").write_text(json.dumps({"name": "b"}))
    (tmp_path / "a.json").write_text(json.dumps({"name": "a"}))
    assert read_json_as_dict(str(tmp_path)) == {"name": "a"}
    with pytest.raises(ValueError):
        read_json_as_dict(str(tmp_path / "missing"))


def test_stopwatch_measures_elapsed_time():
    with Stopwatch() as watch:
        sum(range(1000))
    assert watch.elapsed >= 0.0
