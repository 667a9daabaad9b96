import json

import pytest


@pytest.fixture
def fast_model_config_file(tmp_path):
    """Packaged model config shrunk so a sweep runs in seconds."""
    config = {
        "model": {"hidden_units": 3},
        "solver": {"max_dual_steps": 3, "inner_max_iter": 40, "inner_max_fun": 80},
        "cicme": {"alpha": 0.05, "gamma": 10.0, "test_method": "gamma"},
    }
    path = tmp_path / "model_config.json"
    path.write_text(json.dumps(config))
    return str(path)


@pytest.fixture
def tiny_run_config_file(tmp_path):
    config = {
        "experiments": ["E1"],
        "sizes": [12],
        "repeats": 2,
        "methods": ["cicme-f", "cicme-l", "notears-pool", "notears-ind"],
        "seed": 3,
        "jobs": 1,
        "threshold": 0.3,
    }
    path = tmp_path / "run_config.json"
    path.write_text(json.dumps(config))
    return str(path)


@pytest.fixture
def errors_dir(tmp_path, monkeypatch):
    """Redirects error files away from the package outputs."""
    from config import paths

    errors = tmp_path / "errors"
    monkeypatch.setattr(paths, "ERRORS_DIR", str(errors))
    monkeypatch.setattr(paths, "RUN_ERROR_FILE_PATH", str(errors / "run_error.txt"))
    monkeypatch.setattr(paths, "REPORT_ERROR_FILE_PATH", str(errors / "report_error.txt"))
    monkeypatch.setattr(paths, "GEN_ERROR_FILE_PATH", str(errors / "gen_error.txt"))
    return errors
