import json
import os

import pytest

from config import paths
from gen import run_generation
from report import run_report
from run import parse_arguments, run_sweep
from schema.dataset_schema import SIDECAR_FILE_NAME, load_dataset


def test_run_then_report(tmp_path, fast_model_config_file, tiny_run_config_file, errors_dir):
    out = tmp_path / "sweep"
    status = run_sweep(
        overrides={"out": str(out)},
        run_config_file_path=tiny_run_config_file,
        model_config_file_path=fast_model_config_file,
        show_progress=False,
    )
    assert status in (0, 1)
    for name in (
        paths.RUNS_FILE_NAME,
        paths.STABLE_COUNTS_FILE_NAME,
        paths.SHD_SUMMARY_FILE_NAME,
        paths.TIMINGS_FILE_NAME,
        paths.SUMMARY_MD_FILE_NAME,
    ):
        assert (out / name).exists()
    summary = (out / paths.SUMMARY_MD_FILE_NAME).read_text()

    os.remove(out / paths.SUMMARY_MD_FILE_NAME)
    run_report(str(out))
    assert (out / paths.SUMMARY_MD_FILE_NAME).read_text().splitlines()[:12] == (
        summary.splitlines()[:12]
    )


def test_config_file_sits_between_defaults_and_flags(
    tmp_path, fast_model_config_file, tiny_run_config_file, errors_dir
):
    config_path = tmp_path / "override.json"
    config_path.write_text(json.dumps({"repeats": 1, "methods": ["notears-pool"], "sizes": [20]}))
    out = tmp_path / "sweep"
    run_sweep(
        overrides={"out": str(out), "sizes": [10]},
        config_file_path=str(config_path),
        run_config_file_path=tiny_run_config_file,
        model_config_file_path=fast_model_config_file,
        show_progress=False,
    )
    lines = (out / paths.RUNS_FILE_NAME).read_text().strip().splitlines()
    assert len(lines) == 1
    record = json.loads(lines[0])
    assert record["n"] == 10 and record["method"] == "notears-pool"


def test_run_with_empty_methods_fails(
    tmp_path, fast_model_config_file, tiny_run_config_file, errors_dir
):
    with pytest.raises(Exception, match="experiment sweep"):
        run_sweep(
            overrides={"out": str(tmp_path / "sweep"), "methods": []},
            run_config_file_path=tiny_run_config_file,
            model_config_file_path=fast_model_config_file,
            show_progress=False,
        )
    assert (errors_dir / "run_error.txt").exists()


def test_report_without_runs_file_fails(tmp_path, errors_dir):
    with pytest.raises(Exception, match="reporting"):
        run_report(str(tmp_path))
    assert (errors_dir / "report_error.txt").exists()


def test_generation_writes_dataset(tmp_path, errors_dir):
    out = tmp_path / "dataset"
    run_generation("E3", 15, seed=2, output_dir=str(out))
    assert (out / SIDECAR_FILE_NAME).exists()
    dataset = load_dataset(str(out))
    assert dataset.num_domains == 3
    assert dataset.sample_sizes == [15, 15, 15]


def test_generation_rejects_unknown_experiment(tmp_path, errors_dir):
    with pytest.raises(Exception, match="dataset generation"):
        run_generation("E9", 15, output_dir=str(tmp_path))
    assert (errors_dir / "gen_error.txt").exists()


def test_parse_arguments():
    args = parse_arguments(
        ["--experiments", "E1,E2", "--sizes", "10,100", "--methods", "cicme-f", "--save-results"]
    )
    assert args.experiments == ["E1", "E2"]
    assert args.sizes == [10, 100]
    assert args.methods == ["cicme-f"]
    assert args.save_results is True
    assert args.repeats is None
