import os
import platform
from typing import Dict, Iterator, List, Optional, Tuple

import joblib
import numpy as np
import pandas as pd
import pydantic
import scipy
from joblib import Parallel, delayed
from tqdm import tqdm

from cicme.engine import run as run_method
from cicme.engine import save_cicme_result
from config import paths
from data_models.config_validator import (
    CicmeConfig,
    Experiment,
    Method,
    RunPlan,
    validate_run_plan_dict,
)
from data_models.record_data_model import (
    RECORD_STATUS_FAILED,
    RECORD_STATUS_OK,
    RunRecord,
    parse_run_record,
)
from evaluation.metrics import evaluate
from logger import get_logger
from scm.generator import make_experiment
from utils import derive_seed, save_json

logger = get_logger(task_name="harness")

# seed key of the CICME stream, appended after the coordinate keys
METHOD_STREAM = 1

Coordinate = Tuple[Experiment, int, int]


def coordinates(plan: RunPlan) -> List[Coordinate]:
    """Every (experiment, n, repeat) of the plan in a fixed order."""
    return [
        (experiment, n, repeat)
        for experiment in plan.experiments
        for n in plan.sample_sizes
        for repeat in range(plan.repeats)
    ]


def dataset_seed(master_seed: int, experiment: Experiment, n: int, repeat: int) -> int:
    return derive_seed(master_seed, experiment.number, n, repeat)


def method_seed(master_seed: int, experiment: Experiment, n: int, repeat: int) -> int:
    return derive_seed(master_seed, experiment.number, n, repeat, METHOD_STREAM)


def result_dir_name(experiment: Experiment, n: int, repeat: int, method: Method) -> str:
    return f"{experiment.value}_n{n}_r{repeat}_{method.value}"


def run_coordinate(
    plan: RunPlan, experiment: Experiment, n: int, repeat: int, methods: List[Method]
) -> List[RunRecord]:
    """
    Generates the coordinate's dataset once and runs every method on it.

    A method that raises is recorded as failed; the others still run.
    """
    data_seed = dataset_seed(plan.master_seed, experiment, n, repeat)
    cicme_seed = method_seed(plan.master_seed, experiment, n, repeat)
    dataset = make_experiment(experiment, n, data_seed)
    truths = dataset.true_adjacencies()
    config = plan.cicme.model_copy(update={"seed": cicme_seed})

    records = []
    for method in methods:
        base = dict(
            experiment=experiment,
            n=n,
            repeat=repeat,
            method=method,
            dataset_seed=data_seed,
            method_seed=cicme_seed,
            variable_names=dataset.variable_names,
        )
        try:
            result = run_method(dataset, method, config)
            evaluation = evaluate(result, truths, plan.threshold)
            if plan.save_results:
                save_cicme_result(
                    result,
                    os.path.join(
                        plan.output_dir,
                        paths.RESULTS_SUBDIR_NAME,
                        result_dir_name(experiment, n, repeat, method),
                    ),
                    tau=plan.threshold,
                )
            error = "; ".join(f"domain {k}: {e}" for k, e in result.errors.items())
            records.append(
                RunRecord(
                    **base,
                    status=RECORD_STATUS_FAILED if result.failed else RECORD_STATUS_OK,
                    error=error or None,
                    evaluation=evaluation,
                    stable_set=None if result.stability is None else result.stable_set,
                    p_values=(
                        None if result.stability is None
                        else result.stability.p_values.tolist()
                    ),
                    timings=result.timings,
                    convergence=result.convergence_flags(),
                )
            )
        except Exception as exc:
            logger.warning(
                f"{method.value} failed on {experiment.value}, n={n}, repeat={repeat}: {exc}"
            )
            records.append(RunRecord(**base, status=RECORD_STATUS_FAILED, error=str(exc)))
    return records


def load_records(runs_file_path: str) -> List[RunRecord]:
    """Reads a runs file; a missing file yields no records."""
    if not os.path.exists(runs_file_path):
        return []
    records = []
    with open(runs_file_path, "r", encoding="utf-8") as file:
        for line in file:
            if line.strip():
                records.append(parse_run_record(line))
    return records


def _append_records(runs_file_path: str, records: List[RunRecord]) -> None:
    try:
        with open(runs_file_path, "a", encoding="utf-8") as file:
            file.write("".join(record.to_json_line() + "\n" for record in records))
            file.flush()
            os.fsync(file.fileno())
    except IOError as exc:
        raise IOError(f"Error appending to runs file '{runs_file_path}': {exc}") from exc


def package_versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
        "joblib": joblib.__version__,
    }


def write_manifest(plan: RunPlan) -> None:
    save_json(
        os.path.join(plan.output_dir, paths.MANIFEST_FILE_NAME),
        {"plan": plan.model_dump(mode="json"), "versions": package_versions()},
    )


def pending_work(
    plan: RunPlan, existing: List[RunRecord]
) -> Iterator[Tuple[Coordinate, List[Method]]]:
    """Coordinates with at least one method still missing a record."""
    done = {record.key for record in existing}
    for experiment, n, repeat in coordinates(plan):
        missing = [
            method
            for method in plan.methods
            if (experiment.value, n, repeat, method.value) not in done
        ]
        if missing:
            yield (experiment, n, repeat), missing


def execute(plan: RunPlan, show_progress: bool = True) -> List[RunRecord]:
    """
    Runs the sweep and appends one line per record to the runs file.

    Coordinates whose records already exist in the output directory are
    skipped. Records are written in coordinate order whatever the number of
    jobs, so a fresh sweep's runs file does not depend on parallelism
    (timings aside).

    Args:
        plan (RunPlan): The sweep.
        show_progress (bool): Display a progress bar over coordinates.

    Returns:
        List[RunRecord]: Every record of the plan, old and new.
    """
    os.makedirs(plan.output_dir, exist_ok=True)
    runs_file_path = os.path.join(plan.output_dir, paths.RUNS_FILE_NAME)
    existing = load_records(runs_file_path)
    work = list(pending_work(plan, existing))
    total = len(coordinates(plan))
    logger.info(
        f"{total} coordinates, {total - len(work)} already complete, {len(work)} to run"
    )
    write_manifest(plan)

    new_records = []
    if work:
        results = Parallel(n_jobs=plan.jobs, return_as="generator")(
            delayed(run_coordinate)(plan, experiment, n, repeat, methods)
            for (experiment, n, repeat), methods in work
        )
        for records in tqdm(results, total=len(work), desc="Sweep", disable=not show_progress):
            _append_records(runs_file_path, records)
            new_records.extend(records)

    failed = sum(record.failed for record in new_records)
    if failed:
        logger.warning(f"{failed} of {len(new_records)} new runs failed")
    wanted = {
        (e.value, n, r, m.value)
        for e, n, r in coordinates(plan)
        for m in plan.methods
    }
    return [record for record in existing + new_records if record.key in wanted]


def build_plan(
    overrides: Dict,
    base: Optional[Dict] = None,
    cicme: Optional[CicmeConfig] = None,
) -> RunPlan:
    """
    Merges flat CLI-style settings into a RunPlan.

    Keys: experiments, sizes, repeats, methods, seed, out, jobs, threshold,
    save_results, alpha, gamma, lambda1. Later sources win: `base` first,
    then `overrides`; None values are ignored.
    """
    settings = {}
    for source in (base or {}, overrides):
        settings.update({k: v for k, v in source.items() if v is not None})
    cicme = cicme or CicmeConfig()
    cicme_updates = {k: settings[k] for k in ("alpha", "gamma") if k in settings}
    if "lambda1" in settings:
        cicme_updates["model"] = cicme.model.model_copy(update={"lambda1": settings["lambda1"]})
    cicme = CicmeConfig.model_validate({**cicme.model_dump(), **cicme_updates})

    plan_dict = {
        "experiments": settings.get("experiments"),
        "sample_sizes": settings.get("sizes"),
        "repeats": settings.get("repeats"),
        "methods": settings.get("methods"),
        "master_seed": settings.get("seed"),
        "output_dir": settings.get("out", paths.RUNS_DIR),
        "jobs": settings.get("jobs"),
        "threshold": settings.get("threshold"),
        "save_results": settings.get("save_results"),
        "cicme": cicme,
    }
    return validate_run_plan_dict({k: v for k, v in plan_dict.items() if v is not None})
