from typing import Iterable, List

import numpy as np
import pandas as pd

from data_models.config_validator import Method
from data_models.record_data_model import RunRecord

# rendering of an undefined mean LSHD (no stable case)
MISSING_CELL = "−"
# methods whose records carry the stability verdicts, in order of preference
STABILITY_METHODS = [Method.CICME_F, Method.CICME_L]
TIMING_STEPS = ["step1", "step2", "step3", "total"]


def _successful(records: Iterable[RunRecord]) -> List[RunRecord]:
    return [record for record in records if not record.failed]


def shd_summary(records: Iterable[RunRecord]) -> pd.DataFrame:
    """
    Mean and standard deviation of the domain-averaged SHD per experiment,
    sample size and method. Failed runs are counted but not averaged.
    """
    records = list(records)
    rows = [
        {
            "experiment": r.experiment.value,
            "n": r.n,
            "method": r.method.value,
            "shd": np.nan if r.failed else r.evaluation.mean_shd,
            "failed": int(r.failed),
        }
        for r in records
    ]
    columns = ["experiment", "n", "method", "mean_shd", "std_shd", "runs", "failed"]
    if not rows:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(rows)
    summary = (
        frame.groupby(["experiment", "n", "method"], sort=True)
        .agg(
            mean_shd=("shd", "mean"),
            std_shd=("shd", lambda s: s.dropna().std(ddof=0)),
            runs=("shd", "count"),
            failed=("failed", "sum"),
        )
        .reset_index()
    )
    return summary[columns]


def _stability_records(records: Iterable[RunRecord]) -> List[RunRecord]:
    """One record per coordinate holding the stability verdicts."""
    by_coordinate = {}
    for record in _successful(records):
        if record.method not in STABILITY_METHODS or record.evaluation.stable is None:
            continue
        coordinate = (record.experiment.value, record.n, record.repeat)
        current = by_coordinate.get(coordinate)
        rank = STABILITY_METHODS.index(record.method)
        if current is None or rank < STABILITY_METHODS.index(current.method):
            by_coordinate[coordinate] = record
    return [by_coordinate[key] for key in sorted(by_coordinate)]


def stable_counts(records: Iterable[RunRecord]) -> pd.DataFrame:
    """
    Per experiment, sample size and variable: how many repeats judged the
    variable stable, and the pooled graph's LSHD averaged over those
    repeats only (NaN when the count is 0).
    """
    rows = []
    for record in _stability_records(records):
        evaluation = record.evaluation
        for j, stable in enumerate(evaluation.stable):
            rows.append(
                {
                    "experiment": record.experiment.value,
                    "n": record.n,
                    "variable": record.variable_names[j] if record.variable_names else f"X{j + 1}",
                    "index": j,
                    "stable": int(stable),
                    "lshd": evaluation.mean_pooled_lshd(j) if stable else np.nan,
                }
            )
    columns = ["experiment", "n", "variable", "stable_count", "repeats", "mean_lshd"]
    if not rows:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(rows)
    summary = (
        frame.groupby(["experiment", "n", "index", "variable"], sort=True)
        .agg(
            stable_count=("stable", "sum"),
            repeats=("stable", "count"),
            mean_lshd=("lshd", "mean"),
        )
        .reset_index()
    )
    return summary[columns]


def timing_summary(records: Iterable[RunRecord]) -> pd.DataFrame:
    """Median and quartiles of the wall-clock time of every step."""
    rows = [
        {
            "experiment": r.experiment.value,
            "n": r.n,
            "method": r.method.value,
            "step": step,
            "seconds": r.timings.get(step, 0.0),
        }
        for r in _successful(records)
        for step in TIMING_STEPS
    ]
    columns = ["experiment", "n", "method", "step", "median", "q1", "q3", "runs"]
    if not rows:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(rows)
    frame["step_order"] = frame["step"].map(TIMING_STEPS.index)
    summary = (
        frame.groupby(["experiment", "n", "method", "step_order", "step"], sort=True)["seconds"]
        .agg(
            median="median",
            q1=lambda s: s.quantile(0.25),
            q3=lambda s: s.quantile(0.75),
            runs="count",
        )
        .reset_index()
    )
    return summary[columns]


def _format(value, digits: int = 2) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return MISSING_CELL
    if isinstance(value, (float, np.floating)):
        return f"{value:.{digits}f}"
    return str(value)


def to_markdown(frame: pd.DataFrame, digits: int = 2) -> str:
    """Pipe table of a summary frame; NaN cells render as the missing-value dash."""
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    divider = "|" + "|".join(" --- " for _ in frame.columns) + "|"
    lines = [header, divider]
    for row in frame.itertuples(index=False):
        lines.append("| " + " | ".join(_format(v, digits) for v in row) + " |")
    return "\n".join(lines)


def render_summary(records: Iterable[RunRecord]) -> str:
    """Markdown report with the stable-count, SHD and timing tables."""
    records = list(records)
    counts = stable_counts(records)
    sections = ["# Sweep summary", ""]

    sections += ["## Identified stable variables", ""]
    if counts.empty:
        sections.append("No run of a method with a stability test.")
    else:
        table = counts.rename(
            columns={"stable_count": "stable count", "mean_lshd": "LSHD"}
        )[["experiment", "n", "variable", "stable count", "LSHD"]]
        sections.append(to_markdown(table))

    sections += ["", "## Mean SHD", ""]
    sections.append(to_markdown(shd_summary(records)))

    sections += ["", "## Execution time (seconds)", ""]
    sections.append(to_markdown(timing_summary(records), digits=3))
    return "\n".join(sections) + "\n"
