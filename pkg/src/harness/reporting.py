import os
from typing import Dict, List

from config import paths
from data_models.record_data_model import RunRecord
from evaluation.aggregate import render_summary, shd_summary, stable_counts, timing_summary
from harness.sweep import load_records
from logger import get_logger
from utils import save_dataframe_as_csv

logger = get_logger(task_name="harness")


def write_reports(records: List[RunRecord], output_dir: str) -> Dict[str, str]:
    """
    Writes the summary tables of a sweep.

    Args:
        records (List[RunRecord]): At least one run record.
        output_dir (str): Directory to write into.

    Returns:
        Dict[str, str]: Written file path per table name.
    """
    if not records:
        raise ValueError("No run records to report on")
    os.makedirs(output_dir, exist_ok=True)
    written = {
        "stable_counts": os.path.join(output_dir, paths.STABLE_COUNTS_FILE_NAME),
        "shd_summary": os.path.join(output_dir, paths.SHD_SUMMARY_FILE_NAME),
        "timings": os.path.join(output_dir, paths.TIMINGS_FILE_NAME),
        "summary": os.path.join(output_dir, paths.SUMMARY_MD_FILE_NAME),
    }
    save_dataframe_as_csv(stable_counts(records), written["stable_counts"])
    save_dataframe_as_csv(shd_summary(records), written["shd_summary"])
    save_dataframe_as_csv(timing_summary(records), written["timings"], float_format="%.6f")
    try:
        with open(written["summary"], "w", encoding="utf-8") as file:
            file.write(render_summary(records))
    except IOError as exc:
        raise IOError(f"Error saving summary file '{written['summary']}': {exc}") from exc
    logger.info(f"Reports written to {output_dir}")
    return written


def report(input_dir: str) -> Dict[str, str]:
    """Rebuilds the summary tables from the runs file of a sweep directory."""
    runs_file_path = os.path.join(input_dir, paths.RUNS_FILE_NAME)
    if not os.path.exists(runs_file_path):
        raise FileNotFoundError(f"No such file or directory: '{runs_file_path}'")
    return write_reports(load_records(runs_file_path), input_dir)
