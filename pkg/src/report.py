import argparse
import os

from config import paths
from harness.reporting import report
from logger import get_logger, log_error
from utils import TimeAndMemoryTracker

logger = get_logger(task_name="report")


def run_report(input_dir: str = paths.RUNS_DIR) -> None:
    """
    Rebuild the summary tables of a sweep from its runs file.

    Args:
        input_dir (str, optional): The sweep output directory.
    Returns:
        None
    """
    try:
        with TimeAndMemoryTracker(logger) as _:
            logger.info(f"Reporting on {input_dir}...")
            written = report(input_dir)
            for name, path in written.items():
                logger.info(f"{name}: {path}")
        logger.info("Report completed successfully")

    except Exception as exc:
        err_msg = "Error occurred during reporting."
        # Log the error
        logger.error(f"{err_msg} Error: {str(exc)}")
        # Log the error to the separate logging file
        os.makedirs(paths.ERRORS_DIR, exist_ok=True)
        log_error(message=err_msg, error=exc, error_fpath=paths.REPORT_ERROR_FILE_PATH)
        # re-raise the error
        raise Exception(f"{err_msg} Error: {str(exc)}") from exc


def parse_arguments() -> argparse.Namespace:
    """Parse the sweep directory to report on."""
    parser = argparse.ArgumentParser(description="Summarize an experiment sweep.")
    parser.add_argument("--in", dest="input_dir", default=paths.RUNS_DIR, help="Sweep directory.")
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_arguments()
    run_report(input_dir=args.input_dir)
