import argparse
import os
import sys
from typing import Dict, List, Optional

from config import paths
from data_models.config_validator import load_cicme_config
from harness.reporting import write_reports
from harness.sweep import build_plan, execute
from logger import get_logger, log_error
from utils import TimeAndMemoryTracker, read_json_as_dict

logger = get_logger(task_name="run")


def run_sweep(
    overrides: Optional[Dict] = None,
    config_file_path: Optional[str] = None,
    run_config_file_path: str = paths.RUN_CONFIG_FILE_PATH,
    model_config_file_path: str = paths.MODEL_CONFIG_FILE_PATH,
    show_progress: bool = True,
) -> int:
    """
    Run the experiment sweep and write its records and summary tables.

    Settings are merged as packaged run config < `config_file_path` <
    `overrides`.

    Args:
        overrides (Optional[Dict]): Flat settings from the command line.
        config_file_path (Optional[str]): Optional JSON file with the same keys.
        run_config_file_path (str, optional): The default run plan.
        model_config_file_path (str, optional): Model, solver and CICME defaults.
        show_progress (bool, optional): Show a progress bar.

    Returns:
        int: 0 when every run succeeded, 1 otherwise.
    """
    try:
        with TimeAndMemoryTracker(logger) as _:
            logger.info("Loading configuration...")
            settings = read_json_as_dict(run_config_file_path)
            if config_file_path is not None:
                settings.update(read_json_as_dict(config_file_path))
            cicme_config = load_cicme_config(read_json_as_dict(model_config_file_path))
            plan = build_plan(overrides or {}, base=settings, cicme=cicme_config)

            logger.info(
                f"Running {', '.join(e.value for e in plan.experiments)} x "
                f"sizes {plan.sample_sizes} x {plan.repeats} repeats x "
                f"{', '.join(m.value for m in plan.methods)}..."
            )
            records = execute(plan, show_progress=show_progress)

            logger.info("Writing reports...")
            write_reports(records, plan.output_dir)

        failed = [record for record in records if record.failed]
        if failed:
            logger.warning(f"{len(failed)} runs failed; see {paths.RUNS_FILE_NAME}")
            return 1
        logger.info("Sweep completed successfully")
        return 0

    except Exception as exc:
        err_msg = "Error occurred during the experiment sweep."
        # Log the error
        logger.error(f"{err_msg} Error: {str(exc)}")
        # Log the error to the separate logging file
        os.makedirs(paths.ERRORS_DIR, exist_ok=True)
        log_error(message=err_msg, error=exc, error_fpath=paths.RUN_ERROR_FILE_PATH)
        # re-raise the error
        raise Exception(f"{err_msg} Error: {str(exc)}") from exc


def _csv(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _csv_int(value: str) -> List[int]:
    return [int(item) for item in _csv(value)]


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse the sweep selection and the method settings."""
    parser = argparse.ArgumentParser(
        description="Run the multi-domain causal discovery experiment sweep."
    )
    parser.add_argument(
        "--config", help="JSON file with default settings (same keys as the flags)."
    )
    parser.add_argument("--experiments", type=_csv, help="Comma-separated, e.g. E1,E2.")
    parser.add_argument("--sizes", type=_csv_int, help="Per-domain sample sizes, e.g. 10,100,1000.")
    parser.add_argument("--repeats", type=int)
    parser.add_argument(
        "--methods", type=_csv, help="Subset of cicme-f,cicme-l,notears-pool,notears-ind."
    )
    parser.add_argument("--seed", type=int, help="Master seed.")
    parser.add_argument("--out", help="Output directory.")
    parser.add_argument("--jobs", type=int, help="Coordinates run in parallel.")
    parser.add_argument("--alpha", type=float, help="Level of the stability test.")
    parser.add_argument("--gamma", type=float, help="Weight of the common-structure penalty.")
    parser.add_argument("--lambda1", type=float, help="l1 weight on first-layer weights.")
    parser.add_argument("--threshold", type=float, help="Edge threshold for evaluation.")
    parser.add_argument(
        "--save-results",
        action="store_true",
        default=None,
        help="Also write a result bundle per run.",
    )
    return parser.parse_args(argv)


if __name__ == "__main__":
    args = parse_arguments()
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    sys.exit(run_sweep(overrides=overrides, config_file_path=args.config))
