import argparse
import os

from config import paths
from data_models.config_validator import Experiment
from logger import get_logger, log_error
from schema.dataset_schema import save_dataset
from scm.generator import make_experiment
from utils import TimeAndMemoryTracker

logger = get_logger(task_name="gen")


def run_generation(
    experiment: str,
    n: int,
    seed: int = 0,
    output_dir: str = paths.DATASETS_DIR,
) -> None:
    """
    Generate one scenario's dataset and save it with its ground truth.

    Args:
        experiment (str): Scenario id, E1..E4.
        n (int): Per-domain sample count.
        seed (int, optional): Dataset seed.
        output_dir (str, optional): Directory to write the dataset into.
    Returns:
        None
    """
    try:
        with TimeAndMemoryTracker(logger) as _:
            logger.info(f"Generating {experiment} with n={n}, seed={seed}...")
            dataset = make_experiment(Experiment(experiment), n, seed)

            logger.info(f"Saving dataset to {output_dir}...")
            save_dataset(dataset, output_dir)
        logger.info("Generation completed successfully")

    except Exception as exc:
        err_msg = "Error occurred during dataset generation."
        # Log the error
        logger.error(f"{err_msg} Error: {str(exc)}")
        # Log the error to the separate logging file
        os.makedirs(paths.ERRORS_DIR, exist_ok=True)
        log_error(message=err_msg, error=exc, error_fpath=paths.GEN_ERROR_FILE_PATH)
        # re-raise the error
        raise Exception(f"{err_msg} Error: {str(exc)}") from exc


def parse_arguments() -> argparse.Namespace:
    """Parse the scenario, sample size, seed and output directory."""
    parser = argparse.ArgumentParser(description="Generate a synthetic multi-domain dataset.")
    parser.add_argument("--experiment", required=True, choices=[e.value for e in Experiment])
    parser.add_argument("--n", type=int, required=True, help="Samples per domain.")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=paths.DATASETS_DIR, help="Output directory.")
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_arguments()
    run_generation(args.experiment, args.n, seed=args.seed, output_dir=args.out)
