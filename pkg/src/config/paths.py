import os

# Path to the root directory which contains the src directory
ROOT_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Path to the outputs directory:
#   set to environment variable CICME_OUTPUTS_PATH if it exists
#   else: set to default path which would be <path_to_root>/outputs/
OUTPUTS_DIR = os.environ.get("CICME_OUTPUTS_PATH", os.path.join(ROOT_DIR, "outputs"))

# Default output directory of the experiment sweep
RUNS_DIR = os.path.join(OUTPUTS_DIR, "runs")
# Default output directory of generated datasets
DATASETS_DIR = os.path.join(OUTPUTS_DIR, "datasets")

# Path to logs directory inside outputs directory
ERRORS_DIR = os.path.join(OUTPUTS_DIR, "errors")
# Error file paths
RUN_ERROR_FILE_PATH = os.path.join(ERRORS_DIR, "run_error.txt")
REPORT_ERROR_FILE_PATH = os.path.join(ERRORS_DIR, "report_error.txt")
GEN_ERROR_FILE_PATH = os.path.join(ERRORS_DIR, "gen_error.txt")

# Paths inside the source directory
# Path to source directory
SRC_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
# Path to config directory
CONFIG_DIR = os.path.join(SRC_DIR, "config")
# Path to model, solver and CICME defaults
MODEL_CONFIG_FILE_PATH = os.path.join(CONFIG_DIR, "model_config.json")
# Path to the default run plan
RUN_CONFIG_FILE_PATH = os.path.join(CONFIG_DIR, "run_config.json")

# File names written into a sweep output directory
RUNS_FILE_NAME = "runs.jsonl"
MANIFEST_FILE_NAME = "manifest.json"
STABLE_COUNTS_FILE_NAME = "stable_counts.csv"
SHD_SUMMARY_FILE_NAME = "shd_summary.csv"
TIMINGS_FILE_NAME = "timings.csv"
SUMMARY_MD_FILE_NAME = "summary.md"
RESULTS_SUBDIR_NAME = "results"
