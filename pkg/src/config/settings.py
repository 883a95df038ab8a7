import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

DEBUG = os.getenv("DEBUG", "False").lower() == "true"
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE") or None
DEFAULT_JOBS = int(os.getenv("LEWIS_JOBS", "1"))
DEFAULT_ALPHA = float(os.getenv("DEFAULT_ALPHA", "0.05"))
DEFAULT_HSIC_ALPHA = float(os.getenv("DEFAULT_HSIC_ALPHA", "0.05"))
DEFAULT_BINS = int(os.getenv("DEFAULT_BINS", "10"))
DEFAULT_SAMPLE_SIZE = int(os.getenv("DEFAULT_SAMPLE_SIZE", "5000"))
DEFAULT_EXTENSION_CAP = int(os.getenv("DEFAULT_EXTENSION_CAP", "10000"))
DEFAULT_TRIALS = int(os.getenv("DEFAULT_TRIALS", "20"))
MIN_STRATUM_COVERAGE = float(os.getenv("MIN_STRATUM_COVERAGE", "0.5"))
EIGHT_VAR_CONFIG = Path(
    os.getenv(
        "EIGHT_VAR_CONFIG",
        str(Path(__file__).with_name("eight_var.json"))
    )
)
HSIC_BANDWIDTH_POINTS = 2000
HSIC_MAX_SAMPLES = 1000
