"""Environment selection and runtime settings."""
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()

# Project root (output and logs live next to the package)
BASE_DIR = Path(__file__).parent.parent

# Environment-based output selection
# ENVIRONMENT can be: prod, staging, or test
# Default to production if not specified
ENVIRONMENT = os.environ.get('ENVIRONMENT', 'prod').lower()

# Output directory mapping
OUTPUT_DIRS = {
    'prod': 'output',                # Production artifacts
    'staging': 'output/staging',     # Staging runs
    'test': 'output/test'            # Unit test runs
}

# Log file mapping
LOG_FILES = {
    'prod': 'fptlie.log',
    'staging': 'fptlie_staging.log',
    'test': 'fptlie_test.log'
}

# Allow override with FPTLIE_OUTPUT_DIR env var (for advanced usage)
OUTPUT_DIR = Path(os.environ.get(
    'FPTLIE_OUTPUT_DIR',
    str(BASE_DIR / OUTPUT_DIRS.get(ENVIRONMENT, OUTPUT_DIRS['prod']))
))
LOG_DIR = Path(os.environ.get('FPTLIE_LOG_DIR', str(BASE_DIR / "logs")))
LOG_FILE = LOG_DIR / LOG_FILES.get(ENVIRONMENT, LOG_FILES['prod'])


class Settings(BaseSettings):
    """Runtime defaults; every field can be set as FPTLIE_<NAME> or in .env."""
    model_config = SettingsConfigDict(env_prefix="FPTLIE_", env_file=".env", extra="ignore")

    seed: int = 20240101
    workers: int = 1
    block_size: int = 4096          # paths per RNG stream block
    n_paths: int = 100_000
    dt: float = 1e-3
    bridge_correction: bool = True
    series_terms: int = 80           # initial spectral-series length
    series_max_terms: int = 400      # doubling stops here
    series_tol: float = 1e-10
    residual_tol: float = 1e-4
    log_level: str = "INFO"


settings = Settings()

# Announce which environment is in use (stdout is reserved for artifacts)
print(f"[Config] Environment: {ENVIRONMENT.upper()} | Output: {OUTPUT_DIR}", file=sys.stderr)
