"""Test configuration: pin the test environment before fptlie is imported."""
import os
import tempfile

# CRITICAL: set before any fptlie import so config picks the test directories
os.environ["ENVIRONMENT"] = "test"
_SCRATCH = tempfile.mkdtemp(prefix="fptlie-test-")
os.environ.setdefault("FPTLIE_OUTPUT_DIR", os.path.join(_SCRATCH, "output"))
os.environ.setdefault("FPTLIE_LOG_DIR", os.path.join(_SCRATCH, "logs"))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from fptlie.commands.common import sde_config  # noqa: E402
from fptlie.services import families  # noqa: E402

# Small-sample MC settings shared by the oracle tests
SMALL_MC = {"n_paths": 20_000, "dt": 1e-3, "seed": 12345, "block_size": 2048}


@pytest.fixture
def small_mc():
    return dict(SMALL_MC)


@pytest.fixture
def bm_config(small_mc):
    """Zero-drift simulation from 0 with horizon 1."""
    def build(horizon=1.0, x0=0.0, **overrides):
        return sde_config(families.bm_spec(), x0, horizon, {**small_mc, **overrides})
    return build


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def out_dir(tmp_path):
    """Per-test artifact directory."""
    return tmp_path
