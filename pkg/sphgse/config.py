"""Path constants and numerical defaults for sphgse."""

from __future__ import annotations

import os
from pathlib import Path

# Root of the repository
REPO_ROOT = Path(__file__).resolve().parent.parent

# Data directories
DATA_DIR = REPO_ROOT / "data"
SCHEMA_DIR = DATA_DIR / "schema"
MODELS_DIR = DATA_DIR / "models"

# Schema files
MODEL_SCHEMA_FILE = SCHEMA_DIR / "model.schema.json"
ANSATZ_SCHEMA_FILE = SCHEMA_DIR / "ansatz.schema.json"

# Model evaluation
MAX_ORDER = 4
TRUNCATION_MAX_DEGREE = 200

# Sign profile
ROOT_RESOLUTION = 1e-4
ROOT_REFINE_TOL = 1e-12
ZERO_SIGN_FLOOR = 1e-12  # relative to 1 + max |d|

# Order parameters
DEFAULT_GRID = 2000
MIN_ANSATZ_GRID = 100
MIN_SOLVER_GRID = 500
POSITIVITY_FLOOR = 1e-8
CONE_TOL = 1e-12

# Certificates
OBSTACLE_TOL = 1e-9  # scaled by 1 + xi(1)
BC_TOL = 1e-7

# Master equation
SK_RATIO_TOL = 1e-14
MASTER_TOL = 1e-13

# Solvers
MAX_ITERATIONS = 200_000
STALL_WINDOW = 50  # iterations
STALL_TOL = 1e-12
GRAD_TOL = 1e-10
KKT_TOL = 1e-10  # sup norm of the projected gradient
NEWTON_MAX_ITER = 100
MULTI_START = 4
DEFAULT_SEED = 0
REDUCTION_MARGIN_TOL = 1e-6

# Finite temperature
FINITE_BETA_GRID = 4000
BETA_LADDER = (8.0, 32.0, 128.0)

# Sweeps
BOUNDARY_TOL = 1e-6
THREADS_ENV = "SPHGSE_THREADS"


def max_workers() -> int:
    """Return the sweep parallelism cap from ``SPHGSE_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as e:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    if value < 1:
        raise ValueError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value
