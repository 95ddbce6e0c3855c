"""
Configuration for the real-moduli laboratory.

Keeps every tolerance, iteration cap and run default in one place so the
numerical modules and the CLI agree on them.
"""

import os
from dataclasses import dataclass
from typing import Dict, Any


ARTIFACT_VERSION = "1.0.0"
SCHEMA_VERSION = 1
SEED_ENV_VAR = "REAL_MODULI_SEED"


@dataclass
class ToleranceConfig:
    """Acceptance thresholds shared by solvers and checks."""
    TOL_CONSTRAINT: float = 1e-10
    TOL_FIXED: float = 1e-8
    TOL_GRAD: float = 1e-7
    # relative to the spectral radius of the Hessian
    TOL_EIG: float = 1e-5
    TOL_EIG_FLOOR: float = 1e-8
    TOL_MATCH: float = 1e-5
    FINGERPRINT_GAP: float = 1e-6
    BASIN_GAP: float = 0.5
    ORTHO_DROP: float = 1e-8


@dataclass
class SolverConfig:
    """Iteration caps and finite-difference steps."""
    SERIES_CUTOFF: float = 1e-8
    ANTIPODE_TOL: float = 1e-9
    PROJECT_MAX_ITER: int = 100
    RANDOM_POINT_ATTEMPTS: int = 10
    SYMMETRIZE_MAX_ITER: int = 200
    FIXED_SEARCH_MAX_ITER: int = 100
    FIXED_SEARCH_ATTEMPTS: int = 20
    FIXED_SEARCH_TOL: float = 1e-12
    INVOLUTION_STEP: float = 1e-5
    HESSIAN_STEP: float = 1e-4
    JACOBIAN_STEP: float = 1e-6
    FLOW_MAX_STEPS: int = 10_000
    FLOW_INITIAL_STEP: float = 0.25
    FLOW_MAX_STEP: float = 1.0
    FLOW_PROJECT_TOL: float = 1e-13
    FLOW_SYMMETRIZE_TOL: float = 1e-11


@dataclass
class RunDefaults:
    """Defaults for a verification run."""
    SEED: int = 42
    SAMPLES: int = 500
    GRID_N: int = 64
    FAMILY_SAMPLES: int = 32
    DIMENSION_SAMPLES: int = 100
    PI1_SAMPLES: int = 100
    ALGEBRA_SAMPLES: int = 1000
    WORKERS: int = 1
    FORMAT: str = "text"
    PUNCTURE: str = "left"


class AppConfig:
    """Main application configuration."""

    def __init__(self):
        self.tolerances = ToleranceConfig()
        self.solver = SolverConfig()
        self.run = RunDefaults()

    def default_seed(self) -> int:
        """Seed from the environment, falling back to the run default."""
        raw = os.environ.get(SEED_ENV_VAR)
        if raw is None or not raw.strip():
            return self.run.SEED
        return int(raw.strip(), 0)

    def as_dict(self) -> Dict[str, Any]:
        """Flat snapshot used when echoing configuration into reports."""
        return {
            "tolerances": dict(vars(self.tolerances)),
            "solver": dict(vars(self.solver)),
            "run": dict(vars(self.run)),
        }


# Global configuration instance
config = AppConfig()
