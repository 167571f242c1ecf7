"""
Centralized runtime configuration using Pydantic's BaseSettings.

This module defines a `Settings` class that loads solver tolerances, oracle
guards and logging options from environment variables (prefix ``MEL_``) and an
optional `.env` file. Experiment parameters (scenario, sweep grid, simulation)
live in config files parsed by `app.harness`; this object only holds knobs that
are the same for every experiment.

The `settings` object is a singleton instance of this class and should be
imported by other modules that need access to configuration values.
"""
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Application settings class.
    Values are loaded from environment variables or a .env file.
    """
    # --- Core Settings ---
    PROJECT_NAME: str = "AsyncMEL Staleness Allocator"
    VERSION: str = "1.0.0"
    DESCRIPTION: str = """
    Batch/update allocation for asynchronous mobile edge learning over
    heterogeneous wireless learners, with baselines, a brute-force oracle and
    a convex divergence simulator.
    """

    # --- Logging ---
    # Logs always go to stderr so that result rows on stdout stay reproducible.
    LOG_LEVEL: str = "WARNING"
    LOG_JSON: bool = True

    # --- Relaxed solver (bisection on the common update count) ---
    # Stop when |g(tau) - d| <= BISECTION_RTOL * d or when the bracket is
    # narrower than BISECTION_XTOL * max(1, tau_hi).
    BISECTION_RTOL: float = Field(1e-10, gt=0, le=1e-6)
    BISECTION_XTOL: float = Field(1e-12, gt=0)
    BISECTION_MAX_ITER: int = Field(200, ge=1)

    # --- KKT diagnostics ---
    KKT_TOLERANCE: float = Field(1e-6, gt=0)
    ACTIVE_CONSTRAINT_TOL: float = Field(1e-9, ge=0)

    # --- Brute-force oracle guard ---
    ORACLE_MAX_LEARNERS: int = Field(5, ge=1)
    ORACLE_MAX_TAU_CAP: int = Field(30, ge=1)

    # --- Sweeps and output ---
    # SWEEP_WORKERS > 1 runs grid cells on a process pool; rows are still
    # emitted in grid order.
    SWEEP_WORKERS: int = Field(1, ge=1)
    FLOAT_DIGITS: int = Field(9, ge=1, le=17)

    model_config = SettingsConfigDict(
        env_prefix="MEL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# Create a single, globally accessible instance of the Settings class.
# Other modules should import this `settings` object.
settings = Settings()
