"""
harness/setting.py

Runtime configuration for experiment runs.
- Output root, runtime config path, worker count and logging level.
- Uses pydantic-settings so values can be overridden via `FLUCT_*` environment variables or a `.env` file.
- Import `from harness.setting import settings` anywhere in the project to access shared config.
"""

from pathlib import Path

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """
    Settings model holding output locations and execution defaults.
    Values can be customized by setting environment variables or editing `.env`.
    """

    # ---------- Locations ----------
    output_root: Path = Path("results")                        # FLUCT_OUTPUT_ROOT: every run writes below this
    runtime: Path = Path("configs/runtime/default.yaml")       # FLUCT_RUNTIME: runtime defaults file

    # ---------- Execution ----------
    workers: int = 1                 # Process pool size for ε points / replicas
    log_level: str = "INFO"          # Root logging level for the CLI
    bootstrap_resamples: int = 200   # Block-bootstrap resamples for correlation error bars

    class Config:
        # Allows values to be overridden via a `.env` file or env vars
        env_prefix = "FLUCT_"
        env_file = ".env"
        extra = "ignore"


# Singleton settings instance used across the harness
settings = Settings()
