from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    APP_NAME: str = "bfreg"

    # Reports land here unless --out is given
    OUTPUT_DIR: str = "runs"
    LOG_LEVEL: str = "INFO"
    # Parallel replication workers; 1 keeps runs strictly sequential
    JOBS: int = 1

    # Regularization defaults
    DEFAULT_EPS_W: float = 1e-5

    # |theta| histogram: decade bins from 10**HIST_MIN_EXP to 10**HIST_MAX_EXP
    HIST_MIN_EXP: int = -8
    HIST_MAX_EXP: int = 1
    SPARSITY_THRESHOLD: float = 1e-3

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="BFREG_",
        extra="ignore"
    )


@lru_cache()
def get_settings() -> Settings:
    return Settings()
