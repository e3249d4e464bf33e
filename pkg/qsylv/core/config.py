from functools import lru_cache

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    rel_tol: float = Field(1e-10, gt=0.0, validation_alias="QSYLV_TOL")
    residual_tol: float = Field(1e-8, gt=0.0, validation_alias="QSYLV_RESIDUAL_TOL")
    oracle_size_cap: int = Field(4096, gt=0, validation_alias="QSYLV_ORACLE_SIZE_CAP")
    check_workers: int = Field(1, ge=1, validation_alias="QSYLV_CHECK_WORKERS")
    log_level: str = Field("WARNING", validation_alias="QSYLV_LOG_LEVEL")


@lru_cache
def get_settings() -> Settings:
    try:
        return Settings()
    except ValidationError as exc:
        # Name the offending variables instead of dumping the pydantic report.
        invalid = [e["loc"][0] for e in exc.errors()]
        invalid_str = ", ".join(str(name).upper() for name in invalid)
        raise RuntimeError(
            f"Invalid environment configuration: {invalid_str}. "
            "Please fix them in your environment or .env file."
        ) from exc
