"""Process settings using Pydantic BaseSettings."""

import os

from pydantic import ConfigDict, Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process-wide settings, read from RIS_LAB_* environment variables."""

    # Parallelism
    threads: int | None = Field(
        default=None,
        ge=1,
        description="Cap on worker processes for grid evaluation (default: available cores)",
    )

    # Logging
    log_level: str = Field(default="INFO", description="Log level (DEBUG, INFO, WARNING, ERROR)")

    log_format: str = Field(default="json", pattern="^(json|console)$", description="Log renderer")

    # Numerics
    condition_warn: float = Field(
        default=1e8,
        gt=1,
        description="Condition estimate above which a linear solve is logged as ill-conditioned",
    )

    condition_limit: float = Field(
        default=1e13,
        gt=1,
        description="Condition estimate above which a linear solve is rejected as singular",
    )

    quadrature_cap: int = Field(
        default=16384,
        ge=128,
        description="Largest Gauss-Legendre order tried by the mutual impedance integration",
    )

    model_config = ConfigDict(
        env_prefix="RIS_LAB_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    def get_threads(self) -> int:
        """Resolve the worker cap, defaulting to the available cores."""
        if self.threads is not None:
            return self.threads
        return os.cpu_count() or 1


# Global settings instance
settings = Settings()
