"""
Laboratory configuration settings
"""

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


class Settings(BaseSettings):
    """Laboratory settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="LQLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application
    APP_NAME: str = "lqlab"
    VERSION: str = "0.3.0"

    # Execution
    THREADS: int = Field(default=1, description="Worker thread hint for trials")
    OUTPUT_DIR: str = Field(default="runs", description="Root directory for artifacts")
    DEFAULT_SEED: int = Field(default=20240611, description="Root seed when none given")

    # Nets and search
    NET_MAX_POINTS: int = Field(default=4096, description="Point budget per net")
    NET_FAILURE_STREAK: int = Field(
        default=200, description="Rejected candidates before packing stops"
    )
    ASCENT_RESTARTS: int = Field(default=8, description="Local searches per estimate")
    ASCENT_STEPS: int = Field(default=200, description="Steps per local search")
    AUDIT_POINTS: int = Field(default=1000, description="Points in coverage audits")

    # Estimators
    DUDLEY_EPS_LEVELS: int = Field(default=20, description="Dyadic entropy levels")
    POPULATION_BUDGET_FACTOR: int = Field(
        default=64, description="Monte Carlo population sample size per observation"
    )

    # Monitoring
    LOG_LEVEL: str = Field(default="INFO", description="Logging level")
    LOG_FORMAT: str = Field(default="json", description="json or console")

    @field_validator(
        "THREADS",
        "NET_MAX_POINTS",
        "NET_FAILURE_STREAK",
        "ASCENT_STEPS",
        "AUDIT_POINTS",
        "DUDLEY_EPS_LEVELS",
        "POPULATION_BUDGET_FACTOR",
    )
    @classmethod
    def validate_positive(cls, v: int) -> int:
        """Counts must be positive."""
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("ASCENT_RESTARTS")
    @classmethod
    def validate_restarts(cls, v: int) -> int:
        """Zero restarts disables ascent, negative is meaningless."""
        if v < 0:
            raise ValueError("must be nonnegative")
        return v

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Normalize and validate the logging level."""
        level = v.upper()
        if level not in _LOG_LEVELS:
            raise ValueError(f"LOG_LEVEL must be one of {sorted(_LOG_LEVELS)}")
        return level

    @field_validator("LOG_FORMAT")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Only the two structlog renderers are supported."""
        if v not in ("json", "console"):
            raise ValueError("LOG_FORMAT must be 'json' or 'console'")
        return v


# Global settings instance
settings = Settings()


class ExperimentDefaults:
    """Constant tables shared by experiments and reports."""

    # Summary quantiles reported for every trial campaign
    QUANTILE_LEVELS = (0.5, 0.9, 0.99)

    # Cone audit scales for restricted isometry certification
    CONE_SCALES = (1.0, 2.0, 4.0)

    # Default ratio window c for certification
    RATIO_WINDOW = 0.5

    # Net resolution as a fraction of the set diameter
    NET_EPS_FRACTION = 0.05

    # Long-format artifact schema
    CSV_HEADER = ("trial", "N", "d", "q", "statistic", "value", "seed")

    # Bisection settings for the fixed-point radius
    FIXED_POINT_ITERATIONS = 60
    FIXED_POINT_FLOOR = 2.0**-40

    # Monte Carlo error inflation used for conservative feasibility checks
    WIDTH_SE_MULTIPLIER = 2.0


experiment_defaults = ExperimentDefaults()
