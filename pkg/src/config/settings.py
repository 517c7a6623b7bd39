"""Application configuration settings."""

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

try:
    from dotenv import load_dotenv

    load_dotenv()
except ImportError:
    # dotenv is optional
    pass


class Settings(BaseSettings):
    """Application settings configuration."""

    model_config = SettingsConfigDict(
        env_file=".env.local", case_sensitive=False, extra="ignore"
    )

    # Application settings
    app_name: str = Field(default="Hypercol Toolkit API")
    app_version: str = Field(default="0.1.0")
    debug: bool = Field(default=False)
    log_level: str = Field(default="INFO")
    log_file: str | None = Field(default=None)

    # Worker pool
    default_workers: int = Field(default=1, ge=1)

    # Oracle guards (exact counting, sampling, flip-graph search)
    max_oracle_vertices: int = Field(default=16)
    max_oracle_states: int = Field(default=10_000_000)
    max_enumeration_states: int = Field(default=2_000_000)
    max_flip_moves: int = Field(default=500_000_000)
    planted_map_max_attempts: int = Field(default=1_000_000)

    # Simulation guards
    cycle_census_max_steps: int = Field(default=50_000_000)
    max_trial_work: int = Field(default=50_000_000)

    # Numerics
    fixed_point_tol: float = Field(default=1e-14)
    fixed_point_max_iter: int = Field(default=100_000)
    threshold_tol: float = Field(default=1e-9)
    identity_tol: float = Field(default=1e-10)

    # Output
    csv_schema_version: int = Field(default=1)

    # HTTP surface limits
    api_max_n: int = Field(default=20_000)
    api_max_trials: int = Field(default=200)


# Global settings instance
settings = Settings()
