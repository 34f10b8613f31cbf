import os

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    PROJECT_NAME: str = "xmodal"
    VERSION: str = "0.1.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Compute
    SIMILARITY_BLOCK: int = Field(default=1024, ge=1)
    WORKERS: int = Field(default=1, ge=1)

    # Reproducibility
    DEFAULT_SEED: int = 0

    model_config = SettingsConfigDict(
        env_file=".env.test" if os.getenv("TESTING") else ".env",
        env_prefix="XMODAL_",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
