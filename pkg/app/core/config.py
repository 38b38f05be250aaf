from pydantic import BaseSettings
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    # Application settings
    PROJECT_NAME: str = "quadmetric"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Where runs are written when --out is not given
    OUTPUT_DIR: str = "runs"

    # Gradient check defaults
    GRADCHECK_THRESHOLD: float = 1e-4
    GRADCHECK_STEP: float = 1e-5

    class Config:
        case_sensitive = True
        env_prefix = "QUADMETRIC_"


# Create settings instance
settings = Settings()
