import os
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv

# Load .env file
load_dotenv()

# Base directory
BASE_DIR = Path(__file__).resolve().parent.parent.parent


def _optional_int(name: str) -> Optional[int]:
    value = os.getenv(name)
    return int(value) if value else None


# Load environment variables or use defaults
class Settings:
    # Logging Settings
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: str = os.getenv("LOG_FILE", str(BASE_DIR / "logs" / "palm.log"))

    # Parallelism: --threads wins, then PALM_THREADS, then all cores
    PALM_THREADS: Optional[int] = _optional_int("PALM_THREADS")

    # Output Settings
    PALM_OUTPUT_DIR: str = os.getenv("PALM_OUTPUT_DIR", "runs")

    @classmethod
    def validate(cls) -> bool:
        """Validate settings"""
        if cls.PALM_THREADS is not None and cls.PALM_THREADS < 1:
            raise ValueError(f"PALM_THREADS must be positive, got {cls.PALM_THREADS}")
        if cls.LOG_LEVEL.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown LOG_LEVEL: {cls.LOG_LEVEL}")
        return True

    @classmethod
    def resolve_threads(cls, threads: Optional[int] = None) -> int:
        """Worker count: explicit value, then PALM_THREADS, then available cores"""
        if threads is not None:
            if threads < 1:
                raise ValueError(f"threads must be positive, got {threads}")
            return threads
        if cls.PALM_THREADS is not None:
            return cls.PALM_THREADS
        return os.cpu_count() or 1


# Create settings instance
settings = Settings()
settings.validate()  # Validate on import
