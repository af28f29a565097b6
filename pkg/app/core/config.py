from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv
from pathlib import Path


load_dotenv()


class Settings(BaseSettings):
    """
    Runtime knobs. Logging, workers and output_dir never change an emitted number.
    prime_limit and a_max are defaults for [limits]: they cap enumerations and so
    can change truncated sums; the values a run used go into the CSV metadata line.
    """
    model_config = SettingsConfigDict(env_prefix="EQB_")

    app_name: str = "equidist-bounds"
    debug: bool = False
    log_level: str = "INFO"
    log_file: str = "logs/application.log"
    log_rotation: str = "500 MB"
    prime_limit: int = 10_000_000
    a_max: int = 10_000_000
    workers: int = 1
    max_sieve_weights: int = 2_000_000
    output_dir: Path = Path("results")


settings = Settings()
