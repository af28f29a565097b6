from pathlib import Path
from typing import Any, Dict, List, Optional

from app.core.config import settings
from app.core.dependencies import a_max_for
from app.models.experiment import ExperimentConfig


def output_path(config: ExperimentConfig, override: Optional[str], subcommand: str) -> Path:
    if override:
        return Path(override)
    if config.experiment.output:
        return Path(config.experiment.output)
    return settings.output_dir / f"{subcommand}.csv"


def run_metadata(config: ExperimentConfig, subcommand: str, sections: List[str],
                 tables_limit: Optional[int] = None, uses_a_max: bool = False) -> Dict[str, Any]:
    """Everything an emitted number depends on; thread count is left out."""
    metadata = config.metadata(sections)
    metadata["subcommand"] = subcommand
    if tables_limit is not None:
        metadata["limits.prime_limit"] = tables_limit
    if uses_a_max:
        metadata["limits.a_max"] = a_max_for(config)
    return metadata
