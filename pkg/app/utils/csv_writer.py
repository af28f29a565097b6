import csv
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

from loguru import logger


def format_value(value: Any) -> str:
    """Shortest round-trip text: repr for floats, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(format_value(v) for v in value)
    return str(value)


def metadata_line(metadata: Dict[str, Any]) -> str:
    return "# " + " ".join(f"{key}={format_value(metadata[key])}" for key in sorted(metadata))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]],
              metadata: Dict[str, Any]) -> Path:
    """Metadata comment, header, rows; identical inputs give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(metadata_line(metadata) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def sibling(path: Path, suffix: str) -> Path:
    """results/run.csv, "checks" -> results/run_checks.csv."""
    path = Path(path)
    return path.with_name(f"{path.stem}_{suffix}{path.suffix or '.csv'}")
