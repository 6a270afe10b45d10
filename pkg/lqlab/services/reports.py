"""
Run artifacts: report.json and long-format data.csv
"""

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Optional

import structlog
from pydantic import BaseModel

from lqlab import __version__
from lqlab.core.config import experiment_defaults, settings
from lqlab.models.run_config import RunConfig

logger = structlog.get_logger()


class DataRow(BaseModel):
    """One long-format observation."""

    trial: int
    N: int
    d: int
    q: float
    statistic: str
    value: float
    seed: int


def run_id(config: RunConfig) -> str:
    """Content hash of the run parameters, independent of the output location."""
    normalized = config.model_dump(mode="json", exclude={"out", "threads"})
    param_string = json.dumps(normalized, sort_keys=True)
    return hashlib.sha256(param_string.encode()).hexdigest()[:16]


def output_dir(config: RunConfig) -> Path:
    if config.out:
        return Path(config.out)
    return Path(settings.OUTPUT_DIR) / f"{config.command.value}-{run_id(config)}"


def _jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


def write_artifacts(
    config: RunConfig,
    outputs: dict[str, Any],
    rows: list[DataRow],
    checks: Optional[dict[str, bool]] = None,
) -> Path:
    """Write report.json and data.csv once, at the end of a run."""
    directory = output_dir(config)
    directory.mkdir(parents=True, exist_ok=True)

    report = {
        "run_id": run_id(config),
        "version": __version__,
        "command": config.command.value,
        "seed": config.seed,
        "inputs": config.model_dump(mode="json"),
        "outputs": _jsonable(outputs),
    }
    if checks is not None:
        report["checks"] = checks
    (directory / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    with open(directory / "data.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(experiment_defaults.CSV_HEADER)
        for row in rows:
            writer.writerow([getattr(row, column) for column in experiment_defaults.CSV_HEADER])

    logger.info("Artifacts written", directory=str(directory), rows=len(rows))
    return directory
