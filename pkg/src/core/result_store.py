"""Versioned CSV and JSON writers for experiment results."""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd

from config.settings import settings
from models.experiment import ExperimentResult
from utils.logger import get_logger

logger = get_logger(__name__)


class ResultStore:
    """Serializes experiment results; CSV for tables, JSON for nested reports."""

    def __init__(self, schema_version: Optional[int] = None):
        self.schema_version = schema_version or settings.csv_schema_version

    def to_frame(self, result: ExperimentResult, summary: bool = False) -> pd.DataFrame:
        frame = pd.DataFrame(result.summary if summary else result.rows())
        frame.insert(0, "schema_version", self.schema_version)
        return frame

    def to_csv(self, result: ExperimentResult, summary: bool = False) -> str:
        frame = self.to_frame(result, summary)
        return frame.to_csv(index=False, float_format="%.12g", lineterminator="\n")

    def to_payload(self, result: ExperimentResult) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "config": result.config.echo(),
            "records": result.rows() if result.records else [],
            "summary": result.summary,
            "report": result.report,
        }

    def to_json(self, result: ExperimentResult) -> str:
        return json.dumps(self.to_payload(result), indent=2, sort_keys=True, default=str) + "\n"

    def render(
        self, result: ExperimentResult, fmt: Optional[str] = None, summary: bool = False
    ) -> str:
        fmt = fmt or result.config.format
        return self.to_json(result) if fmt == "json" else self.to_csv(result, summary)

    def write(
        self, result: ExperimentResult, path: Path, fmt: Optional[str] = None, summary: bool = False
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(result, fmt, summary))
        logger.info(f"Wrote {result.config.kind.value} results to {path}")
        return path

    def read_csv(self, path: Path) -> pd.DataFrame:
        frame = pd.read_csv(path)
        version = int(frame["schema_version"].iloc[0]) if len(frame) else self.schema_version
        if version != self.schema_version:
            logger.warning(
                f"{path} has schema version {version}, expected {self.schema_version}"
            )
        return frame


result_store = ResultStore()
