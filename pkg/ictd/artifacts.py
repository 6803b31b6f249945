"""
Run artifacts: CSV tables, JSON documents and the run manifest.

Every emitted file is either a CSV with a documented header (``CSV_SCHEMAS``)
or a JSON document produced from a pydantic model. The manifest records the
sha256 of every CSV and of every task file (``tasks.json``) so that a replay
can reload the tasks and be compared bitwise.
"""

import datetime
import hashlib
import json
import logging
import uuid
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from ictd import __version__
from ictd.constants import CSV_FLOAT_FORMAT
from ictd.exception import ConfigError, DimensionError

TASKS_NAME = "tasks.json"

CSV_SCHEMAS: Dict[str, List[str]] = {
    "equivalence": ["kind", "seed", "layer", "abs_diff", "log10_diff"],
    "equivalence_summary": ["kind", "layer", "max_log10_diff", "mean_log10_diff", "passed"],
    "invariant_set": ["coordinate", "block", "on_pattern", "mean", "std_error", "z_score", "passed"],
    "demo": ["context_length", "mean_msve", "std_error", "median_msve", "task_count"],
    "metrics": ["seed", "task_index", "step", "msve", "p_bottom_right", "p_avg_abs_others",
                "q_trace_left", "q_trace_right", "q_avg_abs_others", "vd", "iws", "ss"],
}


class MatrixDocument(BaseModel):
    rows: int = Field(..., description="Row count")
    cols: int = Field(..., description="Column count")
    data: List[float] = Field(..., description="Row-major entries")


class RunManifest(BaseModel):
    run_id: str = Field(..., description="uuid4 of the run")
    timestamp: str = Field(..., description="UTC start time, ISO-8601")
    command: str = Field(..., description="Subcommand that produced the run")
    config: Dict[str, Any] = Field(..., description="Fully resolved configuration")
    seed: Optional[int] = Field(None, description="Base seed of the run")
    code_version: str = Field(..., description="ictd package version")
    outputs: Dict[str, str] = Field(default_factory=dict, description="CSV file name -> sha256")
    tasks: Dict[str, str] = Field(default_factory=dict, description="Task file name -> sha256")


def matrix_to_document(matrix: np.ndarray) -> MatrixDocument:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    return MatrixDocument(rows=matrix.shape[0], cols=matrix.shape[1],
                          data=[float(x) for x in matrix.ravel()])


def matrix_from_document(doc: MatrixDocument) -> np.ndarray:
    if doc.rows * doc.cols != len(doc.data):
        raise DimensionError(f"{doc.rows}x{doc.cols} matrix cannot hold {len(doc.data)} entries")
    return np.array(doc.data, dtype=np.float64).reshape(doc.rows, doc.cols)


def new_manifest(command: str, config: Mapping[str, Any], seed: Optional[int]) -> RunManifest:
    return RunManifest(
        run_id=str(uuid.uuid4()),
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        command=command,
        config=dict(config),
        seed=seed,
        code_version=__version__,
    )

#--------------------------------------------------

def write_csv(rows: Iterable[Mapping[str, Any]], path: Path, schema: str) -> Path:
    """Write ``rows`` under the documented header of ``schema``."""
    columns = CSV_SCHEMAS[schema]
    frame = pd.DataFrame(list(rows), columns=columns)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, encoding="utf-8")
    check_csv_schema(path, schema)
    logging.info({"event": "csv_written", "path": str(path), "schema": schema, "rows": len(frame)})
    return path


def concat_csv(paths: Iterable[Path], path: Path, schema: str) -> Path:
    """Concatenate same-schema CSVs in the given order."""
    frames = [pd.read_csv(p) for p in paths]
    merged = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=CSV_SCHEMAS[schema])
    return write_csv(merged.to_dict(orient="records"), path, schema)


def check_csv_schema(path: Path, schema: str) -> None:
    """Parse an emitted CSV and check its header against the schema table."""
    header = list(pd.read_csv(path, nrows=0).columns)
    if header != CSV_SCHEMAS[schema]:
        raise ConfigError(f"{path} header {header} does not match schema '{schema}'")


def write_json(document: BaseModel, path: Path, indent: Optional[int] = 2) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=indent), encoding="utf-8")
    return path


def read_json(model: type, path: Path) -> BaseModel:
    try:
        return model.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def record_outputs(manifest: RunManifest, out_dir: Path) -> RunManifest:
    """Hash every CSV and task file under ``out_dir`` into the manifest."""
    outputs = {str(p.relative_to(out_dir)): sha256_file(p) for p in sorted(out_dir.rglob("*.csv"))}
    tasks = {str(p.relative_to(out_dir)): sha256_file(p) for p in sorted(out_dir.rglob(TASKS_NAME))}
    return manifest.model_copy(update={"outputs": outputs, "tasks": tasks})
