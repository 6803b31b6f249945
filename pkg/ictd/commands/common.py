import argparse
import logging
from pathlib import Path
from typing import List, Optional

from ictd.artifacts import TASKS_NAME, RunManifest, read_json, record_outputs, write_json
from ictd.env_variables import ICTD_OUT_DIR
from ictd.exception import ConfigError
from ictd.mrp import Task, TaskSetDocument, task_set_from_document, task_set_to_document

MANIFEST_NAME = "manifest.json"


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Base seed of the run")
    parser.add_argument("--out-dir", type=Path, default=None, help=f"Output directory (default {ICTD_OUT_DIR}/<command>_<run>)")
    parser.add_argument("--config", type=Path, default=None, help="JSON configuration file")


def output_directory(out_dir: Optional[Path], manifest: RunManifest) -> Path:
    if out_dir is None:
        out_dir = Path(ICTD_OUT_DIR) / f"{manifest.command}_{manifest.run_id[:8]}"
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def finish_run(manifest: RunManifest, out_dir: Path, exit_code: int) -> RunManifest:
    """Hash the run's CSVs and task files into the manifest and write it next to them."""
    manifest = record_outputs(manifest, out_dir)
    write_json(manifest, out_dir / MANIFEST_NAME)
    logging.info({"event": "run_finished", "command": manifest.command, "run_id": manifest.run_id,
                  "out_dir": str(out_dir), "outputs": len(manifest.outputs), "exit_code": exit_code})
    return manifest


def save_tasks(tasks: List[Task], out_dir: Path, seed: Optional[int], frozen: bool = False) -> Path:
    path = write_json(task_set_to_document(tasks, seed, frozen), out_dir / TASKS_NAME, indent=None)
    logging.info({"event": "tasks_written", "path": str(path), "tasks": len(tasks), "frozen": frozen})
    return path


def load_tasks(tasks_dir: Path) -> List[Task]:
    """Tasks recorded by an earlier run in ``tasks_dir``."""
    path = tasks_dir / TASKS_NAME
    if not path.exists():
        raise ConfigError(f"recorded task file {path} is missing")
    tasks = task_set_from_document(read_json(TaskSetDocument, path))
    logging.info({"event": "tasks_loaded", "path": str(path), "tasks": len(tasks)})
    return tasks
