"""
``replay``: re-run a recorded configuration on its recorded tasks and
compare output hashes.
"""

import argparse
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ictd.artifacts import RunManifest, read_json, record_outputs, sha256_file
from ictd.commands import demo_command, train_command, verify_command
from ictd.exception import EXIT_FAILURE, EXIT_OK, ConfigError

HELP = "Re-run a manifest on its recorded tasks and compare hashes"

EXECUTORS: Dict[str, Callable[..., int]] = {
    "verify": verify_command.execute,
    "verify-invariant-set": verify_command.execute_invariant_set,
    "train": train_command.execute,
    "demo": demo_command.execute,
}


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", type=Path, required=True, help="manifest.json of the recorded run")
    parser.add_argument("--out-dir", type=Path, default=None, help="Replay directory (default <run>/replay)")


def _changed(recorded: Dict[str, str], found: Dict[str, str]) -> List[str]:
    return sorted(name for name, digest in recorded.items() if found.get(name) != digest)


def run(args: argparse.Namespace) -> int:
    recorded = read_json(RunManifest, args.manifest)
    if recorded.command not in EXECUTORS:
        raise ConfigError(f"cannot replay command '{recorded.command}'")
    run_dir = args.manifest.parent

    tasks_dir: Optional[Path] = None
    if recorded.tasks:
        on_disk = {name: sha256_file(run_dir / name) for name in recorded.tasks if (run_dir / name).exists()}
        tampered = _changed(recorded.tasks, on_disk)
        if tampered:
            for name in tampered:
                print(f"MISMATCH {name} (recorded task file)")
            logging.error({"event": "replay_tasks_changed", "run_id": recorded.run_id, "files": tampered})
            return EXIT_FAILURE
        tasks_dir = run_dir

    out_dir = args.out_dir or run_dir / "replay"
    out_dir.mkdir(parents=True, exist_ok=True)
    if tasks_dir is None:
        EXECUTORS[recorded.command](recorded.config, out_dir)
    else:
        EXECUTORS[recorded.command](recorded.config, out_dir, tasks_dir)

    replayed = record_outputs(recorded, out_dir)
    mismatched = _changed(recorded.outputs, replayed.outputs) + _changed(recorded.tasks, replayed.tasks)
    extra = sorted((set(replayed.outputs) - set(recorded.outputs)) | (set(replayed.tasks) - set(recorded.tasks)))
    for name in mismatched:
        print(f"MISMATCH {name}")
    for name in extra:
        print(f"UNRECORDED {name}")
    logging.info({"event": "replay_finished", "run_id": recorded.run_id, "files": len(recorded.outputs),
                  "task_files": len(recorded.tasks), "mismatched": mismatched, "unrecorded": extra})
    if mismatched or extra:
        return EXIT_FAILURE
    print(f"replay of {recorded.run_id}: {len(recorded.outputs) + len(recorded.tasks)} files identical")
    return EXIT_OK
