"""
``train``: multi-task TD pretraining, optionally swept over seeds.

Each seed of a sweep trains in its own worker process and writes into
``seed_<s>/``; the per-seed metrics are then concatenated in seed order
into the run's ``metrics.csv``. Every seed records its training tasks in
``tasks.json`` before the first update; a replay trains on those tasks.
"""

import argparse
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

from ictd.artifacts import concat_csv, new_manifest, write_csv, write_json
from ictd.attention import params_to_document
from ictd.commands.common import add_common_arguments, finish_run, load_tasks, output_directory, save_tasks
from ictd.config import TrainConfig, resolve_config
from ictd.exception import EXIT_OK
from ictd.training import train, training_tasks

HELP = "Pretrain a transformer with multi-task TD"


def add_arguments(parser: argparse.ArgumentParser) -> None:
    add_common_arguments(parser)
    parser.add_argument("--task-source", choices=["boyan", "boyan-representable", "cartpole"], default=None)
    parser.add_argument("--context", dest="n", type=int, default=None, help="Context length n")
    parser.add_argument("--tasks", dest="k", type=int, default=None, help="Number of training tasks")
    parser.add_argument("--tau", type=int, default=None, help="Trajectory length per task")
    parser.add_argument("--layers", dest="L", type=int, default=None, help="Transformer layers")
    parser.add_argument("--dim", dest="d", type=int, default=None, help="Feature dimension")
    parser.add_argument("--attn", choices=["linear", "softmax"], default=None)
    parser.add_argument("--unshared", dest="shared", action="store_false", default=None,
                        help="Learn one (P, Q) pair per layer")
    parser.add_argument("--alpha", type=float, default=None, help="Adam learning rate")
    parser.add_argument("--log-every", type=int, default=None, help="Updates between metric records")
    parser.add_argument("--seeds", type=int, nargs="+", default=None, help="Seed sweep")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes (default $ICTD_WORKERS or 1)")
    parser.add_argument("--freeze-task", dest="freeze_task", action="store_true", default=None,
                        help="Train on a single frozen task")


def run(args: argparse.Namespace) -> int:
    cfg = resolve_config(TrainConfig, args.config, {
        "seed": args.seed, "task_source": args.task_source, "n": args.n, "k": args.k, "tau": args.tau,
        "L": args.L, "d": args.d, "attn": args.attn, "shared": args.shared, "alpha": args.alpha,
        "log_every": args.log_every, "seeds": args.seeds, "workers": args.workers,
        "freeze_task": args.freeze_task})
    manifest = new_manifest("train", cfg.model_dump(), cfg.seed)
    out_dir = output_directory(args.out_dir, manifest)
    code = execute(cfg.model_dump(), out_dir)
    finish_run(manifest, out_dir, code)
    return code


def train_seed(config: Dict[str, Any], out_dir: Path, tasks_dir: Optional[Path] = None) -> Path:
    """Train one seed and write its tasks, metrics, snapshots and final parameters."""
    cfg = TrainConfig.model_validate(config)
    tasks = load_tasks(tasks_dir) if tasks_dir is not None else training_tasks(cfg)
    save_tasks(tasks, out_dir, cfg.seed, frozen=cfg.freeze_task)
    result = train(cfg, tasks=tasks)
    metrics_path = write_csv([record.model_dump() for record in result.records], out_dir / "metrics.csv", "metrics")
    for task_index, params in result.snapshots:
        path = write_json(params_to_document(params), out_dir / "snapshots" / f"params_{task_index:05d}.json")
        logging.info({"event": "snapshot_written", "seed": cfg.seed, "task_index": task_index, "path": str(path)})
    write_json(params_to_document(result.params), out_dir / "params.json")
    return metrics_path


def execute(config: Dict[str, Any], out_dir: Path, tasks_dir: Optional[Path] = None) -> int:
    """
    Args:
        tasks_dir: Directory of a recorded run whose ``tasks.json`` files replace fresh draws.
    """
    cfg = TrainConfig.model_validate(config)
    if not cfg.seeds:
        train_seed(cfg.model_dump(), out_dir, tasks_dir)
        return EXIT_OK

    seed_configs = [cfg.model_copy(update={"seed": s, "seeds": None}).model_dump() for s in cfg.seeds]
    seed_dirs = [out_dir / f"seed_{s}" for s in cfg.seeds]
    task_dirs = [tasks_dir / f"seed_{s}" if tasks_dir is not None else None for s in cfg.seeds]
    logging.info({"event": "seed_sweep_started", "seeds": cfg.seeds, "workers": cfg.workers})
    if cfg.workers == 1:
        paths: List[Path] = [train_seed(c, p, t) for c, p, t in zip(seed_configs, seed_dirs, task_dirs)]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            paths = list(pool.map(train_seed, seed_configs, seed_dirs, task_dirs))
    concat_csv(paths, out_dir / "metrics.csv", "metrics")
    return EXIT_OK
