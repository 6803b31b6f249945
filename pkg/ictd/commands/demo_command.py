import argparse
from pathlib import Path
from typing import Any, Dict, Optional

from ictd.artifacts import new_manifest, write_csv
from ictd.commands.common import add_common_arguments, finish_run, load_tasks, output_directory, save_tasks
from ictd.config import DemoConfig, resolve_config
from ictd.exception import EXIT_OK
from ictd.verify import demo_msve_vs_context, demo_tasks

HELP = "MSVE of the TD construction against context length"


def add_arguments(parser: argparse.ArgumentParser) -> None:
    add_common_arguments(parser)
    parser.add_argument("--tasks", type=int, default=None, help="Representable tasks")
    parser.add_argument("--context-max", dest="context_max", type=int, default=None, help="Largest context length")
    parser.add_argument("--layers", dest="L", type=int, default=None, help="Transformer layers")
    parser.add_argument("--dim", dest="d", type=int, default=None, help="Feature dimension")
    parser.add_argument("--alpha", type=float, default=None, help="Step size, C = alpha I")


def run(args: argparse.Namespace) -> int:
    cfg = resolve_config(DemoConfig, args.config, {
        "seed": args.seed, "tasks": args.tasks, "context_max": args.context_max, "L": args.L, "d": args.d,
        "alpha": args.alpha})
    manifest = new_manifest("demo", cfg.model_dump(), cfg.seed)
    out_dir = output_directory(args.out_dir, manifest)
    code = execute(cfg.model_dump(), out_dir)
    finish_run(manifest, out_dir, code)
    return code


def execute(config: Dict[str, Any], out_dir: Path, tasks_dir: Optional[Path] = None) -> int:
    cfg = DemoConfig.model_validate(config)
    tasks = load_tasks(tasks_dir) if tasks_dir is not None else demo_tasks(cfg)
    save_tasks(tasks, out_dir, cfg.seed)
    rows = demo_msve_vs_context(cfg, tasks)
    write_csv(rows, out_dir / "demo.csv", "demo")
    for row in rows:
        print(f"n={row['context_length']:<4} msve={row['mean_msve']:.6g} +/- {row['std_error']:.2g} "
              f"median={row['median_msve']:.6g}")
    return EXIT_OK
