"""
``verify``: forward-pass equivalence of the constructions and the
invariant-set Monte-Carlo check.
"""

import argparse
from pathlib import Path
from typing import Any, Dict, Optional

from ictd.artifacts import new_manifest, write_csv
from ictd.commands.common import add_common_arguments, finish_run, load_tasks, output_directory, save_tasks
from ictd.config import InvariantSetConfig, VerifyConfig, resolve_config
from ictd.exception import EXIT_FAILURE, EXIT_OK
from ictd.numerics import make_rng
from ictd.verify import invariant_set_tasks, theta_star_subfamily_check, verify_equivalence, verify_invariant_set

HELP = "Check constructions against their oracles, or the invariant set"
ALL_KINDS = ("td0", "td0-onelayer", "rg", "td-lambda", "avg")
SUBFAMILY_TOL = 1e-10


def add_arguments(parser: argparse.ArgumentParser) -> None:
    add_common_arguments(parser)
    parser.add_argument("--kind", choices=[*ALL_KINDS, "all"], default=None, help="Construction to verify")
    parser.add_argument("--layers", type=int, default=None, help="Maximum depth L")
    parser.add_argument("--context", dest="n", type=int, default=None, help="Context length n")
    parser.add_argument("--dim", dest="d", type=int, default=None, help="Feature dimension d")
    parser.add_argument("--seeds", type=int, default=None, help="Number of random prompts")
    parser.add_argument("--lambda", dest="lam", type=float, default=None, help="TD(lambda) decay")
    parser.add_argument("--tolerance", type=float, default=None, help="Absolute tolerance per layer")
    parser.add_argument("--invariant-set", action="store_true", help="Run the invariant-set check instead")
    parser.add_argument("--samples", type=int, default=None, help="Monte-Carlo task count")
    parser.add_argument("--eta", type=float, default=None, help="theta* P entry")
    parser.add_argument("--c", type=float, default=None, help="theta* Q top-left scale")
    parser.add_argument("--c-prime", dest="c_prime", type=float, default=None, help="theta* Q middle-left scale")
    parser.add_argument("--no-control", dest="negative_control", action="store_false", default=None,
                        help="Skip the perturbed negative control")


def run(args: argparse.Namespace) -> int:
    if args.invariant_set:
        cfg = resolve_config(InvariantSetConfig, args.config, {
            "seed": args.seed, "n": args.n, "d": args.d, "samples": args.samples, "eta": args.eta,
            "c": args.c, "c_prime": args.c_prime, "negative_control": args.negative_control})
        manifest = new_manifest("verify-invariant-set", cfg.model_dump(), cfg.seed)
        out_dir = output_directory(args.out_dir, manifest)
        code = execute_invariant_set(cfg.model_dump(), out_dir)
    else:
        cfg = resolve_config(VerifyConfig, args.config, {
            "seed": args.seed, "kind": args.kind, "layers": args.layers, "n": args.n, "d": args.d,
            "seeds": args.seeds, "lam": args.lam, "tolerance": args.tolerance})
        manifest = new_manifest("verify", cfg.model_dump(), cfg.seed)
        out_dir = output_directory(args.out_dir, manifest)
        code = execute(cfg.model_dump(), out_dir)
    finish_run(manifest, out_dir, code)
    return code


def execute(config: Dict[str, Any], out_dir: Path) -> int:
    cfg = VerifyConfig.model_validate(config)
    kinds = ALL_KINDS if cfg.kind == "all" else (cfg.kind,)
    rows, summary = [], []
    passed = True
    for kind in kinds:
        report = verify_equivalence(cfg.model_copy(update={"kind": kind}))
        rows.extend(report.rows)
        summary.extend(report.summary)
        passed = passed and report.passed
        print(f"{kind:<13} L={cfg.layers:<3} seeds={cfg.seeds:<3} max|diff|={report.max_abs_diff:.3e} "
              f"{'PASS' if report.passed else 'FAIL'}")
    write_csv(rows, out_dir / "equivalence.csv", "equivalence")
    write_csv(summary, out_dir / "equivalence_summary.csv", "equivalence_summary")
    return EXIT_OK if passed else EXIT_FAILURE


def execute_invariant_set(config: Dict[str, Any], out_dir: Path, tasks_dir: Optional[Path] = None) -> int:
    """The check at theta* and, unless disabled, the perturbed control on the same tasks."""
    cfg = InvariantSetConfig.model_validate(config)
    tasks = load_tasks(tasks_dir) if tasks_dir is not None else invariant_set_tasks(cfg)
    save_tasks(tasks, out_dir, cfg.seed)
    report = verify_invariant_set(cfg, tasks=tasks)
    write_csv(report.rows, out_dir / "invariant_set.csv", "invariant_set")
    print(f"invariant set   samples={cfg.samples} start_in_family={report.start_in_family} "
          f"update_in_family={report.update_in_family} {'PASS' if report.passed else 'FAIL'}")
    passed = report.passed

    if cfg.negative_control:
        control = verify_invariant_set(cfg, perturb=True, tasks=tasks)
        write_csv(control.rows, out_dir / "invariant_set_control.csv", "invariant_set")
        rejected = not control.start_in_family and not control.coordinates_passed
        print(f"negative control samples={cfg.samples} start_in_family={control.start_in_family} "
              f"{'FAIL (expected)' if rejected else 'PASS (unexpected)'}")
        passed = passed and rejected

    if cfg.c_prime == 0.0:
        gap = theta_star_subfamily_check(cfg.eta, cfg.c, cfg.d, cfg.n, make_rng(cfg.seed))
        print(f"c'=0 subfamily  max|diff|={gap:.3e} {'PASS' if gap <= SUBFAMILY_TOL else 'FAIL'}")
        passed = passed and gap <= SUBFAMILY_TOL
    return EXIT_OK if passed else EXIT_FAILURE
