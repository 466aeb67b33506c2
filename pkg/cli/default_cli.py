import argparse
from typing import Any, Dict


def add_default_cli(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, help="key=value config file with [section] headers")
    parser.add_argument("--seed", type=int, help="Run seed; every stage derives its own from it")
    parser.add_argument("--force", action="store_true", help="Rewrite existing outputs")
    parser.add_argument("--out", type=str, help="Output directory (default: <run-dir>/outputs/<command>)")
    parser.add_argument("--run-dir", type=str, help="Run directory holding checkpoints and logs")
    parser.add_argument("--data-root", type=str, help="Dataset root (PQNET_DATA_ROOT wins when set)")
    parser.add_argument("--device", type=str, help="torch device, e.g. cpu or cuda")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")


def parse_default_cli_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Global flags; settings overrides are grouped by config section."""
    processing = {"seed": args.seed, "device": args.device}
    if args.force:
        processing["force"] = True
    if args.debug:
        processing["debug"] = True
    return {
        "config": args.config,
        "out": args.out,
        "force": args.force,
        "overrides": {
            "processing": processing,
            "directories": {"run_dir": args.run_dir, "data_root": args.data_root},
        },
    }
