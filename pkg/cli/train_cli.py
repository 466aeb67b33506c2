import argparse
from typing import Any, Dict

from commands.stage_trainer import STAGES


def add_train_cli(parser: argparse.ArgumentParser):
    parser.add_argument("stage", choices=STAGES, help="Pipeline stage to train")
    parser.add_argument("--epochs", type=int, help="Override epochs (iterations for gan)")
    parser.add_argument("--branch", choices=("depth", "rgb"), help="SVR input branch")


def parse_train_cli_args(args: argparse.Namespace) -> Dict[str, Any]:
    if args.epochs is not None and args.epochs < 1:
        raise ValueError(f"--epochs must be >= 1, got {args.epochs}")
    return {"stage": args.stage, "epochs": args.epochs, "branch": args.branch}
