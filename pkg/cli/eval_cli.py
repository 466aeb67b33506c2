import argparse
from typing import Any, Dict

from models.reports import DISTANCE_KINDS
from utils.utils import validate_cs_input_str


def add_eval_cli(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--gen-dir", type=str, help="Directory of generated OBJ files")
    source.add_argument("--gen-split", choices=("train", "val", "test"), help="Evaluate a dataset split instead")
    parser.add_argument("--ref-split", choices=("train", "val", "test"), help="Reference split (default: test)")
    parser.add_argument("--distance", type=str, help=f"Comma separated distance kinds: {', '.join(DISTANCE_KINDS)}")


def parse_eval_cli_args(args: argparse.Namespace) -> Dict[str, Any]:
    kinds = validate_cs_input_str(args.distance, "distance")
    unknown = set(kinds) - set(DISTANCE_KINDS)
    if unknown:
        raise ValueError(f"Unknown distance kinds: {sorted(unknown)}")
    return {
        "gen_dir": args.gen_dir,
        "gen_split": args.gen_split,
        "ref_split": args.ref_split,
        "distance_kinds": kinds or None,
    }
