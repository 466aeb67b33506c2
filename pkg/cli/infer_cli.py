import argparse
from typing import Any, Dict

from utils.utils import parse_float_list, validate_cs_input_str


def add_infer_cli(parser: argparse.ArgumentParser, command: str):
    parser.add_argument("--resolution", type=int, choices=(64, 128, 256), help="Assembly lattice resolution")
    if command == "generate":
        parser.add_argument("--count", type=int, help="Shapes to generate (default: eval.generate_count)")
    if command == "interpolate":
        parser.add_argument("--shape-a", type=str, required=True, help="Start shape id")
        parser.add_argument("--shape-b", type=str, required=True, help="End shape id")
        parser.add_argument("--steps", type=int, default=5, help="Number of shapes including both ends")
        parser.add_argument("--t-values", type=str, help="Comma separated weights in [0, 1]; replaces --steps")
    if command in ("complete", "denoise", "export-mesh"):
        parser.add_argument("--shape", type=str, required=True, help="Dataset shape id")
    if command == "complete":
        parser.add_argument("--drop", type=str, help="Comma separated part indices to remove (default: last)")
    if command == "export-mesh":
        parser.add_argument("--reconstruct", action="store_true", help="Export the encode-decode reconstruction")
    if command == "svr-infer":
        parser.add_argument("--image", type=str, required=True, help="Depth PGM or RGB PNG")
        parser.add_argument("--branch", choices=("depth", "rgb"), help="Encoder branch")


def parse_infer_cli_args(args: argparse.Namespace) -> Dict[str, Any]:
    kwargs = {
        key: getattr(args, key)
        for key in ("resolution", "count", "shape_a", "shape_b", "steps", "shape", "reconstruct", "image", "branch")
        if hasattr(args, key)
    }
    if getattr(args, "drop", None):
        try:
            kwargs["drop"] = [int(i) for i in validate_cs_input_str(args.drop, "drop")]
        except ValueError as e:
            raise ValueError(f"Invalid --drop: {args.drop}") from e
    if getattr(args, "t_values", None):
        kwargs["t_values"] = parse_float_list(args.t_values, "t-values")
    if kwargs.get("count") is not None and kwargs["count"] < 1:
        raise ValueError(f"--count must be >= 1, got {kwargs['count']}")
    return kwargs
