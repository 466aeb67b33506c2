import argparse
from typing import Any, Dict

from utils.utils import validate_cs_input_str


def add_data_cli(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--source",
        choices=("synthetic", "partnet", "meshes"),
        help="Where shapes come from",
    )
    parser.add_argument("--source-path", type=str, help="Root of a PartNet-layout or mesh directory")
    parser.add_argument("--categories", type=str, help="Comma separated categories, e.g. chair,table")
    parser.add_argument("--count", type=int, help="Synthetic shapes per category")


def parse_data_cli_args(args: argparse.Namespace) -> Dict[str, Any]:
    categories = validate_cs_input_str(args.categories, "categories")
    kwargs: Dict[str, Any] = {
        "source": args.source,
        "source_path": args.source_path,
        "count": args.count,
    }
    if categories:
        kwargs["categories"] = categories
        kwargs["overrides"] = {"data": {"categories": categories}}
    return kwargs
