"""
CLI module for the part-sequence shape pipeline.
"""

import sys
import argparse
from pathlib import Path
from typing import Optional, Dict, Any, List, Tuple

from runner import EXIT_INPUT, RunContext, exit_code_for
from commands.preparer import Preparer
from commands.stage_trainer import StageTrainer
from commands.inferencer import COMMANDS as INFER_COMMANDS, Inferencer
from commands.evaluator import Evaluator
from cli.default_cli import add_default_cli, parse_default_cli_args
from cli.data_cli import add_data_cli, parse_data_cli_args
from cli.train_cli import add_train_cli, parse_train_cli_args
from cli.infer_cli import add_infer_cli, parse_infer_cli_args
from cli.eval_cli import add_eval_cli, parse_eval_cli_args
from utils.logging_config import get_logger
from config.settings import AppSettings, load_settings

logger = get_logger(__name__)

INFER_HELP = {
    "generate": "Generate new shapes from the latent GAN",
    "interpolate": "Decode shapes along a line between two dataset shapes",
    "complete": "Complete a dataset shape with parts removed",
    "denoise": "Recover the canonical order of a scrambled shape",
    "svr-infer": "Reconstruct a shape from one depth or RGB image",
    "export-mesh": "Export a dataset shape (or its reconstruction) as OBJ",
}


def _merge_overrides(kwargs: Dict[str, Any], extra: Dict[str, Any]) -> None:
    overrides = extra.pop("overrides", {})
    kwargs.update(extra)
    for section, values in overrides.items():
        kwargs.setdefault("overrides", {}).setdefault(section, {}).update(values)


class CLI:
    """Main CLI class."""

    def __init__(
        self,
        settings: Optional[AppSettings] = None,
    ):
        """Initialize CLI; injected settings replace config loading."""
        self.settings = settings
        self.parser = self._create_parser()

    def _create_parser(self) -> argparse.ArgumentParser:
        """Create and configure argument parser."""
        parser = argparse.ArgumentParser(description="Part-sequence 3D shape generation CLI")

        # Add subcommands
        subparsers = parser.add_subparsers(
            dest="command", help="Commands", required=True
        )

        prepare_parser = subparsers.add_parser("prepare", help="Build the dataset layout")
        add_default_cli(prepare_parser)
        add_data_cli(prepare_parser)

        train_parser = subparsers.add_parser("train", help="Train one pipeline stage")
        add_default_cli(train_parser)
        add_train_cli(train_parser)

        for command in INFER_COMMANDS:
            infer_parser = subparsers.add_parser(command, help=INFER_HELP[command])
            add_default_cli(infer_parser)
            add_infer_cli(infer_parser, command)

        eval_parser = subparsers.add_parser("eval", help="COV/MMD/JSD of a generated set")
        add_default_cli(eval_parser)
        add_eval_cli(eval_parser)

        return parser

    def parse_args(self, args_list: Optional[list] = None) -> Dict[str, Any]:
        """Parse command line arguments into kwargs dictionary."""
        args = self.parser.parse_args(args_list)

        kwargs: Dict[str, Any] = {"command": args.command}
        _merge_overrides(kwargs, parse_default_cli_args(args))

        if args.command == "prepare":
            _merge_overrides(kwargs, parse_data_cli_args(args))
        elif args.command == "train":
            _merge_overrides(kwargs, parse_train_cli_args(args))
        elif args.command == "eval":
            _merge_overrides(kwargs, parse_eval_cli_args(args))
        else:
            _merge_overrides(kwargs, parse_infer_cli_args(args))

        return kwargs

    def load_settings(self, kwargs: Dict[str, Any]) -> AppSettings:
        overrides = {
            section: {k: v for k, v in values.items() if v is not None}
            for section, values in kwargs.get("overrides", {}).items()
        }
        if self.settings is None or kwargs.get("config"):
            return load_settings(kwargs.get("config"), overrides)
        return self.settings.model_copy(
            update={
                section: getattr(self.settings, section).model_copy(update=values)
                for section, values in overrides.items()
                if values
            }
        )

    def dispatch(self, kwargs: Dict[str, Any], settings: AppSettings, run: RunContext) -> Tuple[Dict, List[Path]]:
        command = kwargs["command"]
        if command == "prepare":
            return Preparer(kwargs, settings).prepare(), []
        if command == "train":
            trainer = StageTrainer(kwargs, settings)
            return trainer.train(), trainer.produced
        if command == "eval":
            evaluator = Evaluator(kwargs, settings, run.output_dir(kwargs.get("out")))
            return evaluator.evaluate(), evaluator.produced
        inferencer = Inferencer(kwargs, settings, run.output_dir(kwargs.get("out")))
        return inferencer.infer(), inferencer.produced

    def execute(self, kwargs: Dict[str, Any]) -> None:
        """Execute command based on parsed arguments."""
        try:
            logger.debug(f"Configuration: {kwargs}")
            settings = self.load_settings(kwargs)
            name = kwargs["command"] if kwargs["command"] != "train" else f"train {kwargs['stage']}"

            with RunContext(name, settings) as run:
                metrics, produced = self.dispatch(kwargs, settings, run)
                run.manifest.metrics = metrics
                for path in produced:
                    run.manifest.add_artifact(path)

            logger.info("Completed successfully!")

        except Exception as e:
            logger.error(f"Workflow failed: {e}")
            logger.debug("Workflow error details:", exc_info=True)
            sys.exit(exit_code_for(e))

    def run(self, args_list: Optional[list] = None) -> None:
        """Run the CLI with the given arguments."""
        try:
            kwargs = self.parse_args(args_list)
        except ValueError as e:
            logger.error(f"Invalid arguments: {e}")
            sys.exit(EXIT_INPUT)
        self.execute(kwargs)
