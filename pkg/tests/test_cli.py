import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import MagicMock, patch

from cli.cli import CLI
from commands.inferencer import Inferencer
from config.settings import DATA_ROOT_ENV, load_settings
from runner import EXIT_DEPENDENCY, EXIT_INPUT, EXIT_INTERNAL
from utils.file_utils import read_json


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self._env = patch.dict(os.environ)
        self._env.start()
        os.environ.pop(DATA_ROOT_ENV, None)
        self.cli = CLI()
        self.config = self.tmp / "run.ini"
        self.config.write_text(
            "[directories]\nlogs_dir = {}\n\n[data]\nresolution_tags = 16\nsynth_count = 2\n".format(
                self.tmp / "logs"
            )
        )

    def tearDown(self):
        self._env.stop()
        self._tmp.cleanup()

    def argv(self, *args):
        return list(args) + [
            "--config", str(self.config),
            "--run-dir", str(self.tmp / "run"),
            "--data-root", str(self.tmp / "data"),
        ]

    def exit_code(self, *args) -> int:
        with self.assertRaises(SystemExit) as cm:
            self.cli.run(self.argv(*args))
        return cm.exception.code


class TestParseArgs(CliTestCase):
    def test_prepare_flags(self):
        kwargs = self.cli.parse_args(
            ["prepare", "--source", "synthetic", "--categories", "chair, table", "--count", "3", "--seed", "7"]
        )
        self.assertEqual(kwargs["command"], "prepare")
        self.assertEqual(kwargs["categories"], ["chair", "table"])
        self.assertEqual(kwargs["count"], 3)
        self.assertEqual(kwargs["overrides"]["processing"]["seed"], 7)
        self.assertEqual(kwargs["overrides"]["data"]["categories"], ["chair", "table"])

    def test_train_stage(self):
        kwargs = self.cli.parse_args(["train", "svr", "--branch", "rgb", "--epochs", "4"])
        self.assertEqual((kwargs["stage"], kwargs["branch"], kwargs["epochs"]), ("svr", "rgb", 4))

    def test_generate_defaults(self):
        kwargs = self.cli.parse_args(["generate"])
        self.assertIsNone(kwargs["count"])
        self.assertIsNone(kwargs["resolution"])

    def test_generate_count_falls_back_to_settings(self):
        kwargs = self.cli.parse_args(["generate"])
        settings = load_settings(None, {"eval": {"generate_count": 3}})
        inferencer = Inferencer(kwargs, settings, self.tmp / "out")
        inferencer.artifacts = MagicMock()
        with patch("commands.inferencer.generate_shapes", return_value=[]) as generate:
            result = inferencer.generate()
        self.assertEqual(result["count"], 3)
        self.assertEqual(generate.call_args.args[3], 3)

    def test_complete_drop_list(self):
        kwargs = self.cli.parse_args(["complete", "--shape", "chair_00001", "--drop", "0,2"])
        self.assertEqual(kwargs["drop"], [0, 2])

    def test_interpolate_weights(self):
        kwargs = self.cli.parse_args(
            ["interpolate", "--shape-a", "a", "--shape-b", "b", "--t-values", "0, 0.25,1"]
        )
        self.assertEqual(kwargs["t_values"], [0.0, 0.25, 1.0])
        self.assertEqual(kwargs["steps"], 5)
        with self.assertRaises(ValueError):
            self.cli.parse_args(["interpolate", "--shape-a", "a", "--shape-b", "b", "--t-values", "0,x"])

    def test_eval_distance_kinds(self):
        kwargs = self.cli.parse_args(["eval", "--gen-split", "val", "--distance", "chamfer,one-minus-iou"])
        self.assertEqual(kwargs["distance_kinds"], ["chamfer", "one-minus-iou"])

    def test_argparse_rejects_unknown_stage(self):
        with self.assertRaises(SystemExit) as cm:
            self.cli.parse_args(["train", "diffusion"])
        self.assertEqual(cm.exception.code, 2)

    def test_invalid_values_exit_2(self):
        with self.assertRaises(SystemExit) as cm:
            self.cli.run(["train", "partae", "--epochs", "0"])
        self.assertEqual(cm.exception.code, EXIT_INPUT)
        with self.assertRaises(SystemExit) as cm:
            self.cli.run(["eval", "--gen-split", "test", "--distance", "lfd"])
        self.assertEqual(cm.exception.code, EXIT_INPUT)


class TestExecute(CliTestCase):
    @patch("cli.cli.Preparer")
    def test_prepare_dispatch_writes_manifest(self, mock_preparer_class):
        mock_preparer = MagicMock()
        mock_preparer.prepare.return_value = {"written": 0}
        mock_preparer_class.return_value = mock_preparer

        self.cli.run(self.argv("prepare", "--source", "synthetic"))

        mock_preparer_class.assert_called_once()
        kwargs, settings = mock_preparer_class.call_args[0]
        self.assertEqual(kwargs["source"], "synthetic")
        self.assertEqual(settings.directories.data_root, self.tmp / "data")
        self.assertEqual(settings.data.resolution_tags, [16])
        manifest = read_json(self.tmp / "run" / "manifest_prepare.json")
        self.assertEqual(manifest["metrics"], {"written": 0})
        self.assertEqual(manifest["status"], "ok")

    @patch("cli.cli.Preparer")
    def test_unexpected_error_exits_4(self, mock_preparer_class):
        mock_preparer_class.return_value.prepare.side_effect = RuntimeError("disk on fire")
        self.assertEqual(self.exit_code("prepare"), EXIT_INTERNAL)
        manifest = read_json(self.tmp / "run" / "manifest_prepare.json")
        self.assertTrue(manifest["status"].startswith("failed"))

    def test_missing_source_path_exits_2(self):
        code = self.exit_code("prepare", "--source", "partnet", "--source-path", str(self.tmp / "nowhere"))
        self.assertEqual(code, EXIT_INPUT)

    def test_missing_config_exits_2(self):
        with self.assertRaises(SystemExit) as cm:
            self.cli.run(["generate", "--config", str(self.tmp / "missing.ini")])
        self.assertEqual(cm.exception.code, EXIT_INPUT)

    def test_seq2seq_without_partae_exits_3(self):
        self.assertEqual(self.exit_code("train", "seq2seq"), EXIT_DEPENDENCY)

    def test_gan_and_svr_need_seq2seq(self):
        self.assertEqual(self.exit_code("train", "gan"), EXIT_DEPENDENCY)
        self.assertEqual(self.exit_code("train", "svr"), EXIT_DEPENDENCY)

    def test_generate_without_checkpoints_exits_3(self):
        self.assertEqual(self.exit_code("generate", "--count", "2"), EXIT_DEPENDENCY)

    def test_eval_of_empty_split_exits_2(self):
        (self.tmp / "data").mkdir()
        self.assertEqual(self.exit_code("eval", "--gen-split", "val"), EXIT_INPUT)

    def test_locked_run_dir_exits_2(self):
        (self.tmp / "run").mkdir()
        (self.tmp / "run" / ".lock").write_text("123 train partae\n")
        self.assertEqual(self.exit_code("train", "gan"), EXIT_INPUT)


class TestPrepareEndToEnd(CliTestCase):
    def test_synthetic_prepare_is_idempotent(self):
        self.cli.run(self.argv("prepare", "--source", "synthetic", "--categories", "chair"))
        first = read_json(self.tmp / "run" / "manifest_prepare.json")["metrics"]
        self.assertEqual((first["shapes"], first["written"], first["skipped"]), (2, 2, 0))
        manifests = sorted((self.tmp / "data" / "chair").glob("*/*/manifest.json"))
        self.assertEqual(len(manifests), 2)

        self.cli.run(self.argv("prepare", "--source", "synthetic", "--categories", "chair"))
        second = read_json(self.tmp / "run" / "manifest_prepare.json")["metrics"]
        self.assertEqual((second["written"], second["skipped"]), (0, 2))

        self.cli.run(self.argv("prepare", "--source", "synthetic", "--categories", "chair", "--force"))
        forced = read_json(self.tmp / "run" / "manifest_prepare.json")["metrics"]
        self.assertEqual(forced["written"], 2)

    def test_split_evaluated_against_itself(self):
        self.cli.run(self.argv("prepare", "--source", "synthetic", "--categories", "chair"))
        self.cli.run(self.argv("eval", "--gen-split", "train", "--ref-split", "train"))
        (report,) = read_json(self.tmp / "run" / "outputs" / "eval" / "eval_report.json")
        self.assertEqual((report["cov"], report["mmd"], report["jsd"]), (1.0, 0.0, 0.0))
        self.assertEqual(report["distance_kind"], "chamfer")
        self.assertEqual(report["ref_size"], 2)


TINY_MODELS = """
[partae]
code_dim = 8
encoder_channels = 2,4
decoder_widths = 16,16,8
dropout = 0.0
batch_size = 8
stage_resolutions = 16
stage_epochs = 1

[seq2seq]
encoder_hidden = 8
decoder_hidden = 16
num_layers = 2
dropout = 0.0
batch_size = 4
epochs = 2
checkpoint_every = 1
"""


class TestTrainEndToEnd(CliTestCase):
    def setUp(self):
        super().setUp()
        with self.config.open("a") as f:
            f.write(TINY_MODELS)

    def artifacts(self, command: str) -> set:
        return set(read_json(self.tmp / "run" / f"manifest_{command}.json")["artifacts"])

    def test_every_written_checkpoint_is_in_a_manifest(self):
        self.cli.run(self.argv("prepare", "--source", "synthetic", "--categories", "chair"))
        self.cli.run(self.argv("train", "partae"))
        self.cli.run(self.argv("train", "seq2seq"))

        run = self.tmp / "run"
        partae = self.artifacts("train_partae")
        seq2seq = self.artifacts("train_seq2seq")
        for name in ("seq2seq_e1.pqck", "seq2seq_e2.pqck", "seq2seq.pqck", "latents.pqlt"):
            self.assertIn(str(run / "checkpoints" / name), seq2seq)
        self.assertIn(str(run / "logs" / "seq2seq_loss.csv"), seq2seq)
        self.assertIn(str(run / "checkpoints" / "partae_16.pqck"), partae)
        self.assertIn(str(run / "logs" / "partae_loss.csv"), partae)

        listed = partae | seq2seq
        for path in (run / "checkpoints").iterdir():
            self.assertIn(str(path), listed)
        for path in (run / "logs").glob("*_loss.csv"):
            self.assertIn(str(path), listed)
