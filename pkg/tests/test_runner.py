import logging
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from config.settings import DATA_ROOT_ENV, ConfigLoader, load_settings
from runner import (
    EXIT_DEPENDENCY,
    EXIT_INPUT,
    EXIT_INTERNAL,
    LOCK_FILE,
    RunContext,
    exit_code_for,
)
from utils.exceptions import DependencyError, InvalidInput, InvariantViolation
from utils.file_utils import read_json
from utils.utils import derive_seed


class TestExitCodes(unittest.TestCase):
    def test_mapping(self):
        self.assertEqual(exit_code_for(InvalidInput("x")), EXIT_INPUT)
        self.assertEqual(exit_code_for(ValueError("x")), EXIT_INPUT)
        self.assertEqual(exit_code_for(FileNotFoundError("x")), EXIT_INPUT)
        self.assertEqual(exit_code_for(DependencyError("x")), EXIT_DEPENDENCY)
        self.assertEqual(exit_code_for(InvariantViolation("x")), EXIT_INTERNAL)
        self.assertEqual(exit_code_for(RuntimeError("x")), EXIT_INTERNAL)


class TestDeriveSeed(unittest.TestCase):
    def test_stable_and_distinct(self):
        self.assertEqual(derive_seed(1, "train", "partae"), derive_seed(1, "train", "partae"))
        self.assertNotEqual(derive_seed(1, "train", "partae"), derive_seed(1, "train", "seq2seq"))
        self.assertNotEqual(derive_seed(1, "generate"), derive_seed(2, "generate"))
        self.assertTrue(0 <= derive_seed(123, "x") < 2**31)


class RunDirTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self._env = patch.dict(os.environ)
        self._env.start()
        os.environ.pop(DATA_ROOT_ENV, None)
        self.settings = load_settings(
            None,
            {"directories": {"run_dir": str(self.tmp / "run"), "logs_dir": str(self.tmp / "logs")}},
        )

    def tearDown(self):
        self._env.stop()
        self._tmp.cleanup()


class TestRunContext(RunDirTestCase):
    def test_manifest_written_and_lock_released(self):
        with RunContext("generate", self.settings) as run:
            self.assertTrue((self.tmp / "run" / LOCK_FILE).exists())
            artifact = run.output_dir() / "shape_0000.obj"
            artifact.write_text("o empty\n")
            run.manifest.add_artifact(artifact)
            run.manifest.metrics = {"count": 1}

        self.assertFalse((self.tmp / "run" / LOCK_FILE).exists())
        manifest = read_json(self.tmp / "run" / "manifest_generate.json")
        self.assertEqual(manifest["status"], "ok")
        self.assertEqual(manifest["metrics"], {"count": 1})
        self.assertIn(str(artifact), manifest["artifacts"])
        self.assertIn(str(self.tmp / "run" / "config.ini"), manifest["artifacts"])
        self.assertEqual(manifest["config"]["directories"]["run_dir"], str(self.tmp / "run"))
        self.assertIsNotNone(manifest["finished_at"])

    def test_concurrent_command_rejected(self):
        with RunContext("train partae", self.settings):
            with self.assertRaises(InvalidInput):
                RunContext("generate", self.settings).acquire()

    def test_failure_is_recorded(self):
        with self.assertRaises(RuntimeError):
            with RunContext("eval", self.settings):
                raise RuntimeError("boom")
        manifest = read_json(self.tmp / "run" / "manifest_eval.json")
        self.assertEqual(manifest["status"], "failed: boom")
        self.assertFalse((self.tmp / "run" / LOCK_FILE).exists())

    def test_train_manifest_name(self):
        with RunContext("train seq2seq", self.settings):
            pass
        self.assertTrue((self.tmp / "run" / "manifest_train_seq2seq.json").exists())

    def test_command_log_written_and_detached(self):
        root = logging.getLogger()
        handlers_before = list(root.handlers)
        with RunContext("train gan", self.settings) as run:
            self.assertEqual(len(root.handlers), len(handlers_before) + 1)
        self.assertEqual(root.handlers, handlers_before)
        self.assertTrue(run.log_path.exists())
        self.assertEqual(run.log_path, self.tmp / "run" / "logs" / "train_gan.log")
        manifest = read_json(self.tmp / "run" / "manifest_train_gan.json")
        self.assertIn(str(run.log_path), manifest["artifacts"])

    def test_lock_released_when_log_cannot_open(self):
        with patch("runner.attach_run_log", side_effect=PermissionError("logs not writable")):
            with self.assertRaises(PermissionError):
                with RunContext("generate", self.settings):
                    pass
        self.assertFalse((self.tmp / "run" / LOCK_FILE).exists())
        with RunContext("generate", self.settings):
            pass


class TestLoadSettings(RunDirTestCase):
    def write_config(self, text: str) -> Path:
        path = self.tmp / "run.ini"
        path.write_text(text)
        return path

    def test_config_file_sections(self):
        config = self.write_config(
            "[processing]\nseed = 5\n\n[data]\ncategories = chair,table\nresolution_tags = 32,16\n"
            "\n[gan]\nhidden_widths = 64,64\n"
        )
        settings = load_settings(config)
        self.assertEqual(settings.processing.seed, 5)
        self.assertEqual(settings.data.categories, ["chair", "table"])
        self.assertEqual(settings.data.resolution_tags, [16, 32])
        self.assertEqual(settings.gan.hidden_widths, [64, 64])

    def test_flags_override_config(self):
        config = self.write_config("[processing]\nseed = 5\n")
        settings = load_settings(config, {"processing": {"seed": 9, "device": None}})
        self.assertEqual(settings.processing.seed, 9)
        self.assertEqual(settings.processing.device, "cpu")

    def test_environment_data_root_wins(self):
        os.environ[DATA_ROOT_ENV] = str(self.tmp / "env_data")
        settings = load_settings(None, {"directories": {"data_root": str(self.tmp / "flag_data")}})
        self.assertEqual(settings.directories.data_root, self.tmp / "env_data")

    def test_invalid_configs(self):
        with self.assertRaises(FileNotFoundError):
            load_settings(self.tmp / "missing.ini")
        with self.assertRaises(ValueError):
            load_settings(self.write_config("[network]\nhost = x\n"))
        with self.assertRaises(ValueError):
            load_settings(self.write_config("[data]\ncategories = sofa\n"))
        with self.assertRaises(ValueError):
            load_settings(self.write_config("[seq2seq]\nalpha = -1\n"))

    def test_dump_reloads(self):
        settings = load_settings(None, {"processing": {"seed": 3}, "data": {"categories": ["lamp"]}})
        path = ConfigLoader.dump(settings, self.tmp / "dump.ini")
        reloaded = load_settings(path)
        self.assertEqual(reloaded.snapshot(), settings.snapshot())
