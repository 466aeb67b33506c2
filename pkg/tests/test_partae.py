import tempfile
import unittest
from pathlib import Path

import numpy as np
import pytest
import torch

from config.settings import PartAESettings
from datakit.voxels import downsample
from models.geometry import VoxelGrid
from partae.losses import loss_part, part_loss_tensor
from partae.mesher import extract_part_mesh, reconstruct_volume, voxel_mesh
from partae.networks import ImplicitDecoder, build_part_ae, decode_point, decode_points, encode_part
from partae.trainer import PartAETrainer, stage_input, train_part_ae
from tests.mocks.fixtures import ball_mask, box_mask, synthetic_chairs
from tests.mocks.mock_fields import SphereField
from tests.mocks.mock_models import CODE_DIM, tiny_partae
from utils.exceptions import InvalidInput
from utils.tensor_io import load_checkpoint, load_into


def tiny_settings(**overrides) -> PartAESettings:
    values = dict(
        code_dim=CODE_DIM,
        encoder_channels=[2, 4],
        decoder_widths=[16, 16, 8],
        dropout=0.0,
        batch_size=4,
        learning_rate=1e-3,
        stage_resolutions=[16],
        stage_epochs=[2],
    )
    values.update(overrides)
    return PartAESettings(**values)


def step_sphere(radius: float = 0.3):
    return lambda p: (np.linalg.norm(p - 0.5, axis=-1) < radius).astype(np.float64)


class TestLossPart(unittest.TestCase):
    def test_equal_lists(self):
        self.assertEqual(loss_part([0.1, 0.7, 1.0], [0.1, 0.7, 1.0]), 0.0)

    def test_all_wrong(self):
        self.assertEqual(loss_part([1.0] * 10, [0.0] * 10), 1.0)

    def test_hand_arithmetic(self):
        self.assertAlmostEqual(loss_part([0.2, 0.8], [0.0, 1.0]), 0.04, places=12)

    def test_length_mismatch(self):
        with self.assertRaises(InvalidInput):
            loss_part([0.1, 0.2], [0.1])
        with self.assertRaises(InvalidInput):
            loss_part([], [])

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        pred, target = rng.random(50), rng.random(50)
        perm = rng.permutation(50)
        self.assertAlmostEqual(loss_part(pred, target), loss_part(pred[perm], target[perm]), places=12)

    def test_tensor_loss_matches(self):
        pred = torch.tensor([[0.2, 0.8]])
        target = torch.tensor([[0.0, 1.0]])
        self.assertAlmostEqual(part_loss_tensor(pred, target).item(), 0.04, places=6)


class TestPartNetworks(unittest.TestCase):
    def setUp(self):
        self.model = tiny_partae()
        self.volume = VoxelGrid(ball_mask((32, 32, 32), 20.0))

    def test_code_shape_and_range(self):
        code = encode_part(self.volume, self.model)
        self.assertEqual(code.shape, (CODE_DIM,))
        self.assertTrue(np.all((code >= 0.0) & (code <= 1.0)))

    def test_encode_deterministic(self):
        np.testing.assert_array_equal(
            encode_part(self.volume, self.model), encode_part(self.volume, self.model)
        )

    def test_encode_sensitive_to_one_cell(self):
        flipped = VoxelGrid(self.volume.occupancy.copy())
        flipped.occupancy[32, 32, 12] ^= 1
        self.assertFalse(
            np.array_equal(encode_part(self.volume, self.model), encode_part(flipped, self.model))
        )

    def test_encode_wrong_resolution(self):
        with self.assertRaises(InvalidInput):
            encode_part(downsample(self.volume, 32), self.model)

    def test_default_architecture_shapes(self):
        model = build_part_ae(
            {"code_dim": 128, "encoder_channels": [32, 64, 128, 256],
             "decoder_widths": [2048, 1024, 512, 256, 128], "dropout": 0.4}
        )
        self.assertEqual(model.encoder.net[-2].out_channels, 128)
        widths = [layer.out_features for layer in model.decoder.layers]
        self.assertEqual(widths, [2048, 1024, 512, 256, 128])
        self.assertEqual(model.decoder.layers[0].in_features, 131)
        self.assertEqual(model.decoder.layers[1].in_features, 2048 + 131)
        self.assertEqual(model.decoder.layers[4].in_features, 256 + 131)
        self.assertEqual(model.decoder.out.in_features, 128)

    def test_decode_range_and_bounds(self):
        g = encode_part(self.volume, self.model)
        value = decode_point(g, (0.5, 0.5, 0.5), self.model)
        self.assertGreaterEqual(value, 0.0)
        self.assertLessEqual(value, 1.0)
        with self.assertRaises(InvalidInput):
            decode_point(g, (1.2, 0.5, 0.5), self.model)
        with self.assertRaises(InvalidInput):
            decode_point(g, (0.5, -0.1, 0.5), self.model)

    def test_decode_continuous(self):
        g = encode_part(self.volume, self.model)
        probes = np.random.default_rng(1).uniform(0.05, 0.95, size=(200, 3))
        delta = 1e-4
        base = decode_points(g, probes, self.model)
        moved = decode_points(g, probes + delta, self.model)
        self.assertLess(np.abs(moved - base).max(), 1e-2)

    def test_decode_points_chunking(self):
        g = encode_part(self.volume, self.model)
        probes = np.random.default_rng(2).random((50, 3))
        np.testing.assert_allclose(
            decode_points(g, probes, self.model, chunk=7),
            decode_points(g, probes, self.model),
            rtol=0,
            atol=1e-6,
        )


def test_decoder_gradient_matches_finite_differences():
    torch.manual_seed(0)
    decoder = ImplicitDecoder(code_dim=4, widths=(8, 8), dropout=0.0).double()
    params = list(decoder.parameters())
    rng = np.random.default_rng(0)
    eps = 1e-6

    for _ in range(10):
        codes = torch.tensor(rng.random((2, 4)))
        points = torch.tensor(rng.random((2, 5, 3)))
        target = torch.tensor(rng.integers(0, 2, size=(2, 5)).astype(np.float64))

        def loss_value():
            return part_loss_tensor(decoder(codes, points), target)

        decoder.zero_grad()
        loss_value().backward()
        analytic = torch.cat([p.grad.reshape(-1) for p in params]).clone()

        numeric = []
        with torch.no_grad():
            for p in params:
                flat = p.view(-1)
                for i in range(flat.numel()):
                    original = flat[i].item()
                    flat[i] = original + eps
                    up = loss_value().item()
                    flat[i] = original - eps
                    down = loss_value().item()
                    flat[i] = original
                    numeric.append((up - down) / (2 * eps))
        numeric = torch.tensor(numeric, dtype=torch.float64)
        error = (analytic - numeric).norm() / (analytic.norm() + numeric.norm())
        assert error.item() < 1e-4


class TestMesher(unittest.TestCase):
    def test_step_sphere_vertex_radii(self):
        mesh = extract_part_mesh(None, None, resolution=64, field_fn=step_sphere(0.3))
        self.assertFalse(mesh.is_empty())
        radii = np.linalg.norm(mesh.vertices - 0.5, axis=1)
        self.assertTrue(np.all(np.abs(radii - 0.3) <= 2.0 / 64))

    def test_sphere_is_closed_genus_zero(self):
        mesh = extract_part_mesh(None, None, resolution=64, field_fn=SphereField(0.3))
        tm = mesh.to_trimesh()
        self.assertTrue(tm.is_watertight)
        self.assertEqual(tm.euler_number, 2)

    def test_constant_fields_give_empty_mesh(self):
        zero = lambda p: np.zeros(len(p))
        one = lambda p: np.ones(len(p))
        self.assertTrue(extract_part_mesh(None, None, 32, field_fn=zero).is_empty())
        self.assertTrue(extract_part_mesh(None, None, 32, field_fn=one).is_empty())

    def test_bad_arguments(self):
        with self.assertRaises(InvalidInput):
            extract_part_mesh(None, None, resolution=48, field_fn=step_sphere())
        with self.assertRaises(InvalidInput):
            extract_part_mesh(None, None, resolution=64, iso=1.0, field_fn=step_sphere())

    def test_voxel_mesh_closes_border_shapes(self):
        grid = VoxelGrid(box_mask((0, 0, 0), (7, 15, 15), 16))
        mesh = voxel_mesh(grid)
        self.assertTrue(mesh.to_trimesh().is_watertight)
        self.assertGreaterEqual(mesh.vertices.min(), -1.0 / 16)
        self.assertLessEqual(mesh.vertices[:, 0].max(), 8.5 / 16)

    def test_no_degenerate_triangles(self):
        mesh = extract_part_mesh(None, None, resolution=32, field_fn=SphereField(0.25))
        self.assertTrue(np.all(mesh.triangle_areas() > 0))
        self.assertTrue(np.all(mesh.triangles < len(mesh.vertices)))

    def test_reconstruct_volume_shape(self):
        model = tiny_partae()
        g = encode_part(VoxelGrid(ball_mask((32, 32, 32), 20.0)), model)
        grid = reconstruct_volume(g, model, 16)
        self.assertEqual(grid.resolution, 16)


class TestPartAETrainer(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.parts = [p for r in synthetic_chairs(2, seed=0) for p in r.parts][:6]

    def tearDown(self):
        self._tmp.cleanup()

    def test_stage_input_is_upsampled_to_64(self):
        volume = stage_input(self.parts[0], 16)
        self.assertEqual(volume.shape, (64, 64, 64))
        coarse = downsample(self.parts[0].volume64, 16).occupancy
        np.testing.assert_array_equal(volume[::4, ::4, ::4], coarse)
        self.assertIs(stage_input(self.parts[0], 64), self.parts[0].volume64.occupancy)

    def test_empty_corpus(self):
        with self.assertRaises(InvalidInput):
            train_part_ae([], tiny_settings())

    def test_missing_stage_samples(self):
        settings = tiny_settings(stage_resolutions=[16, 32], stage_epochs=[1, 1])
        with self.assertRaises(InvalidInput):
            train_part_ae(self.parts, settings)

    def test_seeded_runs_are_identical(self):
        _, log_a = train_part_ae(self.parts, tiny_settings(), seed=3, points_per_step=256)
        _, log_b = train_part_ae(self.parts, tiny_settings(), seed=3, points_per_step=256)
        self.assertEqual(len(log_a), 2)
        self.assertEqual(log_a, log_b)
        self.assertTrue(all(row["stage"] == 16 for row in log_a))

    def test_checkpoints_per_stage(self):
        checkpoints = self.tmp / "checkpoints"
        model, log = PartAETrainer(
            tiny_settings(), seed=1, checkpoint_dir=checkpoints, points_per_step=128
        ).train(self.parts)
        self.assertTrue((checkpoints / "partae_16.pqck").exists())
        self.assertTrue((checkpoints / "partae.pqck").exists())
        self.assertTrue((self.tmp / "logs" / "partae_loss.csv").exists())

        state, meta = load_checkpoint(checkpoints / "partae.pqck")
        restored = load_into(build_part_ae(meta), state).eval()
        volume = self.parts[0].volume64
        np.testing.assert_allclose(
            encode_part(volume, restored), encode_part(volume, model), atol=1e-6
        )
        _, stage_meta = load_checkpoint(checkpoints / "partae_16.pqck")
        self.assertEqual(stage_meta["stage"], 16)


@pytest.mark.slow
def test_overfit_synthetic_parts():
    parts = [p for r in synthetic_chairs(6, seed=0) for p in r.parts][:20]
    settings = tiny_settings(
        encoder_channels=[8, 16, 32, 64],
        decoder_widths=[256, 256, 128, 64, 32],
        batch_size=4,
        learning_rate=1e-3,
        stage_epochs=[200],
    )
    model, log = train_part_ae(parts, settings, seed=0)
    assert log[-1]["loss"] < log[0]["loss"]
    assert log[-1]["loss"] < 0.05

    g = encode_part(parts[1].volume64, model)
    assert decode_point(g, (0.5, 0.5, 0.5), model) > 0.5
    assert decode_point(g, (0.01, 0.01, 0.01), model) < 0.5
