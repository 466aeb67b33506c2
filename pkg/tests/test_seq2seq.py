import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pytest
import torch

from config.settings import Seq2SeqSettings
from datakit.synth import build_shape_record
from models.sequences import DecodedStep, StepVector
from seq2seq.corruption import corrupt, drop_parts, scramble_parts
from seq2seq.losses import (
    loss_reconstruction,
    loss_stop,
    loss_total,
    reconstruction_loss_tensor,
    stop_loss_tensor,
    total_loss_tensor,
)
from seq2seq.networks import Seq2SeqAE, build_seq2seq, decode_sequence, encode_sequence
from seq2seq.steps import assemble_step_vectors, length_mask, pack_steps, pad_batch, unpack_steps
from seq2seq.trainer import (
    Seq2SeqTrainer,
    encode_latents,
    reconstruction_report,
    train_seq2seq,
)
from tests.mocks.fixtures import ball_mask, random_steps, synthetic_chairs
from tests.mocks.mock_models import CODE_DIM, K_MAX, rig_stop, tiny_partae, tiny_seq2seq
from utils.exceptions import InvalidInput
from utils.tensor_io import load_checkpoint


def tiny_settings(**overrides) -> Seq2SeqSettings:
    values = dict(
        encoder_hidden=8,
        decoder_hidden=16,
        num_layers=2,
        dropout=0.0,
        batch_size=4,
        learning_rate=1e-3,
        epochs=2,
        alpha=0.01,
        beta=1.0,
        checkpoint_every=0,
    )
    values.update(overrides)
    return Seq2SeqSettings(**values)


def ball_record(count: int):
    centers = [(10 + 12 * k, 32, 32) for k in range(count)]
    masks = [ball_mask(c, 5.0) for c in centers]
    return build_shape_record("balls", "chair", "train", masks, 0, resolution_tags=(16,), depth_views=False)


def sequences(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [
        (f"s{i}", random_steps(int(rng.integers(1, K_MAX + 1)), CODE_DIM, K_MAX, seed=seed + i))
        for i in range(n)
    ]


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


class TestStepVectors(unittest.TestCase):
    def test_three_parts(self):
        record = ball_record(3)
        codes = [np.random.default_rng(k).random(128) for k in range(3)]
        steps = assemble_step_vectors(record, codes, 10)
        self.assertEqual(len(steps), 3)
        for step, code, part in zip(steps, codes, record.parts):
            self.assertEqual(len(step), 144)
            self.assertEqual(int(np.argmax(step.t)), 2)
            np.testing.assert_allclose(step.g, code.astype(np.float32))
            np.testing.assert_allclose(step.b, part.box.to_vector().astype(np.float32))

    def test_k_equals_k_max(self):
        record = ball_record(4)
        steps = assemble_step_vectors(record, [np.zeros(CODE_DIM)] * 4, 4)
        self.assertTrue(all(s.t[-1] == 1.0 for s in steps))

    def test_errors(self):
        record = ball_record(4)
        with self.assertRaises(InvalidInput):
            assemble_step_vectors(record, [np.zeros(CODE_DIM)] * 4, 3)
        with self.assertRaises(InvalidInput):
            assemble_step_vectors(record, [np.zeros(CODE_DIM)] * 3, 10)

    def test_pack_unpack(self):
        steps = random_steps(3, CODE_DIM, K_MAX, seed=4)
        packed = pack_steps(steps)
        self.assertEqual(packed.shape, (3, CODE_DIM + 6 + K_MAX))
        for a, b in zip(unpack_steps(packed, CODE_DIM, K_MAX), steps):
            np.testing.assert_array_equal(a.to_array(), b.to_array())
        with self.assertRaises(InvalidInput):
            pack_steps([])

    def test_pad_batch_and_mask(self):
        batch, lengths = pad_batch([np.ones((2, 3)), np.ones((4, 3))])
        self.assertEqual(tuple(batch.shape), (2, 4, 3))
        self.assertEqual(lengths.tolist(), [2, 4])
        self.assertEqual(batch[0, 2:].abs().sum().item(), 0.0)
        mask = length_mask(lengths, 4)
        self.assertEqual(mask.tolist(), [[True, True, False, False], [True] * 4])


def gru_cell(x, h, w_ih, w_hh, b_ih, b_hh):
    gi = w_ih @ x + b_ih
    gh = w_hh @ h + b_hh
    n = len(h)
    r = 1 / (1 + np.exp(-(gi[:n] + gh[:n])))
    z = 1 / (1 + np.exp(-(gi[n : 2 * n] + gh[n : 2 * n])))
    c = np.tanh(gi[2 * n :] + r * gh[2 * n :])
    return (1 - z) * c + z * h


class TestSequenceEncoder(unittest.TestCase):
    def setUp(self):
        self.model = tiny_seq2seq()

    def test_latent_dimension(self):
        h_z = encode_sequence(random_steps(3, CODE_DIM, K_MAX), self.model)
        self.assertEqual(h_z.shape, (32,))
        self.assertEqual(self.model.latent_dim, 32)

    def test_default_dimension_algebra(self):
        model = Seq2SeqAE()
        self.assertEqual(model.latent_dim, 1024)
        self.assertEqual(model.encoder.rnn.input_size, 128 + 6 + 10)
        self.assertEqual(model.decoder.cell_s.input_size, 134)
        self.assertEqual(model.decoder.geometry_head[-1].out_features, 128)
        self.assertEqual(model.decoder.box_head[-1].out_features, 6)
        self.assertEqual(model.decoder.stop_head[-1].out_features, 1)
        with self.assertRaises(InvalidInput):
            Seq2SeqAE(encoder_hidden=256, decoder_hidden=256)

    def test_order_sensitive(self):
        a, b = random_steps(2, CODE_DIM, K_MAX, seed=1)
        self.assertFalse(
            np.allclose(encode_sequence([a, b], self.model), encode_sequence([b, a], self.model))
        )

    def test_deterministic(self):
        steps = random_steps(3, CODE_DIM, K_MAX)
        np.testing.assert_array_equal(
            encode_sequence(steps, self.model), encode_sequence(steps, self.model)
        )

    def test_invalid_lengths(self):
        with self.assertRaises(InvalidInput):
            encode_sequence([], self.model)
        too_long = random_steps(5, CODE_DIM, 6)
        with self.assertRaises(InvalidInput):
            encode_sequence(too_long, self.model)

    def test_single_step_matches_unrolled_cells(self):
        torch.manual_seed(0)
        model = Seq2SeqAE(code_dim=2, k_max=2, encoder_hidden=4, decoder_hidden=8, num_layers=2, dropout=0.0)
        step = StepVector(g=[0.3, 0.7], b=[0.5, 0.5, 0.5, 0.2, 0.4, 0.6], t=[1.0, 0.0])
        h_z = encode_sequence([step], model)

        weights = {k: v.double().numpy() for k, v in model.encoder.rnn.state_dict().items()}
        x = step.to_array().astype(np.float64)
        zero = np.zeros(4)

        def cell(inp, suffix):
            return gru_cell(
                inp, zero,
                weights[f"weight_ih_{suffix}"], weights[f"weight_hh_{suffix}"],
                weights[f"bias_ih_{suffix}"], weights[f"bias_hh_{suffix}"],
            )

        l0f, l0b = cell(x, "l0"), cell(x, "l0_reverse")
        layer1_in = np.concatenate([l0f, l0b])
        l1f, l1b = cell(layer1_in, "l1"), cell(layer1_in, "l1_reverse")
        np.testing.assert_allclose(h_z, np.concatenate([l0f, l0b, l1f, l1b]), atol=1e-5)


class TestDecodeSequence(unittest.TestCase):
    def setUp(self):
        self.h_z = np.random.default_rng(0).normal(size=32)

    def test_confident_stop_emits_one_step(self):
        model = rig_stop(tiny_seq2seq(), logit(0.9))
        steps = decode_sequence(self.h_z, model, max_steps=10)
        self.assertEqual(len(steps), 1)
        self.assertAlmostEqual(steps[0].s, 0.9, places=5)

    def test_never_stop_hits_cap(self):
        model = rig_stop(tiny_seq2seq(), logit(0.1))
        self.assertEqual(len(decode_sequence(self.h_z, model, max_steps=10)), 10)
        self.assertEqual(len(decode_sequence(self.h_z, model)), K_MAX)

    def test_min_steps_overrides_stop(self):
        model = rig_stop(tiny_seq2seq(), logit(0.9))
        self.assertEqual(len(decode_sequence(self.h_z, model, max_steps=10, min_steps=3)), 3)

    def test_step_count_bounds_for_random_latents(self):
        model = tiny_seq2seq(seed=2)
        rng = np.random.default_rng(5)
        for _ in range(20):
            steps = decode_sequence(rng.normal(size=32) * 3, model, max_steps=6)
            self.assertTrue(1 <= len(steps) <= 6)
            self.assertTrue(all(0.0 < s.s < 1.0 for s in steps))
            self.assertTrue(all(s.g.shape == (CODE_DIM,) for s in steps))

    def test_bad_arguments(self):
        model = tiny_seq2seq()
        with self.assertRaises(InvalidInput):
            decode_sequence(self.h_z, model, max_steps=0)
        with self.assertRaises(InvalidInput):
            decode_sequence(np.zeros(31), model)


class TestLosses(unittest.TestCase):
    def test_reconstruction_zero(self):
        truth = random_steps(3, CODE_DIM, K_MAX)
        pred = [DecodedStep(g=s.g, b=s.b, s=0.5) for s in truth]
        self.assertEqual(loss_reconstruction(pred, truth), 0.0)

    def test_reconstruction_unit_box_error(self):
        truth = random_steps(1, CODE_DIM, K_MAX)
        b = truth[0].b.copy()
        b[0] += 1.0
        pred = [DecodedStep(g=truth[0].g, b=b, s=0.5)]
        self.assertAlmostEqual(loss_reconstruction(pred, truth, beta=1.0), 1.0, places=6)

    def test_reconstruction_hand_arithmetic(self):
        truth = [
            StepVector(g=[0.0, 0.0], b=[0, 0, 0, 0, 0, 0], t=[0, 1]),
            StepVector(g=[1.0, 1.0], b=[1, 1, 1, 1, 1, 1], t=[0, 1]),
        ]
        pred = [
            DecodedStep(g=[0.5, 0.0], b=[0.1, 0, 0, 0, 0, 0.2], s=0.3),
            DecodedStep(g=[1.0, 0.0], b=[1, 1, 1, 1, 1, 0.5], s=0.8),
        ]
        # step 1: 2 * 0.25 + 0.05; step 2: 2 * 1 + 0.25
        expected = ((0.5 + 0.05) + (2.0 + 0.25)) / 2
        self.assertAlmostEqual(loss_reconstruction(pred, truth, beta=2.0), expected, places=6)
        with self.assertRaises(InvalidInput):
            loss_reconstruction(pred[:1], truth)

    def test_stop_half(self):
        for k in (1, 2, 5):
            self.assertAlmostEqual(loss_stop([0.5] * k, k), math.log(2), places=12)

    def test_stop_hand_arithmetic(self):
        self.assertAlmostEqual(
            loss_stop([0.2, 0.7], 2), (-math.log(0.8) - math.log(0.7)) / 2, places=12
        )
        self.assertAlmostEqual(loss_stop([0.2, 0.7], 2), 0.289907, places=6)

    def test_stop_near_perfect(self):
        eps = 1e-4
        self.assertLessEqual(loss_stop([eps, eps, 1 - eps], 3), 3 * eps)

    def test_stop_out_of_range(self):
        with self.assertRaises(InvalidInput):
            loss_stop([0.0, 0.5], 2)
        with self.assertRaises(InvalidInput):
            loss_stop([0.5, 1.0], 2)
        with self.assertRaises(InvalidInput):
            loss_stop([0.5], 2)

    def test_stop_minimized_at_labels(self):
        grid = np.linspace(0.05, 0.95, 19)
        for k in (1, 2, 3):
            best = min(
                (loss_stop(list(signs), k), tuple(signs))
                for signs in np.array(np.meshgrid(*[grid] * k)).reshape(k, -1).T
            )
            expected = tuple([0.05] * (k - 1) + [0.95])
            np.testing.assert_allclose(best[1], expected)

    def test_total(self):
        self.assertEqual(loss_total(0.0, 0.0), 0.0)
        self.assertAlmostEqual(loss_total(1.0, 1.0, alpha=0.01), 1.01, places=12)
        self.assertAlmostEqual(loss_total([0.5, 1.5], [0.2, 0.4], alpha=0.01), 1.003, places=12)
        with self.assertRaises(InvalidInput):
            loss_total([-1.0], [0.0])

    def test_tensor_losses_match_scalar_losses(self):
        rng = np.random.default_rng(3)
        truth = random_steps(3, CODE_DIM, K_MAX, seed=3)
        pred_g = rng.random((1, 3, CODE_DIM))
        pred_b = rng.random((1, 3, 6))
        logits = rng.normal(size=(1, 3))
        lengths = torch.tensor([3])
        true_g = torch.tensor(np.stack([s.g for s in truth])[None], dtype=torch.float64)
        true_b = torch.tensor(np.stack([s.b for s in truth])[None], dtype=torch.float64)

        recon = reconstruction_loss_tensor(
            torch.tensor(pred_g), torch.tensor(pred_b), true_g, true_b, lengths, 0.5
        )
        decoded = [DecodedStep(g=pred_g[0, i], b=pred_b[0, i], s=0.5) for i in range(3)]
        self.assertAlmostEqual(recon.item(), loss_reconstruction(decoded, truth, 0.5), places=5)

        stop = stop_loss_tensor(torch.tensor(logits), lengths)
        signs = 1 / (1 + np.exp(-logits[0]))
        self.assertAlmostEqual(stop.item(), loss_stop(signs, 3), places=9)
        total = total_loss_tensor(recon, stop, 0.01)
        self.assertAlmostEqual(total.item(), recon.item() + 0.01 * stop.item(), places=9)


class TestCorruption(unittest.TestCase):
    def setUp(self):
        self.steps = random_steps(4, CODE_DIM, K_MAX, seed=8)

    def test_drop_keeps_order_and_recounts(self):
        rng = np.random.default_rng(0)
        originals = [s.b.tolist() for s in self.steps]
        for _ in range(30):
            kept = drop_parts(self.steps, rng)
            self.assertTrue(1 <= len(kept) <= 4)
            positions = [originals.index(s.b.tolist()) for s in kept]
            self.assertEqual(positions, sorted(positions))
            self.assertTrue(all(s.part_count == len(kept) for s in kept))

    def test_scramble_is_permutation(self):
        scrambled = scramble_parts(self.steps, np.random.default_rng(1))
        self.assertEqual(
            sorted(s.b.tolist() for s in scrambled), sorted(s.b.tolist() for s in self.steps)
        )
        self.assertTrue(all(s.part_count == 4 for s in scrambled))

    def test_corrupt_modes(self):
        rng = np.random.default_rng(2)
        self.assertEqual(corrupt(self.steps, "autoencode", rng), self.steps)
        with self.assertRaises(InvalidInput):
            corrupt(self.steps, "shuffle", rng)
        with self.assertRaises(InvalidInput):
            drop_parts([], rng)
        with self.assertRaises(InvalidInput):
            scramble_parts([], rng)


def test_padded_batch_loss_equals_per_shape_loss():
    trainer = Seq2SeqTrainer(tiny_settings(), CODE_DIM, K_MAX, seed=0)
    trainer.model.eval()
    data = [steps for _, steps in sequences(5, seed=1)]
    rng = np.random.default_rng(0)
    with torch.no_grad():
        recon, stop = trainer.batch_losses(*trainer._batch(data, rng))
        for i, steps in enumerate(data):
            r_i, s_i = trainer.batch_losses(*trainer._batch([steps], rng))
            assert r_i.item() == pytest.approx(recon[i].item(), rel=1e-5, abs=1e-6)
            assert s_i.item() == pytest.approx(stop[i].item(), rel=1e-5, abs=1e-6)


def test_seq2seq_gradient_matches_finite_differences():
    torch.manual_seed(0)
    code_dim, k_max = 3, 3
    model = Seq2SeqAE(
        code_dim=code_dim, k_max=k_max, encoder_hidden=4, decoder_hidden=8, num_layers=2, dropout=0.0
    ).double()
    params = list(model.parameters())
    rng = np.random.default_rng(0)
    eps = 1e-6

    for trial in range(10):
        data = [random_steps(int(rng.integers(1, k_max + 1)), code_dim, k_max, seed=10 * trial + i) for i in range(2)]
        x, x_len = pad_batch([pack_steps(s) for s in data])
        y, y_len = pad_batch([pack_steps(s)[:, : code_dim + 6] for s in data])
        x, y = x.double(), y.double()

        def loss_value():
            pred_g, pred_b, logits = model(x, x_len, y)
            recon = reconstruction_loss_tensor(
                pred_g, pred_b, y[..., :code_dim], y[..., code_dim:], y_len, 1.0
            )
            return total_loss_tensor(recon, stop_loss_tensor(logits, y_len), 0.01)

        model.zero_grad()
        loss_value().backward()
        analytic = torch.cat([
            (p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1) for p in params
        ])

        flat_index = [(pi, i) for pi, p in enumerate(params) for i in range(p.numel())]
        picks = rng.choice(len(flat_index), size=60, replace=False)
        numeric, chosen = [], []
        with torch.no_grad():
            for j in picks:
                pi, i = flat_index[j]
                flat = params[pi].view(-1)
                original = flat[i].item()
                flat[i] = original + eps
                up = loss_value().item()
                flat[i] = original - eps
                down = loss_value().item()
                flat[i] = original
                numeric.append((up - down) / (2 * eps))
                chosen.append(analytic[j].item())
        numeric = torch.tensor(numeric, dtype=torch.float64)
        chosen = torch.tensor(chosen, dtype=torch.float64)
        denom = chosen.norm() + numeric.norm()
        if denom > 0:
            assert ((chosen - numeric).norm() / denom).item() < 1e-4


class TestSeq2SeqTrainer(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_seeded_runs_are_identical(self):
        data = sequences(6)
        _, log_a = Seq2SeqTrainer(tiny_settings(), CODE_DIM, K_MAX, seed=4).train(data)
        _, log_b = Seq2SeqTrainer(tiny_settings(), CODE_DIM, K_MAX, seed=4).train(data)
        self.assertEqual(log_a, log_b)
        self.assertEqual(set(log_a[0]), {"epoch", "loss", "reconstruction", "stop"})

    def test_zero_alpha_leaves_stop_head_untouched(self):
        data = sequences(6)
        trainer = Seq2SeqTrainer(tiny_settings(alpha=0.0), CODE_DIM, K_MAX, seed=1)
        before = [p.detach().clone() for p in trainer.model.decoder.stop_head.parameters()]
        trainer.train(data)
        after = list(trainer.model.decoder.stop_head.parameters())
        self.assertTrue(all(torch.equal(a, b) for a, b in zip(before, after)))

        trainer = Seq2SeqTrainer(tiny_settings(alpha=0.01), CODE_DIM, K_MAX, seed=1)
        before = [p.detach().clone() for p in trainer.model.decoder.stop_head.parameters()]
        trainer.train(data)
        after = list(trainer.model.decoder.stop_head.parameters())
        self.assertFalse(all(torch.equal(a, b) for a, b in zip(before, after)))

    def test_rejects_sequences_over_k_max(self):
        data = [("long", random_steps(5, CODE_DIM, 6))]
        with self.assertRaises(InvalidInput):
            Seq2SeqTrainer(tiny_settings(), CODE_DIM, K_MAX).train(data)
        with self.assertRaises(InvalidInput):
            Seq2SeqTrainer(tiny_settings(), CODE_DIM, K_MAX).train([])
        with self.assertRaises(InvalidInput):
            Seq2SeqTrainer(tiny_settings(), CODE_DIM, K_MAX, mode="reverse")

    def test_corpus_over_k_max(self):
        corpus = synthetic_chairs(1, seed=0)
        with self.assertRaises(InvalidInput):
            train_seq2seq(corpus, tiny_partae(), tiny_settings(), k_max=3)

    def test_train_from_records_writes_artifacts(self):
        corpus = synthetic_chairs(3, seed=0)
        checkpoints = self.tmp / "checkpoints"
        partae = tiny_partae()
        model, log = train_seq2seq(
            corpus, partae, tiny_settings(checkpoint_every=1), k_max=10, seed=0,
            mode="complete", checkpoint_dir=checkpoints,
        )
        self.assertEqual(len(log), 2)
        self.assertTrue((checkpoints / "completion.pqck").exists())
        self.assertTrue((checkpoints / "completion_e1.pqck").exists())
        self.assertTrue((self.tmp / "logs" / "completion_loss.csv").exists())
        self.assertTrue(all(not p.requires_grad for p in partae.parameters()))

        state, meta = load_checkpoint(checkpoints / "completion.pqck")
        self.assertEqual(meta["k_max"], 10)
        self.assertEqual(build_seq2seq(meta).latent_dim, 32)

    def test_latents_and_report(self):
        data = sequences(4)
        model = tiny_seq2seq()
        latents = encode_latents(model, data)
        self.assertEqual(sorted(latents), ["s0", "s1", "s2", "s3"])
        self.assertTrue(all(v.shape == (32,) for v in latents.values()))
        report = reconstruction_report(rig_stop(model, logit(0.1)), data)
        # never stopping decodes K_MAX steps, so only full-length shapes count
        expected = sum(len(steps) == K_MAX for _, steps in data) / len(data)
        self.assertAlmostEqual(report["step_count_accuracy"], expected)


@pytest.mark.slow
def test_overfit_three_part_shape():
    data = [("toy", random_steps(3, CODE_DIM, K_MAX, seed=21))]
    settings = tiny_settings(
        encoder_hidden=32, decoder_hidden=64, batch_size=1, epochs=1500, alpha=1.0
    )
    model, _ = Seq2SeqTrainer(settings, CODE_DIM, K_MAX, seed=0).train(data)
    report = reconstruction_report(model, data)
    assert report["step_count_accuracy"] == 1.0
    assert report["box_mse"] < 1e-3
