from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from tqdm import tqdm

from config.settings import GanSettings
from latentgan.networks import LatentCritic, LatentGenerator
from latentgan.penalty import critic_loss
from utils.exceptions import raise_invalid_input
from utils.file_utils import write_rows_csv
from utils.logging_config import format_losses_for_log, get_logger
from utils.tensor_io import save_checkpoint
from utils.utils import derive_seed, torch_generator

logger = get_logger(__name__)


class LatentGanTrainer:
    """n_critic critic updates per generator update, Adam on both nets."""

    def __init__(
        self,
        settings: GanSettings,
        latent_dim: int,
        seed: int = 0,
        device: str = "cpu",
        checkpoint_dir: Optional[Path] = None,
    ):
        self.settings = settings
        self.seed = seed
        self.device = torch.device(device)
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        torch.manual_seed(derive_seed(seed, "gan", "init"))
        self.generator = LatentGenerator(settings.z_dim, settings.hidden_widths, latent_dim).to(self.device)
        self.critic = LatentCritic(latent_dim, settings.hidden_widths).to(self.device)
        self.log: List[Dict] = []
        self.saved: List[Path] = []

    def train(
        self, latents: np.ndarray, iterations: Optional[int] = None
    ) -> Tuple[LatentGenerator, LatentCritic, List[Dict]]:
        latents = np.asarray(latents, dtype=np.float32)
        if latents.ndim != 2 or len(latents) < 2:
            raise_invalid_input("Latent GAN needs at least two latents")
        if latents.shape[1] != self.generator.latent_dim:
            raise_invalid_input(
                f"Latents have {latents.shape[1]} components, generator emits {self.generator.latent_dim}"
            )

        s = self.settings
        iterations = s.iterations if iterations is None else iterations
        data = torch.from_numpy(latents).to(self.device)
        betas = (s.adam_beta1, s.adam_beta2)
        opt_g = torch.optim.Adam(self.generator.parameters(), lr=s.learning_rate, betas=betas)
        opt_c = torch.optim.Adam(self.critic.parameters(), lr=s.learning_rate, betas=betas)
        rng = torch_generator(derive_seed(self.seed, "gan", "train"))
        batch = min(s.batch_size, len(latents))

        def noise(n):
            return torch.randn(n, s.z_dim, generator=rng).to(self.device)

        logger.info(f"[*] Training latent GAN on {len(latents)} latents for {iterations} iterations...")
        for it in tqdm(range(iterations), desc="latent gan", leave=False):
            for _ in range(s.n_critic):
                idx = torch.randint(0, len(latents), (batch,), generator=rng)
                real = data[idx.to(self.device)]
                with torch.no_grad():
                    fake = self.generator(noise(batch))
                loss_c, wasserstein, penalty = critic_loss(
                    self.critic, real, fake, s.penalty_weight, generator=rng
                )
                opt_c.zero_grad()
                loss_c.backward()
                opt_c.step()

            loss_g = -self.critic(self.generator(noise(batch))).mean()
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

            row = {
                "iteration": it,
                "critic_loss": loss_c.item(),
                "generator_loss": loss_g.item(),
                "wasserstein": wasserstein.item(),
                "penalty": penalty.item(),
            }
            self.log.append(row)
            logger.debug(f"gan iteration {it}: {format_losses_for_log(row)}")

        if self.checkpoint_dir is not None:
            self.saved += [
                save_checkpoint(self.checkpoint_dir / "gan_generator.pqck", self.generator.state_dict(), self.generator.config),
                save_checkpoint(self.checkpoint_dir / "gan_critic.pqck", self.critic.state_dict(), self.critic.config),
                write_rows_csv(self.checkpoint_dir.parent / "logs" / "gan_loss.csv", self.log),
            ]
        self.generator.eval()
        self.critic.eval()
        return self.generator, self.critic, self.log


def train_latent_gan(latents: np.ndarray, settings: GanSettings, seed: int = 0, **kwargs):
    latents = np.asarray(latents, dtype=np.float32)
    if latents.size == 0:
        raise_invalid_input("Latent set is empty")
    return LatentGanTrainer(settings, latents.shape[-1], seed=seed, **kwargs).train(latents)


@torch.no_grad()
def sample_latents(generator: LatentGenerator, count: int, seed: int) -> np.ndarray:
    """(count, latent_dim) samples from N(0, I) noise seeded by `seed`."""
    if count < 1:
        raise_invalid_input(f"count must be >= 1, got {count}")
    generator.eval()
    device = next(generator.parameters()).device
    z = torch.randn(count, generator.z_dim, generator=torch_generator(seed)).to(device)
    return generator(z).cpu().numpy()
