"""WGAN-GP sampler over the shape latent space."""
