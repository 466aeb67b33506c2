"""Part geometry autoencoder: 3D CNN encoder and implicit field decoder."""
