"""Sequence autoencoder over part step vectors."""
