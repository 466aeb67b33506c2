"""Voxelization, part extraction, field sampling, rendering and corpora."""
