"""Application heads built on the frozen part and sequence models."""
