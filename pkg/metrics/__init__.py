"""Shape and set-level evaluation metrics."""
