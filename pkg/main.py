"""
Part-sequence 3D shape generation - Main Entry Point

Shapes are sequences of parts. A part autoencoder learns an implicit field
per part, a sequence autoencoder maps part sequences to a fixed latent, and
a latent GAN samples that space. The application heads assemble decoded
parts into meshes for generation, interpolation, single-view
reconstruction, completion and part-order denoising.

Examples:
    # Build a synthetic dataset
    python main.py prepare --source synthetic --categories chair --count 50

    # Train the stages in order
    python main.py train partae
    python main.py train seq2seq
    python main.py train gan

    # Generate and evaluate
    python main.py generate --count 10 --seed 1
    python main.py eval --gen-dir runs/default/outputs/generate

Exit codes: 0 success, 2 input error, 3 missing dependency, 4 internal error.
"""

from utils.logging_config import setup_logging, get_logger
from cli.cli import CLI


if __name__ == "__main__":
    # Initialize logging
    setup_logging()
    logger = get_logger(__name__)

    cli = CLI()
    cli.run()
