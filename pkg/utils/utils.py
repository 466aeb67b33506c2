import hashlib
from typing import Optional

import torch

from utils.logging_config import get_logger

logger = get_logger(__name__)


def derive_seed(seed: int, *names) -> int:
    """
    Fan a single run seed out into an independent stream per name.

    Every stage (and every sub-task of a stage) hashes its name together with
    the run seed, so adding a stage never shifts the randomness of another.

    Args:
        seed: The run-level seed from the config
        names: Stage names, shape ids or any other string-able qualifiers

    Returns:
        A non-negative 31-bit integer seed
    """
    key = ":".join([str(seed)] + [str(n) for n in names]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little") & 0x7FFFFFFF


def torch_generator(seed: int, device: Optional[str] = None) -> torch.Generator:
    generator = torch.Generator(device=device or "cpu")
    generator.manual_seed(seed)
    return generator


def resolve_device(name: str) -> torch.device:
    """Return the requested device, falling back to cpu when cuda is absent."""
    if name.startswith("cuda") and not torch.cuda.is_available():
        logger.warning(f"Device {name} requested but cuda is unavailable; using cpu")
        return torch.device("cpu")
    return torch.device(name)


def strings_to_list(s: str) -> list:
    return [item.strip() for item in s.split(",")]


def validate_cs_input_str(input_str: str, field_name: str) -> list[str]:
    """Validate and parse comma-separated input string.

    Args:
        input_str: Comma-separated string to parse
        field_name: Name of field for error messages

    Returns:
        List of parsed and validated strings

    Raises:
        ValueError: If input contains invalid characters
    """
    if not input_str or not input_str.strip():
        return []

    validated_items = []
    for item in strings_to_list(input_str):
        if not item:
            continue
        if any(ord(c) < 32 for c in item):
            raise ValueError(
                f"Invalid {field_name} contains control characters: {item}"
            )
        validated_items.append(item)

    return validated_items


def parse_float_list(input_str: str, field_name: str) -> list[float]:
    """Parse a comma-separated list of floats such as interpolation weights."""
    try:
        return [float(item) for item in validate_cs_input_str(input_str, field_name)]
    except ValueError as e:
        raise ValueError(f"Invalid {field_name}: {input_str}") from e
