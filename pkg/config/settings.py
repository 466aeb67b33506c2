"""
Centralized settings management file.
"""

import os
import json
import math
import configparser
from functools import lru_cache
from pathlib import Path
from typing import List, Dict, Any, Optional

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

# Only load `.env` if not in CI
if os.getenv("GITHUB_ACTIONS") != "true":
    dotenv_path = Path(__file__).resolve().parent.parent / ".env"
    load_dotenv(dotenv_path=dotenv_path)

DATA_ROOT_ENV = "PQNET_DATA_ROOT"
SUPPORTED_CATEGORIES = ("chair", "table", "lamp")
SUPPORTED_RESOLUTION_TAGS = (16, 32, 64)
SAMPLE_COUNTS = {16: 4096, 32: 8192, 64: 32768}


def _parse_list(v: Any) -> Any:
    """Parse a list from a JSON string, a comma-separated string or a list."""
    if isinstance(v, str):
        try:
            parsed = json.loads(v)
            return parsed if isinstance(parsed, list) else [parsed]
        except json.JSONDecodeError:
            return [item.strip() for item in v.split(",") if item.strip()]
    return v


class _SectionSettings(BaseSettings):
    model_config = SettingsConfigDict(
        populate_by_name=True, case_sensitive=False, extra="ignore"
    )


class DirectorySettings(_SectionSettings):
    """File system and directory configuration."""

    data_root: Path = Field(default=Path("data"), alias=DATA_ROOT_ENV)
    run_dir: Path = Field(default=Path("runs") / "default", alias="RUN_DIR")
    logs_dir: Path = Field(default=Path("logs"), alias="LOGS_DIR")
    config_dir: Path = Field(default=Path("config"), alias="CONFIG_DIR")

    create_dirs_on_startup: bool = Field(default=True, alias="CREATE_DIRS_ON_STARTUP")

    @field_validator("data_root", "run_dir", "logs_dir", "config_dir", mode="before")
    @classmethod
    def convert_to_path(cls, v: Any) -> Path:
        """Convert string paths to Path objects."""
        return Path(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def create_directories(self) -> "DirectorySettings":
        """Create the logs directory; data and run dirs belong to commands."""
        if self.create_dirs_on_startup:
            self.logs_dir.mkdir(parents=True, exist_ok=True)
        return self

    @property
    def checkpoint_dir(self) -> Path:
        return self.run_dir / "checkpoints"

    @property
    def log_dir(self) -> Path:
        return self.run_dir / "logs"


class ProcessingSettings(_SectionSettings):
    """Run-wide processing configuration."""

    seed: int = Field(default=0, alias="SEED")
    device: str = Field(default="cpu", alias="DEVICE")
    debug: bool = Field(default=False, alias="DEBUG")
    force: bool = Field(default=False, alias="FORCE")
    max_workers: int = Field(default=1, alias="MAX_WORKERS")

    @field_validator("seed")
    @classmethod
    def validate_seed(cls, v: int) -> int:
        if v < 0:
            raise ValueError("seed must be non-negative")
        return v

    @field_validator("max_workers")
    @classmethod
    def validate_workers(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("max_workers must be positive")
        return v


class DataSettings(_SectionSettings):
    """Dataset preparation configuration."""

    k_max: int = Field(default=10, alias="K_MAX")
    categories: List[str] = Field(default=["chair"], alias="CATEGORIES")
    shape_resolution: int = Field(default=64, alias="SHAPE_RESOLUTION")
    resolution_tags: List[int] = Field(default=[16, 32, 64], alias="RESOLUTION_TAGS")
    synth_count: int = Field(default=50, alias="SYNTH_COUNT")
    source: str = Field(default="synthetic", alias="DATA_SOURCE")
    source_path: Optional[Path] = Field(default=None, alias="DATA_SOURCE_PATH")
    train_fraction: float = Field(default=0.8, alias="TRAIN_FRACTION")
    val_fraction: float = Field(default=0.1, alias="VAL_FRACTION")
    part_order: str = Field(default="natural", alias="PART_ORDER")

    depth_views: int = Field(default=5, alias="DEPTH_VIEWS")
    depth_resolution: int = Field(default=64, alias="DEPTH_RESOLUTION")
    depth_elevation: float = Field(default=30.0, alias="DEPTH_ELEVATION")
    view_extent: float = Field(default=math.sqrt(3.0), alias="VIEW_EXTENT")

    @field_validator("categories", "resolution_tags", mode="before")
    @classmethod
    def parse_lists(cls, v: Any) -> Any:
        return _parse_list(v)

    @field_validator("categories")
    @classmethod
    def validate_categories(cls, v: List[str]) -> List[str]:
        invalid = set(v) - set(SUPPORTED_CATEGORIES)
        if invalid:
            raise ValueError(f"Unsupported categories: {invalid}")
        return v

    @field_validator("resolution_tags")
    @classmethod
    def validate_tags(cls, v: List[int]) -> List[int]:
        invalid = set(v) - set(SUPPORTED_RESOLUTION_TAGS)
        if invalid:
            raise ValueError(f"Unsupported resolution tags: {invalid}")
        return sorted(v)

    @field_validator("source")
    @classmethod
    def validate_source(cls, v: str) -> str:
        if v not in ("synthetic", "partnet", "meshes"):
            raise ValueError(f"Unsupported data source: {v}")
        return v

    @field_validator("part_order")
    @classmethod
    def validate_order(cls, v: str) -> str:
        if v not in ("natural", "top_down"):
            raise ValueError(f"Unsupported part order: {v}")
        return v

    @field_validator("k_max", "synth_count", "depth_views", "depth_resolution")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("value must be positive")
        return v


class PartAESettings(_SectionSettings):
    """Part geometry autoencoder architecture and progressive schedule."""

    code_dim: int = Field(default=128, alias="PARTAE_CODE_DIM")
    encoder_channels: List[int] = Field(
        default=[32, 64, 128, 256], alias="PARTAE_ENCODER_CHANNELS"
    )
    decoder_widths: List[int] = Field(
        default=[2048, 1024, 512, 256, 128], alias="PARTAE_DECODER_WIDTHS"
    )
    dropout: float = Field(default=0.4, alias="PARTAE_DROPOUT")
    batch_size: int = Field(default=40, alias="PARTAE_BATCH_SIZE")
    learning_rate: float = Field(default=5e-4, alias="PARTAE_LEARNING_RATE")
    stage_resolutions: List[int] = Field(
        default=[16, 32, 64], alias="PARTAE_STAGE_RESOLUTIONS"
    )
    stage_epochs: List[int] = Field(default=[200, 100, 50], alias="PARTAE_STAGE_EPOCHS")
    iso_level: float = Field(default=0.5, alias="PARTAE_ISO_LEVEL")

    @field_validator(
        "encoder_channels",
        "decoder_widths",
        "stage_resolutions",
        "stage_epochs",
        mode="before",
    )
    @classmethod
    def parse_lists(cls, v: Any) -> Any:
        return _parse_list(v)

    @field_validator("code_dim", "batch_size")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("value must be positive")
        return v

    @field_validator("learning_rate")
    @classmethod
    def validate_rate(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("learning_rate must be positive")
        return v

    @field_validator("iso_level")
    @classmethod
    def validate_iso(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("iso_level must lie in (0, 1)")
        return v

    @model_validator(mode="after")
    def validate_schedule(self) -> "PartAESettings":
        if len(self.stage_resolutions) != len(self.stage_epochs):
            raise ValueError("stage_resolutions and stage_epochs must align")
        if set(self.stage_resolutions) - set(SUPPORTED_RESOLUTION_TAGS):
            raise ValueError(f"Unsupported stage resolutions: {self.stage_resolutions}")
        return self


class Seq2SeqSettings(_SectionSettings):
    """Sequence autoencoder architecture, loss weights and training loop."""

    encoder_hidden: int = Field(default=256, alias="SEQ2SEQ_ENCODER_HIDDEN")
    decoder_hidden: int = Field(default=512, alias="SEQ2SEQ_DECODER_HIDDEN")
    num_layers: int = Field(default=2, alias="SEQ2SEQ_NUM_LAYERS")
    dropout: float = Field(default=0.2, alias="SEQ2SEQ_DROPOUT")
    batch_size: int = Field(default=64, alias="SEQ2SEQ_BATCH_SIZE")
    learning_rate: float = Field(default=1e-3, alias="SEQ2SEQ_LEARNING_RATE")
    epochs: int = Field(default=2000, alias="SEQ2SEQ_EPOCHS")
    alpha: float = Field(default=0.01, alias="SEQ2SEQ_ALPHA")
    beta: float = Field(default=1.0, alias="SEQ2SEQ_BETA")
    checkpoint_every: int = Field(default=500, alias="SEQ2SEQ_CHECKPOINT_EVERY")

    @field_validator("alpha", "beta")
    @classmethod
    def validate_weights(cls, v: float) -> float:
        if v < 0:
            raise ValueError("loss weights must be non-negative")
        return v

    @field_validator(
        "encoder_hidden", "decoder_hidden", "num_layers", "batch_size", "epochs"
    )
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("value must be positive")
        return v

    @model_validator(mode="after")
    def validate_latent_split(self) -> "Seq2SeqSettings":
        # h_z (num_layers * 2 * encoder_hidden) splits into the two decoder states
        if self.num_layers * self.encoder_hidden != self.decoder_hidden:
            raise ValueError("decoder_hidden must equal num_layers * encoder_hidden")
        return self

    @property
    def latent_dim(self) -> int:
        return self.num_layers * 2 * self.encoder_hidden


class GanSettings(_SectionSettings):
    """Latent WGAN-GP configuration."""

    z_dim: int = Field(default=128, alias="GAN_Z_DIM")
    hidden_widths: List[int] = Field(default=[1024, 1024, 1024], alias="GAN_HIDDEN_WIDTHS")
    penalty_weight: float = Field(default=10.0, alias="GAN_PENALTY_WEIGHT")
    n_critic: int = Field(default=5, alias="GAN_N_CRITIC")
    batch_size: int = Field(default=64, alias="GAN_BATCH_SIZE")
    learning_rate: float = Field(default=1e-4, alias="GAN_LEARNING_RATE")
    adam_beta1: float = Field(default=0.5, alias="GAN_ADAM_BETA1")
    adam_beta2: float = Field(default=0.9, alias="GAN_ADAM_BETA2")
    iterations: int = Field(default=5000, alias="GAN_ITERATIONS")

    @field_validator("hidden_widths", mode="before")
    @classmethod
    def parse_lists(cls, v: Any) -> Any:
        return _parse_list(v)

    @field_validator("penalty_weight")
    @classmethod
    def validate_penalty(cls, v: float) -> float:
        if v < 0:
            raise ValueError("penalty_weight must be non-negative")
        return v

    @field_validator("z_dim", "n_critic", "batch_size", "iterations")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("value must be positive")
        return v


class SvrSettings(_SectionSettings):
    """Single-view reconstruction encoder training."""

    branch: str = Field(default="depth", alias="SVR_BRANCH")
    depth_channels: List[int] = Field(default=[32, 64, 128, 256], alias="SVR_DEPTH_CHANNELS")
    batch_size: int = Field(default=32, alias="SVR_BATCH_SIZE")
    learning_rate: float = Field(default=1e-4, alias="SVR_LEARNING_RATE")
    epochs: int = Field(default=100, alias="SVR_EPOCHS")

    @field_validator("depth_channels", mode="before")
    @classmethod
    def parse_lists(cls, v: Any) -> Any:
        return _parse_list(v)

    @field_validator("branch")
    @classmethod
    def validate_branch(cls, v: str) -> str:
        if v not in ("depth", "rgb"):
            raise ValueError(f"Unsupported SVR branch: {v}")
        return v


class EvalSettings(_SectionSettings):
    """Evaluation protocol defaults."""

    cd_points: int = Field(default=10000, alias="EVAL_CD_POINTS")
    gen_points: int = Field(default=2000, alias="EVAL_GEN_POINTS")
    jsd_resolution: int = Field(default=28, alias="EVAL_JSD_RESOLUTION")
    distance_kinds: List[str] = Field(default=["chamfer"], alias="EVAL_DISTANCE_KINDS")
    generate_count: int = Field(default=2000, alias="EVAL_GENERATE_COUNT")
    mesh_resolution: int = Field(default=64, alias="EVAL_MESH_RESOLUTION")
    ref_split: str = Field(default="test", alias="EVAL_REF_SPLIT")

    @field_validator("distance_kinds", mode="before")
    @classmethod
    def parse_lists(cls, v: Any) -> Any:
        return _parse_list(v)

    @field_validator("distance_kinds")
    @classmethod
    def validate_kinds(cls, v: List[str]) -> List[str]:
        invalid = set(v) - {"chamfer", "one-minus-iou"}
        if invalid:
            raise ValueError(f"Unsupported distance kinds: {invalid}")
        return v

    @field_validator("mesh_resolution")
    @classmethod
    def validate_mesh_resolution(cls, v: int) -> int:
        if v not in (64, 128, 256):
            raise ValueError("mesh_resolution must be one of 64, 128, 256")
        return v


class AppSettings(BaseSettings):
    """Main application settings that combines all other settings."""

    model_config = SettingsConfigDict(
        env_file=None, env_file_encoding="utf-8", case_sensitive=False, extra="ignore"
    )

    app_name: str = Field(default="part-seq-shapes", alias="APP_NAME")
    app_version: str = Field(default="1.0.0", alias="APP_VERSION")

    directories: DirectorySettings = Field(default_factory=DirectorySettings)
    processing: ProcessingSettings = Field(default_factory=ProcessingSettings)
    data: DataSettings = Field(default_factory=DataSettings)
    partae: PartAESettings = Field(default_factory=PartAESettings)
    seq2seq: Seq2SeqSettings = Field(default_factory=Seq2SeqSettings)
    gan: GanSettings = Field(default_factory=GanSettings)
    svr: SvrSettings = Field(default_factory=SvrSettings)
    eval: EvalSettings = Field(default_factory=EvalSettings)

    def snapshot(self) -> Dict[str, Dict[str, Any]]:
        """Section-wise plain values, suitable for manifests and config dumps."""
        return {
            section: getattr(self, section).model_dump(mode="json")
            for section in SECTIONS
        }


SECTIONS = {
    "directories": DirectorySettings,
    "processing": ProcessingSettings,
    "data": DataSettings,
    "partae": PartAESettings,
    "seq2seq": Seq2SeqSettings,
    "gan": GanSettings,
    "svr": SvrSettings,
    "eval": EvalSettings,
}


class ConfigLoader:
    """Loads key=value run config files with [section] headers."""

    def __init__(self, config_path: Optional[Path] = None):
        self.config_path = Path(config_path) if config_path else None

    def load_sections(self) -> Dict[str, Dict[str, str]]:
        """Read the config file into {section: {key: raw value}}."""
        if self.config_path is None:
            return {}
        if not self.config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {self.config_path}")

        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(self.config_path, encoding="utf-8")
        except configparser.Error as e:
            raise ValueError(f"Invalid config in {self.config_path}: {e}")

        unknown = set(parser.sections()) - set(SECTIONS)
        if unknown:
            raise ValueError(f"Unknown config sections in {self.config_path}: {unknown}")
        return {section: dict(parser.items(section)) for section in parser.sections()}

    @staticmethod
    def dump(settings: AppSettings, path: Path) -> Path:
        """Write settings back out in the same key=value format."""
        parser = configparser.ConfigParser(interpolation=None)
        for section, values in settings.snapshot().items():
            parser[section] = {
                key: ",".join(str(v) for v in value) if isinstance(value, list) else str(value)
                for key, value in values.items()
                if value is not None
            }
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            parser.write(f)
        return path


def load_settings(
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Dict[str, Any]]] = None,
) -> AppSettings:
    """
    Build settings for one command.

    Precedence is flags (overrides) > config file > environment > defaults,
    except that PQNET_DATA_ROOT always wins for the data root.

    Args:
        config_path: Optional key=value config file with section headers
        overrides: {section: {field: value}} taken from command-line flags

    Returns:
        Fresh AppSettings instance (not the cached global one)
    """
    sections: Dict[str, Dict[str, Any]] = ConfigLoader(config_path).load_sections()
    for section, values in (overrides or {}).items():
        sections.setdefault(section, {}).update(
            {k: v for k, v in values.items() if v is not None}
        )

    if os.getenv(DATA_ROOT_ENV):
        sections.get("directories", {}).pop("data_root", None)

    kwargs = {
        section: SECTIONS[section](**values) for section, values in sections.items()
    }
    return AppSettings(**kwargs)


# Global settings instance
@lru_cache()
def get_settings() -> AppSettings:
    """Get cached application settings."""
    return AppSettings()


__all__ = [
    "AppSettings",
    "ConfigLoader",
    "get_settings",
    "load_settings",
    "SAMPLE_COUNTS",
    "SUPPORTED_CATEGORIES",
]
