"""Run configuration stored as flat ``key = value`` text.

Blank lines and ``#`` comments are ignored. List values are comma
separated; relative paths resolve against the config file's directory.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .audio_io import DEFAULT_SAMPLE_RATE
from .dataset import feature_names
from .errors import ConfigError
from .nn import NetConfig
from .spectrogram import SpectrogramConfig
from .training import TrainingConfig

_PATH_KEYS = ("catalog_path", "tracks_csv", "audio_dir", "feature_cache", "output_dir")


@dataclass
class RunConfig:
    catalog_path: Optional[str] = None
    tracks_csv: Optional[str] = None
    audio_dir: Optional[str] = None
    feature_cache: Optional[str] = None  # defaults to <output_dir>/features
    output_dir: str = "runs/default"

    sample_rate: int = DEFAULT_SAMPLE_RATE
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    input_frames: int = 256
    f_min: float = 0.0
    f_max: Optional[float] = None
    floor_db: float = -80.0

    conv_filters: tuple = (16, 32, 64, 128)
    meta_hidden: tuple = (32, 32)
    head_hidden: tuple = (128, 64)
    use_artist_features: bool = True

    batch_size: int = 32
    max_epochs: int = 25
    learning_rate: float = 0.001
    patience: int = 7
    min_delta: float = 0.0
    train_fraction: float = 0.8
    val_fraction: float = 0.0  # > 0 carves a validation side out of train

    threshold: float = 70.0
    histogram_bins: int = 20
    seed: int = 0
    workers: int = 1

    def spectrogram_config(self) -> SpectrogramConfig:
        return SpectrogramConfig(self.n_fft, self.hop, self.n_mels, self.f_min, self.f_max, self.floor_db)

    def feature_names(self) -> tuple:
        return feature_names(self.use_artist_features)

    def net_config(self) -> NetConfig:
        return NetConfig(
            meta_dim=len(self.feature_names()),
            input_mels=self.n_mels,
            input_frames=self.input_frames,
            conv_filters=self.conv_filters,
            meta_hidden=self.meta_hidden,
            head_hidden=self.head_hidden,
        )

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(self.batch_size, self.max_epochs, self.learning_rate,
                              self.patience, self.min_delta, self.seed)

    @property
    def clip_samples(self) -> int:
        return self.spectrogram_config().samples_for_frames(self.input_frames)

    @property
    def cache_dir(self) -> Path:
        return Path(self.feature_cache) if self.feature_cache else Path(self.output_dir) / "features"

    def validate(self, need=()) -> "RunConfig":
        """Build every sub-config (raising on bad values) and check that the
        input paths named in ``need`` exist."""
        try:
            self.spectrogram_config().upper_hz(self.sample_rate)
            self.net_config()
            self.training_config()
        except Exception as e:
            raise ConfigError(str(e)) from e
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError(f"val_fraction must be in [0, 1), got {self.val_fraction}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        for key in need:
            value = getattr(self, key)
            if value is None:
                raise ConfigError(f"config key {key!r} is required for this command")
            if not Path(value).exists():
                raise ConfigError(f"config key {key!r}: path does not exist: {value}")
        return self

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_DEFAULTS = RunConfig()


def _parse_value(key: str, raw: str):
    default = getattr(_DEFAULTS, key)
    raw = raw.strip()
    if key in _PATH_KEYS:
        return raw or None
    if key == "f_max":
        return None if raw.lower() in ("", "none", "nyquist") else float(raw)
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, tuple):
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config(text: str, base_dir=None) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {e}") from None
    if base_dir is not None:
        for key in _PATH_KEYS:
            if values.get(key) is not None:
                values[key] = str((Path(base_dir) / values[key]).resolve())
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), base_dir=path.parent)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Every effective parameter, one per line; paths are written absolute
    so the echo reloads from any directory."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if f.name in _PATH_KEYS and value is not None:
            value = str(Path(value).resolve())
        lines.append(f"{f.name} = {_format_value(value)}")
    return "\n".join(lines) + "\n"
