"""Run configuration: a strict YAML file mirroring the training hyperparameters
plus paths and endpoint settings. Unknown keys are rejected, and every command
writes its resolved configuration next to its outputs.
"""

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .fingerprint import sha256_hex
from .trainer import TrainConfig


@dataclass
class DataConfig:
    interactions: str = ""
    metadata: str = ""
    output_dir: str = "runs/default"
    cache_dir: str = ""  # defaults to <output_dir>/cache
    kcore: int = 5
    split_ratios: tuple = (0.8, 0.1, 0.1)
    raw_visual_features: str = ""  # table used by the raw_visual ablation arm


@dataclass
class EndpointConfig:
    url: str = ""
    model: str = "Qwen-2.5-VL-7B"
    temperature: float = 0.0
    timeout: float = 60.0
    concurrency: int = 4
    max_attempts: int = 3
    backoff_start: float = 1.0


@dataclass
class EncoderConfig:
    kind: str = "hashing"  # "hashing" (offline default) or "sbert"
    dim: int = 384
    seed: int = 0
    model_name: str = "all-MiniLM-L6-v2"


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    cot_marker: str = ""  # marker splitting chain-of-thought echo from the answer

    @property
    def output_dir(self) -> Path:
        return Path(self.data.output_dir)

    @property
    def cache_dir(self) -> Path:
        return Path(self.data.cache_dir) if self.data.cache_dir else self.output_dir / "cache"

    def to_dict(self) -> dict:
        def plain(obj):
            if dataclasses.is_dataclass(obj):
                return {f.name: plain(getattr(obj, f.name)) for f in fields(obj)}
            if isinstance(obj, tuple):
                return list(obj)
            return obj

        return plain(self)

    def fingerprint(self) -> str:
        return sha256_hex(self.to_dict())

    def write_resolved(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True)


_TUPLE_KEYS = {"split_ratios", "eval_ks"}


def _build_section(cls, mapping: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(mapping) - set(known)
    if unknown:
        raise ConfigError(
            f"unknown config key(s) in [{section}]: {', '.join(sorted(unknown))}"
        )
    kwargs = {}
    for key, value in mapping.items():
        if key in _TUPLE_KEYS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"bad [{section}] section: {e}") from e


_SECTIONS = {
    "data": DataConfig,
    "endpoint": EndpointConfig,
    "encoder": EncoderConfig,
    "train": TrainConfig,
}


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw or {})
    cot_marker = raw.pop("cot_marker", "")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {', '.join(sorted(unknown))}")
    sections = {
        name: _build_section(cls, raw.get(name, {}) or {}, name)
        for name, cls in _SECTIONS.items()
    }
    config = RunConfig(cot_marker=cot_marker or "", **sections)
    config.train.validate()
    return config


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML: {e}") from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    return config_from_dict(raw)
