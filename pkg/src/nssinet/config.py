"""Run configuration: one JSON document with one section per component.

Every key has a default; unknown keys and ill-typed values raise
``ConfigError`` with the dotted key path. A run manifest is also accepted as
a config, which is how runs are replayed.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .adversarial import LossWeights, TrainConfig
from .evaluation.cv import CVSettings
from .evaluation.sweeps import TAU_GRID, VARIANT_NAMES, WEIGHT_RATIOS
from .synthgen import SynthSpec

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CohortSection:
    path: str | None = None
    balance: bool = False
    quota_female: int = 18
    quota_male: int = 12
    sampling_seed: int = 0


@dataclass(frozen=True)
class TrainRunSection:
    fold: int = 0


@dataclass(frozen=True)
class AblateSection:
    variants: list[str] | None = None


@dataclass(frozen=True)
class RatioSection:
    taus: list[float] = field(default_factory=lambda: list(TAU_GRID))


@dataclass(frozen=True)
class WeightSection:
    ratios: list[list[float]] = field(default_factory=lambda: [list(r) for r in WEIGHT_RATIOS])


@dataclass(frozen=True)
class SamplingSection:
    rounds: int = 5
    seeds: list[int] | None = None


@dataclass(frozen=True)
class ChannelsSection:
    epochs: int = 20
    channels: list[int] | None = None
    contrast: float = 0.05


SECTIONS = {
    "synth": SynthSpec, "cohort": CohortSection, "train": TrainConfig, "weights": LossWeights,
    "cv": CVSettings, "train_run": TrainRunSection, "ablate": AblateSection,
    "sweep_ratio": RatioSection, "sweep_weights": WeightSection, "sampling": SamplingSection,
    "channels": ChannelsSection,
}
TOP_LEVEL = {"seed"}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    synth: SynthSpec = SynthSpec()
    cohort: CohortSection = CohortSection()
    train: TrainConfig = TrainConfig()
    weights: LossWeights = LossWeights()
    cv: CVSettings = CVSettings()
    train_run: TrainRunSection = TrainRunSection()
    ablate: AblateSection = AblateSection()
    sweep_ratio: RatioSection = RatioSection()
    sweep_weights: WeightSection = WeightSection()
    sampling: SamplingSection = SamplingSection()
    channels: ChannelsSection = ChannelsSection()

    def to_dict(self) -> dict:
        out = {"seed": self.seed}
        for name in SECTIONS:
            out[name] = _plain(dataclasses.asdict(getattr(self, name)))
        return out


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, enum.Enum):
        return v.value
    return v


def _check_type(path: str, value, hint) -> None:
    """Shallow type check against a dataclass annotation."""
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if hint is typing.Any:
        return
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return
        for a in args:
            if a is type(None):
                continue
            try:
                _check_type(path, value, a)
                return
            except ConfigError:
                pass
        raise ConfigError(f"{path}: value {value!r} has the wrong type")
    if origin in (list, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        inner = args[0] if args else typing.Any
        for i, v in enumerate(value):
            _check_type(f"{path}[{i}]", v, inner)
        return
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
    elif hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    elif hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
    elif hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
    elif dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object, got {value!r}")


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path}: {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        hint = hints[k]
        if cls is SynthSpec and k == "gender_affected":
            hint = str
        if dataclasses.is_dataclass(hint) and isinstance(v, dict):
            kwargs[k] = _build(hint, v, f"{path}.{k}")
            continue
        _check_type(f"{path}.{k}", v, hint)
        kwargs[k] = v
    try:
        obj = cls(**kwargs)
        if hasattr(obj, "validate"):
            obj.validate()
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path}: {e}") from e
    return obj


def parse_config(data: dict, seed: int | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "command" in data and "config" in data:
        # a run manifest: replay its resolved config
        data = data["config"]
    unknown = sorted(set(data) - set(SECTIONS) - TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs = {name: _build(cls, data.get(name, {}), name) for name, cls in SECTIONS.items()}
    s = data.get("seed", 0) if seed is None else seed
    _check_type("seed", s, int)
    if s < 0:
        raise ConfigError("seed must be non-negative")
    cfg = RunConfig(seed=s, **kwargs)
    if cfg.ablate.variants is not None:
        bad = [v for v in cfg.ablate.variants if v not in VARIANT_NAMES]
        if bad:
            raise ConfigError(f"ablate.variants: unknown variant(s) {bad}")
    return cfg


def load_config(path: str | Path | None, seed: int | None = None) -> RunConfig:
    if path is None:
        return parse_config({}, seed)
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {p} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON ({e})") from None
    return parse_config(data, seed)


