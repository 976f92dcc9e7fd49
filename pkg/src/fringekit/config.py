"""Run configuration: defaults, flat ``section.key = value`` files, overrides.

Precedence is defaults < config file < CLI flags. Unknown keys are rejected
so typos fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from .detect import DetectorConfig
from .metrics import LossConfig
from .rings import RingCounterConfig
from .synth import DatasetConfig
from .track import TrackConfig


class ConfigError(ValueError):
    """Unknown key or unparseable value in a config source."""


@dataclass
class RunConfig:
    synth: DatasetConfig = field(default_factory=DatasetConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    rings: RingCounterConfig = field(default_factory=RingCounterConfig)
    eval: LossConfig = field(default_factory=LossConfig)
    track: TrackConfig = field(default_factory=TrackConfig)
    seed: int = 0
    bin: float = 0.7


_SECTIONS = ("synth", "detector", "rings", "eval", "track")
_TOP_LEVEL = ("seed", "bin")


def _coerce(current, raw: str):
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(raw)
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    # str | float unions (detector threshold, track gate)
    try:
        return float(raw)
    except ValueError:
        return raw


def known_keys() -> list[str]:
    keys = list(_TOP_LEVEL)
    cfg = RunConfig()
    for section in _SECTIONS:
        for f in fields(getattr(cfg, section)):
            keys.append(f"{section}.{f.name}")
    return keys


def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Return a new RunConfig with dotted-key overrides applied."""
    sections = {s: dict(dataclasses.asdict(getattr(cfg, s))) for s in _SECTIONS}
    top = {"seed": cfg.seed, "bin": cfg.bin}
    for key, raw in overrides.items():
        if key in _TOP_LEVEL:
            try:
                top[key] = _coerce(top[key], raw)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
            continue
        if "." not in key:
            raise ConfigError(f"unknown config key: {key!r}")
        section, _, name = key.partition(".")
        if section not in sections or name not in sections[section]:
            raise ConfigError(f"unknown config key: {key!r}")
        try:
            sections[section][name] = _coerce(sections[section][name], raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return RunConfig(
        synth=DatasetConfig(**sections["synth"]),
        detector=DetectorConfig(**sections["detector"]),
        rings=RingCounterConfig(**sections["rings"]),
        eval=LossConfig(**sections["eval"]),
        track=TrackConfig(**sections["track"]),
        seed=int(top["seed"]),
        bin=float(top["bin"]),
    )


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``section.key = value`` lines; '#' starts a comment."""
    overrides: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def load_config(path=None, cli_overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        from pathlib import Path

        cfg = apply_overrides(cfg, parse_config_text(Path(path).read_text(encoding="utf-8")))
    if cli_overrides:
        cfg = apply_overrides(cfg, cli_overrides)
    return cfg
