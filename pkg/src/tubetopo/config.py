"""Run configuration: one YAML/JSON document plus flag overrides."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from tubetopo.errors import ConfigError
from tubetopo.forge.config import ForgeConfig
from tubetopo.forge.synth import SynthParams
from tubetopo.reward.grpo import GrpoConfig
from tubetopo.reward.scoring import RewardConfig

_SECTIONS = {"forge": ForgeConfig, "synth": SynthParams, "reward": RewardConfig, "grpo": GrpoConfig}
_SCALARS = {"seed": int, "workers": int, "source": str}


@dataclass(frozen=True)
class RunConfig:
    forge: ForgeConfig = field(default_factory=ForgeConfig)
    synth: SynthParams = field(default_factory=SynthParams)
    reward: RewardConfig = field(default_factory=RewardConfig)
    grpo: GrpoConfig = field(default_factory=GrpoConfig)
    seed: int = 0
    workers: int = 1
    source: str = "synthetic"

    def to_dict(self) -> dict:
        d = {name: getattr(self, name).to_dict() for name in _SECTIONS}
        d.update({name: getattr(self, name) for name in _SCALARS})
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        d = d or {}
        if not isinstance(d, dict):
            raise ConfigError("config document must be a mapping")
        unknown = set(d) - set(_SECTIONS) - set(_SCALARS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        try:
            for name, kind in _SECTIONS.items():
                if name in d:
                    section = d[name] or {}
                    if not isinstance(section, dict):
                        raise ConfigError(f"section {name!r} must be a mapping")
                    kwargs[name] = kind.from_dict(section)
            for name, kind in _SCALARS.items():
                if name in d:
                    v = d[name]
                    if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
                        raise ConfigError(f"{name!r} must be an integer")
                    if kind is str and not isinstance(v, str):
                        raise ConfigError(f"{name!r} must be a string")
                    kwargs[name] = v
            cfg = cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if cfg.workers < 1:
            raise ConfigError("workers must be >= 1")
        return cfg

    def override(self, pairs: list[str]) -> "RunConfig":
        """Apply ``section.key=value`` or ``key=value`` overrides (values parsed as YAML)."""
        d = self.to_dict()
        for pair in pairs:
            key, sep, raw = pair.partition("=")
            if not sep or not key:
                raise ConfigError(f"override {pair!r} is not key=value")
            try:
                value = yaml.safe_load(raw)
            except yaml.YAMLError:
                raise ConfigError(f"override {pair!r} has an unparseable value") from None
            target = d
            *parents, leaf = key.split(".")
            for p in parents:
                if not isinstance(target.get(p), dict):
                    raise ConfigError(f"unknown config section in {key!r}")
                target = target[p]
            if leaf not in target:
                raise ConfigError(f"unknown config key {key!r}")
            target[leaf] = value
        return RunConfig.from_dict(d)

    def with_scalars(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return RunConfig.from_dict({**self.to_dict(), **kw}) if kw else self


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return RunConfig.from_dict(doc)

