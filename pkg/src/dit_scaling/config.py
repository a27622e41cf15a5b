"""Workspace configuration and provenance.

The config file is JSON with the optional keys::

    {"width_ratio": 128, "n_ctx": 1280, "n_text": 120,
     "preset": "video" | "image",
     "units": {"token_unit": 1e9, "param_unit": 1e9, "batch_unit": "samples"}}

Missing keys take the preset's defaults. ``n_ctx`` defaults to the preset's
context length.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .compute import DEFAULT_N_TEXT, DEFAULT_WIDTH_RATIO, PRESET_N_CTX, ComputeConfig
from .units import UnitConvention

CONFIG_KEYS = ("width_ratio", "n_ctx", "n_text", "preset", "units")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Settings:
    compute: ComputeConfig = field(default_factory=ComputeConfig)
    units: UnitConvention = field(default_factory=UnitConvention)
    preset: str = "video"
    width_ratio: int = DEFAULT_WIDTH_RATIO

    def to_dict(self) -> dict:
        return {
            "width_ratio": self.width_ratio,
            "n_ctx": self.compute.n_ctx,
            "n_text": self.compute.n_text,
            "preset": self.preset,
            "units": self.units.to_dict(),
        }

    @property
    def hash(self) -> str:
        """Stable digest of the resolved settings."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def settings_from_dict(data: dict) -> Settings:
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    preset = data.get("preset", "video")
    if preset not in PRESET_N_CTX:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESET_N_CTX)}")
    try:
        width_ratio = int(data.get("width_ratio", DEFAULT_WIDTH_RATIO))
        if width_ratio < 1:
            raise ConfigError("width_ratio must be a positive integer")
        compute = ComputeConfig(
            n_ctx=int(data.get("n_ctx", PRESET_N_CTX[preset])),
            n_text=int(data.get("n_text", DEFAULT_N_TEXT)),
        )
        units = UnitConvention.from_dict(data.get("units"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    return Settings(compute, units, preset, width_ratio)


def load_settings(path=None) -> Settings:
    if path is None:
        return settings_from_dict({})
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return settings_from_dict(data)
