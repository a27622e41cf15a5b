"""Unit conventions for fitted constants.

Fitted exponents do not depend on the scale in which tokens and parameters
are counted, but every multiplier does. Laws therefore carry the convention
they were fitted under.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

BatchUnit = Literal["samples", "tokens"]


@dataclass(frozen=True)
class UnitConvention:
    token_unit: float = 1e9
    param_unit: float = 1e9
    batch_unit: BatchUnit = "samples"

    def __post_init__(self):
        if not (self.token_unit > 0 and self.param_unit > 0):
            raise ValueError("unit scale factors must be strictly positive")
        if self.batch_unit not in ("samples", "tokens"):
            raise ValueError(f"batch_unit must be 'samples' or 'tokens', got {self.batch_unit!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "UnitConvention":
        return cls(**(data or {}))


BILLIONS = UnitConvention()
RAW = UnitConvention(1.0, 1.0, "samples")
