"""Parameter and FLOP accounting for cross-attention diffusion transformers.

Models scale depth and width together: ``d = width_ratio * n_layer`` and the
number of attention heads equals the number of layers. With a SwiGLU feed-forward
block (``d_ff = 8d/3``) every layer carries ``16 d^2`` non-embedding parameters,
and one training token costs ``(3/4) N (7 + n_ctx / d)`` FLOPs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

DEFAULT_WIDTH_RATIO = 128
DEFAULT_N_CTX = 1280
DEFAULT_N_TEXT = 120

# 17 frames at 256x256: 5 latent frames of 16x16 patches for video, one for images.
PRESET_N_CTX = {"video": 1280, "image": 256}


def params_from_layers(n_layer: int, width_ratio: int = DEFAULT_WIDTH_RATIO) -> int:
    """Non-embedding parameter count ``16 * n_layer * d**2`` with ``d = width_ratio * n_layer``."""
    if int(n_layer) != n_layer or n_layer < 1:
        raise ValueError(f"n_layer must be a positive integer, got {n_layer!r}")
    if int(width_ratio) != width_ratio or width_ratio < 1:
        raise ValueError(f"width_ratio must be a positive integer, got {width_ratio!r}")
    n_layer = int(n_layer)
    d = int(width_ratio) * n_layer
    return 16 * n_layer * d * d


def layers_for_params(
    n_target: float,
    width_ratio: int = DEFAULT_WIDTH_RATIO,
    rounding: Literal["nearest", "up", "down"] = "nearest",
) -> int:
    """Layer count whose parameter count best matches ``n_target``.

    ``"nearest"`` minimises ``|log N(n) - log n_target|`` with ties going to the
    smaller model (distances within 1e-12 count as equal); ``"up"`` returns the smallest model with at least
    ``n_target`` parameters and ``"down"`` the largest with at most that many
    (never fewer than one layer).
    """
    if not n_target > 0:
        raise ValueError(f"n_target must be positive, got {n_target!r}")
    base = params_from_layers(1, width_ratio)
    n_cont = (n_target / base) ** (1.0 / 3.0)
    lo = max(1, int(math.floor(n_cont)))
    # cube root rounding can land one off the true floor
    while lo > 1 and params_from_layers(lo, width_ratio) > n_target:
        lo -= 1
    while params_from_layers(lo + 1, width_ratio) <= n_target:
        lo += 1
    hi = lo + 1 if params_from_layers(lo, width_ratio) < n_target else lo

    if rounding == "down":
        return lo
    if rounding == "up":
        return hi
    if rounding != "nearest":
        raise ValueError(f"unknown rounding mode {rounding!r}")
    d_lo = abs(math.log(params_from_layers(lo, width_ratio)) - math.log(n_target))
    d_hi = abs(math.log(params_from_layers(hi, width_ratio)) - math.log(n_target))
    # distances equal to rounding error count as a tie
    return hi if d_hi < d_lo - 1e-12 else lo


@dataclass(frozen=True)
class ModelShape:
    """Proportionally scaled transformer: width and head count follow the depth."""

    n_layer: int
    width_ratio: int = DEFAULT_WIDTH_RATIO

    def __post_init__(self):
        # validates both fields
        params_from_layers(self.n_layer, self.width_ratio)

    @classmethod
    def from_params(cls, n_target: float, width_ratio: int = DEFAULT_WIDTH_RATIO, rounding="nearest"):
        return cls(layers_for_params(n_target, width_ratio, rounding), width_ratio)

    @property
    def d(self) -> int:
        return self.width_ratio * self.n_layer

    @property
    def n_head(self) -> int:
        return self.n_layer

    @property
    def n_params(self) -> int:
        return params_from_layers(self.n_layer, self.width_ratio)


@dataclass(frozen=True)
class ComputeConfig:
    """Sequence geometry entering the FLOP count.

    ``n_ctx`` is the number of latent tokens per sample (``f * h * w`` after
    the VAE and patchifier); ``n_text`` only enters the itemized table.
    """

    n_ctx: int = DEFAULT_N_CTX
    n_text: int = DEFAULT_N_TEXT

    def __post_init__(self):
        if not self.n_ctx >= 1:
            raise ValueError("n_ctx must be at least 1")
        if self.n_text < 0:
            raise ValueError("n_text must be non-negative")

    @classmethod
    def preset(cls, name: str, **overrides) -> "ComputeConfig":
        if name not in PRESET_N_CTX:
            raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESET_N_CTX)}")
        kwargs = {"n_ctx": PRESET_N_CTX[name]}
        kwargs.update(overrides)
        return cls(**kwargs)

    @property
    def tokens_per_sample(self) -> int:
        return self.n_ctx


def compute_per_token(shape: ModelShape, cfg: ComputeConfig) -> float:
    """Training FLOPs per token, ``(3/4) N (7 + n_ctx / d)``."""
    return 0.75 * shape.n_params * (7.0 + cfg.n_ctx / shape.d)


def total_compute(shape: ModelShape, cfg: ComputeConfig, tokens: float) -> float:
    if not tokens > 0:
        raise ValueError(f"token count must be positive, got {tokens!r}")
    return compute_per_token(shape, cfg) * tokens


def tokens_for_compute(shape: ModelShape, cfg: ComputeConfig, budget: float) -> float:
    """Token budget ``T = C / C_token`` that spends ``budget`` FLOPs on ``shape``."""
    if not budget > 0:
        raise ValueError(f"compute budget must be positive, got {budget!r}")
    return budget / compute_per_token(shape, cfg)


def itemized_flops(shape: ModelShape, cfg: ComputeConfig) -> list[tuple[str, int, float]]:
    """Per-operation ``(name, params, forward FLOPs per token)`` rows.

    The cross-attention KV row is amortised per context token
    (``n_text / n_ctx``) exactly as tabulated. Three times the forward sum equals
    :func:`compute_per_token` only when ``n_text == 0``; the closed form leaves
    the text-conditioning terms out.
    """
    L, d = shape.n_layer, shape.d
    n_ctx, n_text = cfg.n_ctx, cfg.n_text
    kv_ratio = n_text / n_ctx if n_ctx else 0.0
    return [
        ("Self-Attention:QKV", 3 * L * d * d, 2.0 * L * 3 * d * d),
        ("Self-Attention:No Mask", 0, 4.0 * L * n_ctx * d),
        ("Self-Attention:Project", L * d * d, 2.0 * L * d * d),
        ("Cross-Attention:Q", L * d * d, 2.0 * L * d * d),
        ("Cross-Attention:KV", 2 * L * d * d, 2.0 * L * 2 * kv_ratio * d * d),
        ("Cross-Attention:No Mask", 0, 4.0 * L * n_text * d),
        ("Cross-Attention:Project", L * d * d, 2.0 * L * d * d),
        ("FeedForward(SwiGLU)", 8 * L * d * d, 16.0 * L * d * d),
    ]


def training_flops_from_table(shape: ModelShape, cfg: ComputeConfig) -> float:
    """Three forward passes' worth of the itemized FLOPs (forward + backward)."""
    return 3.0 * sum(row[2] for row in itemized_flops(shape, cfg))
