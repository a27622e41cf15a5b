"""Training plans for a compute budget: model size, tokens, batch size and learning rate."""

from __future__ import annotations

from .allocation import best_layer_count, predicted_profile
from .compute import ComputeConfig, ModelShape, compute_per_token
from .presets import Preset


def plan(C: float, preset: Preset, cfg: ComputeConfig | None = None, width_ratio: int = 128) -> dict:
    """Plan a run at budget ``C`` from a preset's laws.

    The optimal size comes from the preset's empirical allocation law (or, when
    it has none, from minimising its loss surface under the budget). Of the two
    layer counts bracketing that size, the one with lower predicted loss is
    trained; tokens fill the budget and the hyperparameter laws are evaluated
    at the resulting ``(T, N)``.
    """
    if not C > 0:
        raise ValueError("compute budget must be positive")
    cfg = cfg or ComputeConfig(n_ctx=preset.n_ctx)
    surface = preset.surface
    if preset.nopt_empirical is not None:
        n_opt = float(preset.nopt_empirical(C))
        source = "empirical allocation law"
    else:
        n_opt = predicted_profile(surface, C, cfg, width_ratio=width_ratio).N_opt_empirical
        source = "loss surface under the compute constraint"

    n_layer = best_layer_count(surface, C, cfg, n_opt, width_ratio)
    shape = ModelShape(n_layer, width_ratio)
    N = shape.n_params
    T = C / compute_per_token(shape, cfg)

    out = {
        "C": C,
        "preset": preset.name,
        "n_ctx": cfg.n_ctx,
        "N_opt": n_opt,
        "N_opt_source": source,
        "n_layer": n_layer,
        "d": shape.d,
        "N": N,
        "T": T,
    }
    if preset.batch is not None:
        law = preset.batch
        b = float(law(T / law.units.token_unit, N / law.units.param_unit))
        if law.units.batch_unit == "tokens":
            out["batch_tokens"] = b
            out["batch_samples"] = b / cfg.tokens_per_sample
        else:
            out["batch_samples"] = b
            out["batch_tokens"] = b * cfg.tokens_per_sample
    elif preset.fixed_batch_samples is not None:
        out["batch_samples"] = float(preset.fixed_batch_samples)
        out["batch_tokens"] = float(preset.fixed_batch_samples * cfg.tokens_per_sample)
    if preset.lr is not None:
        out["lr"] = float(preset.lr(T / preset.lr.units.token_unit, N / preset.lr.units.param_unit))
    elif preset.fixed_lr is not None:
        out["lr"] = preset.fixed_lr
    out["predicted_loss"] = float(surface(T / surface.units.token_unit, N / surface.units.param_unit))
    return out
