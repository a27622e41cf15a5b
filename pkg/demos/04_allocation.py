"""Where should compute go? Optimal model size as a function of budget.

Under C = C_token(N) * T the loss surface has a best model size at each budget.
Scanning layer counts gives an IsoFLOP profile whose parabola vertex traces
N_opt(C); across budgets that is a power law whose exponent sits between the
short- and long-context limits.
"""

from dit_scaling import ComputeConfig, exponent_bracket, plan, predicted_nopt, predicted_profile
from dit_scaling.presets import VIDEO_NOPT_EMPIRICAL, get_preset, get_surface

surface = get_surface("video-optimal")
cfg = ComputeConfig(n_ctx=1280)

for C in (1e19, 1e20, 1e21, 1e22):
    prof = predicted_profile(surface, C, cfg)
    print(f"C={C:.0e}  N_opt={prof.N_opt_empirical / 1e9:6.3f}B  min loss {prof.fit.y_min:.4f}")

law = predicted_nopt(surface, cfg=cfg)
lo, hi = exponent_bracket(surface)
print(f"predicted N_opt ~ C^{law.exponent:.4f}; fitted from runs ~ C^{VIDEO_NOPT_EMPIRICAL.exponent:.4f}")
print(f"context-length limits of the exponent: {lo:.4f} (short) to {hi:.4f} (long)")

p = plan(5.85e20, get_preset("video"))
print(f"\nplan at 5.85e20 FLOPs: {p['n_layer']} layers, {p['N'] / 1e6:.1f}M params, "
      f"{p['T'] / 1e9:.1f}B tokens, batch {p['batch_samples']:.0f}, lr {p['lr']:.3e}")
