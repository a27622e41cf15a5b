"""Fit the loss surface L(T, N) = (T_c/T)^a_T + (N_c/N)^a_N + L_inf.

Sample a known surface with multiplicative noise, fit it from a multi-start grid
and compare the recovered constants with their expected standard errors.
"""

from dit_scaling import fit_loss_surface
from dit_scaling.presets import VIDEO_SURFACE
from dit_scaling.surface import relative_standard_errors, sample_surface

N_grid = [0.017, 0.057, 0.26, 1.07]  # billions of parameters
T_grid = [0.25, 1.0, 4.0, 16.0, 64.0, 256.0]  # billions of tokens
sigma = 0.002

T, N, loss = sample_surface(VIDEO_SURFACE, N_grid, T_grid, noise_sigma=sigma, seed=3)
fit = fit_loss_surface(T, N, loss)
rse = relative_standard_errors(VIDEO_SURFACE, T, N, sigma)

print(f"{'param':>8} {'true':>10} {'fit':>10} {'rel err':>8} {'rel SE':>8}")
for k, (name, true, got) in enumerate(zip(rse, VIDEO_SURFACE.params, fit.surface.params)):
    print(f"{name:>8} {true:10.4g} {got:10.4g} {got / true - 1:8.2%} {rse[name]:8.2%}")
print(f"fit MSE {fit.mse:.3e} from the best of {len(fit.trace)} starts")
print(f"L(T=10B, N=1.07B) on the reference surface: {VIDEO_SURFACE(10.0, 1.07):.4f}")
