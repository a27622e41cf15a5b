"""Why a batch-size and learning-rate optimum exists under a fixed sample budget.

On a noisy quadratic, larger batches cut gradient noise but leave fewer steps;
larger steps speed descent until noise and curvature push back. The exact
one-step expected loss change has a closed-form best step size.
"""

import numpy as np

from dit_scaling import eta_opt_closed_form, make_quadratic, max_gain, sweep_hyperparams

obj = make_quadratic(dim=16, noise_scale=1.0, theta0_scale=3.0, seed=1)
for B in (1, 4, 16, 64):
    step = eta_opt_closed_form(obj, obj.theta0, B)
    print(f"B={B:3d}  best one-step eta={step.opt:.4f}  expected loss change={max_gain(obj, obj.theta0, B):.4f}")

B_grid = [1, 2, 4, 8, 16, 32, 64, 128, 256]
eta_grid = np.geomspace(0.05, 1.6, 11)
res = sweep_hyperparams(obj, 4096, B_grid, eta_grid, seed=0, repeats=4)
B, eta, loss = res.best()
print(f"\nfinal loss after 4096 samples is lowest at B={B:g}, eta={eta:.3f} ({loss:.4g})")
print("loss by batch size at that eta:", " ".join(f"{v:.3g}" for v in res.final_loss[:, list(eta_grid).index(eta)]))
