"""Recover batch-size and learning-rate laws from a synthetic grid of runs.

Runs are generated from known laws with a little noise; for each model size and
token count, the runs within a small tolerance of the best loss are kept and a
two-variable power law is fitted to their hyperparameters.
"""

from dit_scaling import fit_powerlaw2, select_near_optimal, synth_runs
from dit_scaling.presets import VIDEO_BATCH_SAMPLES, VIDEO_LR, VIDEO_SURFACE
from dit_scaling.runs import to_units
from dit_scaling.units import BILLIONS

obs = synth_runs(VIDEO_BATCH_SAMPLES, VIDEO_LR, VIDEO_SURFACE, n_layers=[4, 6, 8, 10],
                 tokens=[2e9, 4e9, 6e9, 8e9, 10e9, 12e9], noise_sigma=2e-4, seed=0)
kept = [to_units(o, BILLIONS) for o in select_near_optimal(obs, rel_tol=2e-4)]
print(f"{len(obs)} runs, {len(kept)} within 0.02% of their group's best loss")

T, N = [o.T for o in kept], [o.N for o in kept]
for name, truth, values in (("batch", VIDEO_BATCH_SAMPLES, [o.B for o in kept]),
                            ("lr", VIDEO_LR, [o.eta for o in kept])):
    law = fit_powerlaw2(T, N, values)
    se = law.diagnostics.stderr
    print(f"{name:5s} true T^{truth.beta:+.4f} N^{truth.gamma:+.4f}   "
          f"fit T^{law.beta:+.4f}({se['beta']:.4f}) N^{law.gamma:+.4f}({se['gamma']:.4f})")
