"""Scaling-law toolkit for diffusion transformers.

Compute accounting, run ingestion, power-law and loss-surface fitting,
compute-optimal allocation and a mini-batch SGD oracle.
"""

from .allocation import (
    AllocationLaw,
    IsoFlopProfile,
    empirical_nopt,
    exponent_bracket,
    isoflop_profile,
    loss_along_constraint,
    parameter_saving,
    predicted_nopt,
    predicted_profile,
    profiles_from_observations,
    regime_exponent,
    slope_deviation,
    topt,
    topt_law,
)
from .compute import (
    ComputeConfig,
    ModelShape,
    compute_per_token,
    itemized_flops,
    layers_for_params,
    params_from_layers,
    tokens_for_compute,
    total_compute,
)
from .config import Settings, load_settings
from .planning import plan
from .powerlaw import (
    NoInteriorMinimumError,
    ParabolaFit,
    PowerLaw1,
    PowerLaw2,
    SingularFitError,
    fit_parabola_min,
    fit_powerlaw1,
    fit_powerlaw2,
)
from .presets import PRESETS, get_preset, get_surface
from .runs import (
    Observation,
    RunFileError,
    RunValidationError,
    TrainingRun,
    load_runs,
    save_runs,
    select_near_optimal,
    to_observations,
)
from .sgd import (
    QuadraticObjective,
    SgdConfig,
    convergence_bound,
    eta_opt_closed_form,
    make_quadratic,
    max_gain,
    run_sgd,
    stepwise_loss_delta,
    sweep_hyperparams,
    synth_runs,
)
from .surface import LossSurface, SurfaceFit, SurfaceFitError, eval_loss, fit_loss_surface, mse, reduction_percent
from .units import UnitConvention

__version__ = "0.1.0"
