"""Compute-optimal model size.

Two routes to ``N_opt(C)``:

* empirical: fit a parabola in ``log10 N`` to each IsoFLOP profile of measured
  losses and power-law fit the vertices against the budget;
* predicted: substitute ``T = C / C_token(N)`` into a fitted loss surface, scan
  the discrete layer counts, interpolate the minimum with a local parabola and
  fit the same power law.

Comparing the two exponents tells how well the surface extrapolates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .compute import (
    DEFAULT_WIDTH_RATIO,
    ComputeConfig,
    ModelShape,
    compute_per_token,
    layers_for_params,
    params_from_layers,
)
from .powerlaw import NoInteriorMinimumError, ParabolaFit, PowerLaw1, fit_parabola_min, fit_powerlaw1
from .runs import Observation
from .surface import LossSurface

DEFAULT_BUDGETS = (3e17, 6e17, 1e18, 3e18, 6e18)
EXTRAPOLATION_BUDGETS = {"validation": 5.85e20, "1e10-tflops": 1e22}
DEFAULT_LAYER_RANGE = range(1, 65)
DEFAULT_WINDOW = 2


@dataclass(frozen=True)
class IsoFlopProfile:
    budget_C: float
    N: np.ndarray = field(repr=False)
    loss: np.ndarray = field(repr=False)
    fit: ParabolaFit

    @property
    def N_opt_empirical(self) -> float:
        return float(10.0**self.fit.x_min)

    def to_dict(self) -> dict:
        return {
            "budget_C": self.budget_C,
            "N_opt": self.N_opt_empirical,
            "loss_min": self.fit.y_min,
            "parabola": self.fit.to_dict(),
            "points": [[float(n), float(l)] for n, l in zip(self.N, self.loss)],
        }


def isoflop_profile(budget_C: float, N, loss, C=None, rel_tol: float = 0.01) -> IsoFlopProfile:
    """Parabola fit of ``loss`` against ``log10 N`` at one budget.

    If the per-point compute ``C`` is given, every point must lie within
    ``rel_tol`` of ``budget_C``.
    """
    N = np.asarray(N, dtype=float)
    loss = np.asarray(loss, dtype=float)
    if C is not None:
        dev = np.abs(np.asarray(C, dtype=float) / budget_C - 1.0)
        if np.any(dev > rel_tol):
            raise ValueError(f"budget {budget_C:.4g}: points deviate up to {dev.max():.2%} from the budget")
    try:
        fit = fit_parabola_min(np.log10(N), loss)
    except NoInteriorMinimumError as exc:
        raise NoInteriorMinimumError(f"budget {budget_C:.4g}: {exc}") from None
    return IsoFlopProfile(float(budget_C), N, loss, fit)


def profiles_from_observations(
    observations: Iterable[Observation], budgets: Sequence[float] | None = None, rel_tol: float = 0.01
) -> list[IsoFlopProfile]:
    """Group raw observations into IsoFLOP profiles.

    Observations are assigned to the listed budget within ``rel_tol``; without
    ``budgets`` they are clustered by compute. At each model size only the
    lowest loss is kept.
    """
    obs = sorted(observations, key=lambda o: o.C)
    groups: list[tuple[float, list[Observation]]] = []
    if budgets is None:
        for o in obs:
            if groups and o.C <= groups[-1][1][0].C * (1.0 + 2.0 * rel_tol):
                groups[-1][1].append(o)
            else:
                groups.append((o.C, [o]))
        groups = [(float(np.median([o.C for o in g])), g) for _, g in groups]
    else:
        for b in budgets:
            members = [o for o in obs if abs(o.C / b - 1.0) <= rel_tol]
            if members:
                groups.append((float(b), members))
    profiles = []
    for budget, members in groups:
        best: dict[float, Observation] = {}
        for o in members:
            if o.N not in best or o.loss < best[o.N].loss:
                best[o.N] = o
        pts = sorted(best.values(), key=lambda o: o.N)
        profiles.append(isoflop_profile(budget, [o.N for o in pts], [o.loss for o in pts], [o.C for o in pts], rel_tol))
    return profiles


def empirical_nopt(profiles: Sequence[IsoFlopProfile]) -> PowerLaw1:
    """Power law through the ``(budget, N_opt)`` vertices."""
    if len(profiles) < 2:
        raise ValueError("need at least two IsoFLOP profiles")
    return fit_powerlaw1([p.budget_C for p in profiles], [p.N_opt_empirical for p in profiles])


# ---------------------------------------------------------------- constrained surface


def _constrained_loss(surface: LossSurface, N_raw, T_raw, verbatim: bool):
    N = N_raw / surface.units.param_unit
    T = T_raw / surface.units.token_unit
    ratio = surface.T_c / T
    data = ratio if verbatim else np.power(ratio, surface.alpha_T)
    return data + surface.model_term(N) + surface.L_inf


def loss_along_constraint(
    surface: LossSurface,
    C: float,
    cfg: ComputeConfig,
    n_layer: int,
    width_ratio: int = DEFAULT_WIDTH_RATIO,
    verbatim: bool = False,
) -> tuple[float, float, float]:
    """``(N, T, loss)`` for an ``n_layer`` model trained on exactly ``C`` FLOPs.

    ``N`` and ``T`` are raw counts; the surface is evaluated in its own units.
    ``verbatim=True`` drops the exponent on the data term.
    """
    if not C > 0:
        raise ValueError("compute budget must be positive")
    shape = ModelShape(n_layer, width_ratio)
    N = float(shape.n_params)
    T = C / compute_per_token(shape, cfg)
    return N, T, float(_constrained_loss(surface, N, T, verbatim))


def scan_constraint(
    surface: LossSurface,
    C: float,
    cfg: ComputeConfig,
    layers: Iterable[int] = DEFAULT_LAYER_RANGE,
    width_ratio: int = DEFAULT_WIDTH_RATIO,
    verbatim: bool = False,
):
    """Vectorised :func:`loss_along_constraint` over ``layers``; returns ``(layers, N, T, loss)``."""
    if not C > 0:
        raise ValueError("compute budget must be positive")
    n = np.asarray(list(layers), dtype=int)
    N = np.array([params_from_layers(k, width_ratio) for k in n], dtype=float)
    d = (width_ratio * n).astype(float)
    T = C / (0.75 * N * (7.0 + cfg.n_ctx / d))
    return n, N, T, _constrained_loss(surface, N, T, verbatim)


def predicted_profile(
    surface: LossSurface,
    C: float,
    cfg: ComputeConfig,
    layers: Iterable[int] = DEFAULT_LAYER_RANGE,
    width_ratio: int = DEFAULT_WIDTH_RATIO,
    window: int = DEFAULT_WINDOW,
    verbatim: bool = False,
) -> IsoFlopProfile:
    """Predicted IsoFLOP profile at budget ``C``.

    The parabola runs through the discrete minimum and ``window`` neighbours on
    each side; a minimum at either end of the scan has no interior vertex.
    """
    n, N, T, loss = scan_constraint(surface, C, cfg, layers, width_ratio, verbatim)
    i = int(np.argmin(loss))
    if i == 0 or i == len(n) - 1:
        raise NoInteriorMinimumError(
            f"budget {C:.4g}: constrained loss is minimised at the edge of the layer scan (n_layer={n[i]})"
        )
    lo, hi = max(0, i - window), min(len(n), i + window + 1)
    return isoflop_profile(C, N[lo:hi], loss[lo:hi])


def predicted_profiles(surface, budgets, cfg, **kwargs) -> list[IsoFlopProfile]:
    return [predicted_profile(surface, C, cfg, **kwargs) for C in budgets]


def predicted_nopt(
    surface: LossSurface, budgets: Sequence[float] = DEFAULT_BUDGETS, cfg: ComputeConfig | None = None, **kwargs
) -> PowerLaw1:
    """Predicted ``N_opt = k * C**e`` from minimising the surface under ``C = C_token * T``."""
    if len(budgets) < 2:
        raise ValueError("need at least two budgets")
    return empirical_nopt(predicted_profiles(surface, budgets, cfg or ComputeConfig(), **kwargs))


def regime_exponent(surface: LossSurface, ctx_power: float) -> float:
    """Limit of the predicted exponent when ``C_token`` scales as ``N**ctx_power``.

    ``ctx_power = 1`` when the ``7`` term dominates (short context) and ``2/3``
    when ``n_ctx / d`` dominates, since ``d`` grows as ``N**(1/3)``.
    """
    return surface.alpha_T / (ctx_power * surface.alpha_T + surface.alpha_N)


def exponent_bracket(surface: LossSurface) -> tuple[float, float]:
    """Range the predicted exponent can occupy for any context length."""
    return regime_exponent(surface, 1.0), regime_exponent(surface, 2.0 / 3.0)


# ---------------------------------------------------------------- tokens and comparisons


def topt(C: float, cfg: ComputeConfig, shape: ModelShape) -> float:
    """Tokens that spend budget ``C`` on ``shape``."""
    if not C > 0:
        raise ValueError("compute budget must be positive")
    return C / compute_per_token(shape, cfg)


def topt_law(nopt: PowerLaw1, cfg: ComputeConfig, shape: ModelShape) -> PowerLaw1:
    """``T_opt(C)`` implied by ``nopt`` with ``C_token / N`` frozen at ``shape``'s value."""
    per_param = 0.75 * (7.0 + cfg.n_ctx / shape.d)
    return PowerLaw1(1.0 / (per_param * nopt.coef), 1.0 - nopt.exponent)


def slope_deviation(empirical: PowerLaw1, predicted: PowerLaw1) -> tuple[float, float]:
    """Absolute and relative gap between the budget exponents."""
    if empirical.exponent == 0:
        raise ValueError("empirical exponent is zero")
    abs_err = abs(empirical.exponent - predicted.exponent)
    return abs_err, abs_err / abs(empirical.exponent)


def parameter_saving(smaller: PowerLaw1, larger: PowerLaw1, C: float) -> float:
    """Fraction of parameters saved by following ``smaller`` instead of ``larger`` at budget ``C``."""
    return 1.0 - float(smaller(C)) / float(larger(C))


@dataclass(frozen=True)
class AllocationLaw:
    empirical: PowerLaw1
    predicted: PowerLaw1
    slope_abs_err: float
    slope_rel_err: float

    @classmethod
    def compare(cls, empirical: PowerLaw1, predicted: PowerLaw1) -> "AllocationLaw":
        return cls(empirical, predicted, *slope_deviation(empirical, predicted))

    def to_dict(self) -> dict:
        return {
            "empirical": self.empirical.to_dict(),
            "predicted": self.predicted.to_dict(),
            "slope_abs_err": self.slope_abs_err,
            "slope_rel_err": self.slope_rel_err,
        }


def best_layer_count(
    surface: LossSurface, C: float, cfg: ComputeConfig, n_target: float, width_ratio: int = DEFAULT_WIDTH_RATIO
) -> int:
    """Of the two layer counts bracketing ``n_target``, the one with lower loss at budget ``C``."""
    lo = layers_for_params(n_target, width_ratio, "down")
    hi = layers_for_params(n_target, width_ratio, "up")
    if lo == hi:
        return lo
    l_lo = loss_along_constraint(surface, C, cfg, lo, width_ratio)[2]
    l_hi = loss_along_constraint(surface, C, cfg, hi, width_ratio)[2]
    return hi if l_hi < l_lo else lo


def is_unimodal(values: Sequence[float]) -> bool:
    """Strictly decreasing then strictly increasing (either part may be empty)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return True
    dv = np.diff(v)
    if np.any(dv == 0):
        return False
    signs = np.sign(dv)
    return int(np.count_nonzero(np.diff(signs) != 0)) <= 1 and (signs[0] < 0 or np.all(signs > 0))


def nondecreasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) >= 0))
