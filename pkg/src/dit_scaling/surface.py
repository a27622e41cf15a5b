"""Two-term-plus-constant loss surface ``L(T, N) = (T_c/T)**a_T + (N_c/N)**a_N + L_inf``.

Fitting is a multi-start local search over log-parameters. Each start fixes
the two exponents from a grid and ``L_inf`` at a fraction of the smallest
observed loss, solves the two scale constants by non-negative linear least
squares, then refines all five parameters jointly with a trust-region
least-squares solver. The best objective wins; ties go to the earlier start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import least_squares, nnls

from .powerlaw import SingularFitError
from .units import UnitConvention

PARAM_NAMES = ("T_c", "alpha_T", "N_c", "alpha_N", "L_inf")

EXPONENT_GRID = tuple(round(0.1 * k, 1) for k in range(1, 8))
L_INF_FRACTIONS = (0.5, 0.9)


class SurfaceFitError(RuntimeError):
    """Every start of the multi-start search failed."""

    def __init__(self, message: str, best=None, objective: float = math.inf):
        super().__init__(message)
        self.best = best
        self.objective = objective


@dataclass(frozen=True)
class LossSurface:
    T_c: float
    alpha_T: float
    N_c: float
    alpha_N: float
    L_inf: float
    units: UnitConvention = field(default_factory=UnitConvention)

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    def __call__(self, T, N):
        return eval_loss(self, T, N)

    @property
    def params(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])

    def data_term(self, T):
        return np.power(self.T_c / np.asarray(T, dtype=float), self.alpha_T)

    def model_term(self, N):
        return np.power(self.N_c / np.asarray(N, dtype=float), self.alpha_N)

    def gradient(self, T, N) -> np.ndarray:
        """Partial derivatives of the loss w.r.t. ``PARAM_NAMES``; shape ``(5, ...)``."""
        T = np.asarray(T, dtype=float)
        N = np.asarray(N, dtype=float)
        ft = self.data_term(T)
        fn = self.model_term(N)
        return np.stack(
            [
                self.alpha_T * ft / self.T_c,
                ft * np.log(self.T_c / T),
                self.alpha_N * fn / self.N_c,
                fn * np.log(self.N_c / N),
                np.ones(np.broadcast(T, N).shape),
            ]
        )

    def to_dict(self) -> dict:
        return {
            "form": "loss_surface",
            "params": {n: getattr(self, n) for n in PARAM_NAMES},
            "units": self.units.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LossSurface":
        if data.get("form") != "loss_surface":
            raise ValueError(f"not a loss_surface record: form={data.get('form')!r}")
        return cls(**{n: data["params"][n] for n in PARAM_NAMES}, units=UnitConvention.from_dict(data.get("units")))


def eval_loss(surface: LossSurface, T, N):
    """Loss at ``T`` tokens and ``N`` parameters, both in ``surface.units``."""
    T = np.asarray(T, dtype=float)
    N = np.asarray(N, dtype=float)
    if np.any(~(T > 0)) or np.any(~(N > 0)):
        raise ValueError("T and N must be positive")
    out = surface.data_term(T) + surface.model_term(N) + surface.L_inf
    return float(out) if out.ndim == 0 else out


def mse(observed, fitted) -> float:
    observed = np.asarray(observed, dtype=float).ravel()
    fitted = np.asarray(fitted, dtype=float).ravel()
    if observed.shape != fitted.shape:
        raise ValueError(f"length mismatch: {observed.size} observed vs {fitted.size} fitted")
    if observed.size == 0:
        raise ValueError("mse of empty vectors")
    return float(np.mean((observed - fitted) ** 2))


def reduction_percent(before: float, after: float) -> float:
    """Relative decrease from ``before`` to ``after`` in percent."""
    if before == 0:
        raise ValueError("reference value is zero")
    return 100.0 * (before - after) / before


# ---------------------------------------------------------------- fitting


@dataclass(frozen=True)
class StartRecord:
    index: int
    init: tuple
    objective: float
    params: tuple
    converged: bool


@dataclass(frozen=True)
class SurfaceFit:
    surface: LossSurface
    objective: float
    residuals: np.ndarray = field(repr=False)
    mse: float
    unconstrained: tuple[str, ...]
    best_start: int
    trace: tuple[StartRecord, ...] = field(repr=False)

    def to_dict(self) -> dict:
        out = self.surface.to_dict()
        out["diagnostics"] = {
            "objective": self.objective,
            "mse": self.mse,
            "n_points": int(self.residuals.size),
            "unconstrained": list(self.unconstrained),
            "best_start": self.best_start,
            "n_starts": len(self.trace),
        }
        return out


def _unpack(z):
    # z = (log T_c, log alpha_T, log N_c, log alpha_N, log L_inf)
    return np.exp(z)


def _predict(z, logT, logN):
    log_tc, log_at, log_nc, log_an, log_linf = z
    at, an = math.exp(log_at), math.exp(log_an)
    ft = np.exp(at * (log_tc - logT))
    fn = np.exp(an * (log_nc - logN))
    return ft + fn + math.exp(log_linf), ft, fn


def _jacobian(z, logT, logN):
    log_tc, log_at, log_nc, log_an, log_linf = z
    at, an = math.exp(log_at), math.exp(log_an)
    ft = np.exp(at * (log_tc - logT))
    fn = np.exp(an * (log_nc - logN))
    return np.column_stack(
        [
            at * ft,
            ft * at * (log_tc - logT),
            an * fn,
            fn * an * (log_nc - logN),
            np.full_like(ft, math.exp(log_linf)),
        ]
    )


def _initial_scales(alpha_T, alpha_N, l_inf, T, N, loss):
    """Solve ``loss - l_inf = A T**-alpha_T + B N**-alpha_N`` for ``A, B >= 0``."""
    M = np.column_stack([T**-alpha_T, N**-alpha_N])
    colscale = np.sqrt((M * M).sum(axis=0))
    coef, _ = nnls(M / colscale, loss - l_inf)
    coef = coef / colscale
    tiny = 1e-12 * max(float(np.ptp(loss)), float(loss.mean()), 1e-300)
    A, B = np.maximum(coef, tiny)
    return A ** (1.0 / alpha_T), B ** (1.0 / alpha_N)


def fit_loss_surface(
    T,
    N,
    loss,
    *,
    objective: Literal["squared", "huber"] = "squared",
    huber_delta: float = 1e-3,
    units: UnitConvention | None = None,
    exponent_grid=EXPONENT_GRID,
    l_inf_fractions=L_INF_FRACTIONS,
    max_nfev: int = 10_000,
    tol: float = 1e-12,
    extra_starts: Sequence[LossSurface] = (),
) -> SurfaceFit:
    """Fit the loss surface to raw-loss observations.

    ``T`` and ``N`` are taken in ``units`` (billions by default). The squared
    objective is ``sum((loss - fit)**2)``; ``"huber"`` swaps in a Huber loss
    with transition at ``huber_delta``. ``extra_starts`` are tried after the
    grid, e.g. a previous fit to warm-start from.
    """
    T = np.asarray(T, dtype=float).ravel()
    N = np.asarray(N, dtype=float).ravel()
    loss = np.asarray(loss, dtype=float).ravel()
    if not (T.shape == N.shape == loss.shape):
        raise ValueError("T, N and loss differ in length")
    if np.any(~(T > 0)) or np.any(~(N > 0)) or np.any(~(loss > 0)):
        raise ValueError("T, N and loss must be strictly positive")
    if loss.size < 8:
        raise SingularFitError(f"need at least 8 points, got {loss.size}")
    if len(np.unique(T)) < 2 or len(np.unique(N)) < 2:
        raise SingularFitError("points must span at least 2 distinct T and 2 distinct N values")
    if objective not in ("squared", "huber"):
        raise ValueError(f"unknown objective {objective!r}")

    logT, logN = np.log(T), np.log(N)
    ls_kwargs = dict(ftol=tol, xtol=tol, gtol=tol, max_nfev=max_nfev)
    if objective == "huber":
        ls_kwargs.update(method="trf", loss="huber", f_scale=huber_delta)
    else:
        ls_kwargs.update(method="lm")

    def resid(z):
        return _predict(z, logT, logN)[0] - loss

    def jac(z):
        return _jacobian(z, logT, logN)

    def cost(r):
        if objective == "squared":
            return float(r @ r)
        a = np.abs(r)
        return float(np.sum(np.where(a <= huber_delta, 0.5 * r * r, huber_delta * (a - 0.5 * huber_delta))))

    trace = []
    best_z, best_cost, best_idx = None, math.inf, -1
    min_loss = float(loss.min())

    def starts():
        for a_t in exponent_grid:
            for a_n in exponent_grid:
                for frac in l_inf_fractions:
                    l_inf = frac * min_loss
                    t_c, n_c = _initial_scales(a_t, a_n, l_inf, T, N, loss)
                    yield (a_t, a_n, l_inf), (t_c, a_t, n_c, a_n, l_inf)
        for s in extra_starts:
            yield (s.alpha_T, s.alpha_N, s.L_inf), tuple(s.params.tolist())

    for index, (init, p0) in enumerate(starts()):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                res = least_squares(resid, np.log(p0), jac=jac, **ls_kwargs)
            z = res.x
            c = cost(resid(z))
            ok = bool(res.status > 0) and math.isfinite(c) and np.all(np.isfinite(z))
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            z, c, ok = np.full(5, np.nan), math.inf, False
        trace.append(StartRecord(index, init, c, tuple(_unpack(z).tolist()), ok))
        if math.isfinite(c) and np.all(np.isfinite(z)) and c < best_cost:
            best_z, best_cost, best_idx = z, c, index

    if best_z is None:
        raise SurfaceFitError("all starts failed", None, math.inf)
    params = _unpack(best_z)
    try:
        surface = LossSurface(*params.tolist(), units=units or UnitConvention())
    except ValueError as exc:
        raise SurfaceFitError(f"best start left the parameter domain: {exc}", params, best_cost) from None
    if not trace[best_idx].converged:
        raise SurfaceFitError("optimizer did not converge from any start", surface, best_cost)

    fitted, ft, fn = _predict(best_z, logT, logN)
    r = loss - fitted
    scale = max(float(np.ptp(loss)), float(np.mean(loss)))
    flagged = []
    if np.ptp(ft) < 1e-6 * scale:
        flagged += ["T_c", "alpha_T"]
    if np.ptp(fn) < 1e-6 * scale:
        flagged += ["N_c", "alpha_N"]
    return SurfaceFit(
        surface=surface,
        objective=best_cost,
        residuals=r,
        mse=float(np.mean(r * r)),
        unconstrained=tuple(flagged),
        best_start=best_idx,
        trace=tuple(trace),
    )


def sample_surface(surface: LossSurface, N_values, T_values, noise_sigma: float = 0.0, seed: int = 0):
    """Evaluate ``surface`` on the ``N x T`` grid with multiplicative log-normal noise.

    Returns flat ``(T, N, loss)`` arrays.
    """
    Ng, Tg = np.meshgrid(np.asarray(N_values, float), np.asarray(T_values, float), indexing="ij")
    T, N = Tg.ravel(), Ng.ravel()
    loss = eval_loss(surface, T, N)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        loss = loss * np.exp(noise_sigma * rng.standard_normal(loss.shape))
    return T, N, loss


def relative_standard_errors(surface: LossSurface, T, N, noise_sigma: float) -> dict:
    """Fisher-information standard errors of each parameter, relative to its value.

    Assumes multiplicative noise ``loss * exp(noise_sigma * eps)``, i.e. an absolute
    noise level of about ``noise_sigma * loss`` per point. Useful for deciding which
    parameters a design can pin down before fitting it.
    """
    T = np.asarray(T, dtype=float).ravel()
    N = np.asarray(N, dtype=float).ravel()
    J = surface.gradient(T, N).T
    w = 1.0 / (noise_sigma * eval_loss(surface, T, N)) ** 2
    info = J.T @ (J * w[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        return {n: math.inf for n in PARAM_NAMES}
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None)) / surface.params
    return dict(zip(PARAM_NAMES, se.tolist()))
