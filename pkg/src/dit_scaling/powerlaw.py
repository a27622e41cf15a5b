"""Power-law and parabola fitting.

Power laws are fitted by ordinary least squares in log space; parabolas in
``log10 N`` locate IsoFLOP minima. Degenerate inputs raise rather than
extrapolate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .units import UnitConvention


class SingularFitError(ValueError):
    """The design matrix is rank deficient."""


class NoInteriorMinimumError(ValueError):
    """A fitted parabola does not open upward."""


@dataclass(frozen=True)
class FitDiagnostics:
    r2: float
    stderr: dict
    n_points: int
    residuals: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {"r2": self.r2, "stderr": dict(self.stderr), "n_points": self.n_points}


@dataclass(frozen=True)
class PowerLaw2:
    """``y = alpha * T**beta * N**gamma`` with T and N in ``units``."""

    alpha: float
    beta: float
    gamma: float
    units: UnitConvention = field(default_factory=UnitConvention)
    diagnostics: FitDiagnostics | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if not (np.isfinite(self.beta) and np.isfinite(self.gamma)):
            raise ValueError("exponents must be finite")

    def __call__(self, T, N):
        return self.alpha * np.power(T, self.beta) * np.power(N, self.gamma)

    def rescaled(self, units: UnitConvention) -> "PowerLaw2":
        """Same law expressed in another token/parameter convention."""
        kt = self.units.token_unit / units.token_unit
        kn = self.units.param_unit / units.param_unit
        alpha = self.alpha * kt ** (-self.beta) * kn ** (-self.gamma)
        return PowerLaw2(alpha, self.beta, self.gamma, units)

    def to_dict(self) -> dict:
        out = {
            "form": "powerlaw2",
            "params": {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma},
            "units": self.units.to_dict(),
        }
        if self.diagnostics is not None:
            out["diagnostics"] = self.diagnostics.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PowerLaw2":
        if data.get("form") != "powerlaw2":
            raise ValueError(f"not a powerlaw2 record: form={data.get('form')!r}")
        p = data["params"]
        return cls(p["alpha"], p["beta"], p["gamma"], UnitConvention.from_dict(data.get("units")))


@dataclass(frozen=True)
class PowerLaw1:
    """``y = coef * x**exponent``."""

    coef: float
    exponent: float
    diagnostics: FitDiagnostics | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.coef > 0:
            raise ValueError(f"coef must be positive, got {self.coef!r}")
        if not np.isfinite(self.exponent):
            raise ValueError("exponent must be finite")

    def __call__(self, x):
        return self.coef * np.power(x, self.exponent)

    def to_dict(self) -> dict:
        out = {"form": "powerlaw1", "params": {"coef": self.coef, "exponent": self.exponent}}
        if self.diagnostics is not None:
            out["diagnostics"] = self.diagnostics.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PowerLaw1":
        if data.get("form") != "powerlaw1":
            raise ValueError(f"not a powerlaw1 record: form={data.get('form')!r}")
        return cls(data["params"]["coef"], data["params"]["exponent"])


@dataclass(frozen=True)
class ParabolaFit:
    """``y = a x**2 + b x + c`` with its vertex, ``x = log10 N``."""

    a: float
    b: float
    c: float
    x_min: float
    y_min: float
    diagnostics: FitDiagnostics | None = field(default=None, compare=False, repr=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (self.a * x + self.b) * x + self.c

    def to_dict(self) -> dict:
        out = {
            "form": "parabola",
            "params": {"a": self.a, "b": self.b, "c": self.c, "x_min": self.x_min, "y_min": self.y_min},
        }
        if self.diagnostics is not None:
            out["diagnostics"] = self.diagnostics.to_dict()
        return out


def _ols(X: np.ndarray, y: np.ndarray, names: list[str]):
    """Least squares with column scaling; returns (coef, stderr, residuals, r2)."""
    n, k = X.shape
    scale = np.sqrt((X * X).sum(axis=0))
    scale[scale == 0] = 1.0
    Xs = X / scale
    if np.linalg.matrix_rank(Xs, tol=max(n, k) * np.finfo(float).eps * 1e3) < k:
        # name the culprit when a predictor is constant
        for j in range(1, k):
            if np.ptp(X[:, j]) == 0:
                raise SingularFitError(f"predictor {names[j]} is constant across all points; cannot fit its exponent")
        raise SingularFitError(f"predictors {', '.join(names[1:])} are collinear")
    coef_s, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    coef = coef_s / scale
    resid = y - X @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = n - k
    if dof > 0:
        cov = (ss_res / dof) * np.linalg.inv(Xs.T @ Xs) / np.outer(scale, scale)
        stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    else:
        stderr = np.full(k, np.nan)
    return coef, stderr, resid, r2


def _positive(*arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float).ravel()
        if np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise ValueError("power-law fits need strictly positive, finite data")
        out.append(a)
    if len({len(a) for a in out}) != 1:
        raise ValueError("input arrays differ in length")
    return out


def fit_powerlaw2(T, N, y, units: UnitConvention | None = None) -> PowerLaw2:
    """Fit ``log y = log alpha + beta log T + gamma log N`` by OLS.

    Standard errors are reported for ``log_alpha``, ``beta`` and ``gamma``.
    """
    T, N, y = _positive(T, N, y)
    if len(y) < 3:
        raise SingularFitError(f"need at least 3 points, got {len(y)}")
    X = np.column_stack([np.ones_like(T), np.log(T), np.log(N)])
    coef, se, resid, r2 = _ols(X, np.log(y), ["intercept", "T", "N"])
    diag = FitDiagnostics(
        r2=r2,
        stderr={"log_alpha": float(se[0]), "beta": float(se[1]), "gamma": float(se[2])},
        n_points=len(y),
        residuals=tuple(resid.tolist()),
    )
    return PowerLaw2(float(np.exp(coef[0])), float(coef[1]), float(coef[2]), units or UnitConvention(), diag)


def fit_powerlaw1(x, y) -> PowerLaw1:
    x, y = _positive(x, y)
    if len(np.unique(x)) < 2:
        raise SingularFitError("need at least 2 distinct x values")
    X = np.column_stack([np.ones_like(x), np.log(x)])
    coef, se, resid, r2 = _ols(X, np.log(y), ["intercept", "x"])
    diag = FitDiagnostics(
        r2=r2,
        stderr={"log_coef": float(se[0]), "exponent": float(se[1])},
        n_points=len(y),
        residuals=tuple(resid.tolist()),
    )
    return PowerLaw1(float(np.exp(coef[0])), float(coef[1]), diag)


def fit_parabola_min(x, y) -> ParabolaFit:
    """Least-squares quadratic through ``(x, y)`` and its vertex.

    Raises :class:`NoInteriorMinimumError` unless the parabola opens upward.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    if len(np.unique(x)) < 3:
        raise SingularFitError("need at least 3 distinct abscissae for a parabola")
    # centring keeps the normal equations well conditioned for x ~ log10 N ~ 8
    x0 = float(x.mean())
    u = x - x0
    X = np.column_stack([np.ones_like(u), u, u * u])
    coef, se, resid, r2 = _ols(X, y, ["intercept", "x", "x^2"])
    c0, b0, a = (float(v) for v in coef)
    span = max(float(np.abs(y).max()), 1.0)
    if not a > 1e-12 * span:
        raise NoInteriorMinimumError(f"fitted parabola has no interior minimum (a = {a:.3g})")
    b = b0 - 2.0 * a * x0
    c = c0 - b0 * x0 + a * x0 * x0
    u_min = -b0 / (2.0 * a)
    diag = FitDiagnostics(
        r2=r2,
        stderr={"c": float(se[0]), "b": float(se[1]), "a": float(se[2])},
        n_points=len(y),
        residuals=tuple(resid.tolist()),
    )
    return ParabolaFit(a, b, c, x_min=u_min + x0, y_min=c0 - b0 * b0 / (4.0 * a), diagnostics=diag)


def law_from_dict(data: dict):
    form = data.get("form")
    if form == "powerlaw2":
        return PowerLaw2.from_dict(data)
    if form == "powerlaw1":
        return PowerLaw1.from_dict(data)
    raise ValueError(f"unknown law form {form!r}")
