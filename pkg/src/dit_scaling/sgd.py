"""Mini-batch SGD on quadratic objectives, and synthetic run generation.

For ``L(theta) = 0.5 (theta - theta*)^T H (theta - theta*) + L*`` the
second-order expansion of a step is exact, so the expected one-step change

    dL(eta, B) = -eta |G|^2 + eta^2 / 2 * (G^T H G + tr(H Sigma) / B)

and everything derived from it (optimal step, maximal gain, the range of
steps that still decrease the loss) can be checked against simulation.

Randomness: every stream is a numpy ``PCG64`` generator seeded through
``SeedSequence((seed, *stream_key))``. Per-sample gradient noise is Gaussian with
covariance ``Sigma``; a mini-batch gradient averages ``B`` such samples.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import ortho_group

from .compute import (
    DEFAULT_WIDTH_RATIO,
    ComputeConfig,
    ModelShape,
    compute_per_token,
    layers_for_params,
    params_from_layers,
)
from .powerlaw import PowerLaw2
from .runs import Observation, TrainingRun
from .surface import LossSurface, eval_loss

DEFAULT_DIM = 16


def make_rng(seed: int, *stream) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), *map(int, stream)))))


def _check_psd(M: np.ndarray, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() < -1e-10 * max(1.0, np.abs(M).max()):
        raise ValueError(f"{name} must be positive semi-definite")
    return M


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    H: np.ndarray
    Sigma: np.ndarray
    theta0: np.ndarray
    theta_star: np.ndarray | None = None
    L_star: float = 0.0
    _noise_factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        H = _check_psd(self.H, "H")
        Sigma = _check_psd(self.Sigma, "Sigma")
        n = H.shape[0]
        theta0 = np.asarray(self.theta0, dtype=float)
        star = np.zeros(n) if self.theta_star is None else np.asarray(self.theta_star, dtype=float)
        if Sigma.shape != H.shape or theta0.shape != (n,) or star.shape != (n,):
            raise ValueError("dimension mismatch between H, Sigma, theta0 and theta_star")
        w, V = np.linalg.eigh(Sigma)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "theta_star", star)
        object.__setattr__(self, "_noise_factor", V * np.sqrt(np.clip(w, 0.0, None)))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def smoothness(self) -> float:
        """Largest Hessian eigenvalue (the gradient's Lipschitz constant)."""
        return float(np.linalg.eigvalsh(self.H).max())

    @property
    def noise_trace(self) -> float:
        return float(np.trace(self.H @ self.Sigma))

    def loss(self, theta) -> np.ndarray | float:
        r = np.asarray(theta, dtype=float) - self.theta_star
        out = 0.5 * np.einsum("...i,ij,...j->...", r, self.H, r) + self.L_star
        return float(out) if np.ndim(out) == 0 else out

    def grad(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.dim:
            raise ValueError(f"theta has dimension {theta.shape[-1]}, objective has {self.dim}")
        return (theta - self.theta_star) @ self.H

    def minibatch_grad(self, theta, B: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Average of ``B`` per-sample gradients ``G + xi``, ``xi ~ Normal(0, Sigma)``.

        With ``size`` the result stacks that many independent mini-batches.
        """
        shape = (B, self.dim) if size is None else (size, B, self.dim)
        xi = rng.standard_normal(shape).mean(axis=-2) @ self._noise_factor.T
        return self.grad(theta) + xi


def make_quadratic(
    eigenvalues: Sequence[float] | None = None,
    noise_eigenvalues: Sequence[float] | None = None,
    dim: int = DEFAULT_DIM,
    noise_scale: float = 1.0,
    theta0_scale: float = 1.0,
    L_star: float = 0.0,
    seed: int = 0,
    rotate: bool = True,
    theta0: Sequence[float] | None = None,
) -> QuadraticObjective:
    """Random quadratic with prescribed Hessian and noise spectra.

    Both spectra are conjugated by independent random rotations unless
    ``rotate`` is false, in which case ``H`` and ``Sigma`` are diagonal. The default
    Hessian spectrum is log-spaced from 1 down to 0.01 and the default noise
    spectrum is ``noise_scale`` times the Hessian spectrum.
    """
    lam = np.logspace(0, -2, dim) if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
    dim = lam.size
    s = noise_scale * lam if noise_eigenvalues is None else np.asarray(noise_eigenvalues, dtype=float)
    if s.size != dim:
        raise ValueError("noise spectrum and Hessian spectrum differ in length")
    rng = make_rng(seed, 0)
    if rotate and dim > 1:
        Q1 = ortho_group.rvs(dim, random_state=rng)
        Q2 = ortho_group.rvs(dim, random_state=rng)
    else:
        Q1 = Q2 = np.eye(dim)
    H = (Q1 * lam) @ Q1.T
    Sigma = (Q2 * s) @ Q2.T
    if theta0 is None:
        theta0 = theta0_scale * rng.standard_normal(dim)
    else:
        theta0 = np.asarray(theta0, dtype=float)
        if theta0.shape != (dim,):
            raise ValueError("theta0 length differs from the Hessian spectrum")
    return QuadraticObjective(0.5 * (H + H.T), 0.5 * (Sigma + Sigma.T), theta0, L_star=L_star)


# ---------------------------------------------------------------- one-step theory


class StepSize(NamedTuple):
    opt: float
    bound: float


def _curvature(obj: QuadraticObjective, G: np.ndarray, B: int) -> float:
    if B < 1:
        raise ValueError("batch size must be >= 1")
    return float(G @ obj.H @ G + obj.noise_trace / B)


def stepwise_loss_delta(obj: QuadraticObjective, theta, eta: float, B: int) -> float:
    """Expected loss change of one SGD step from ``theta``."""
    G = obj.grad(theta)
    return float(-eta * (G @ G) + 0.5 * eta * eta * _curvature(obj, G, B))


def eta_opt_closed_form(obj: QuadraticObjective, theta, B: int) -> StepSize:
    """Step size minimising the expected one-step loss, and twice it (the largest step that still helps)."""
    G = obj.grad(theta)
    denom = _curvature(obj, G, B)
    if denom <= 0:
        raise ValueError("unbounded step: no curvature along the gradient and no gradient noise")
    opt = float(G @ G) / denom
    return StepSize(opt, 2.0 * opt)


def max_gain(obj: QuadraticObjective, theta, B: int) -> float:
    """Expected one-step change at the optimal step: ``-|G|^4 / (2 (G^T H G + tr(H Sigma)/B))``."""
    G = obj.grad(theta)
    denom = _curvature(obj, G, B)
    if denom <= 0:
        raise ValueError("unbounded step: no curvature along the gradient and no gradient noise")
    g2 = float(G @ G)
    return -g2 * g2 / (2.0 * denom)


def convergence_bound(obj: QuadraticObjective, eta: float, B: int, steps: int) -> float:
    """Upper bound on the average squared gradient norm over ``steps + 1`` iterates.

    ``2 (L(theta0) - L*) / (eta (K+1)) + lambda_max * eta * tr(Sigma) / B``,
    valid for ``eta <= 1 / lambda_max``.
    """
    k1 = steps + 1
    gap = obj.loss(obj.theta0) - obj.L_star
    return 2.0 * gap / (eta * k1) + obj.smoothness * eta * float(np.trace(obj.Sigma)) / B


# ---------------------------------------------------------------- simulation


@dataclass(frozen=True)
class SgdConfig:
    eta: float
    B: int
    steps: int
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.B < 1 or self.steps < 1:
            raise ValueError("B and steps must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    step: np.ndarray
    loss: np.ndarray
    grad_norm_sq: np.ndarray
    theta: np.ndarray = field(repr=False)


def run_sgd(obj: QuadraticObjective, cfg: SgdConfig, stream=(), record_every: int = 1) -> Trajectory:
    """Plain constant-step mini-batch SGD from ``obj.theta0``.

    Deterministic in ``(cfg.seed, stream)``. Iterates ``0..steps`` are recorded
    every ``record_every`` steps, always including the last one.
    """
    if cfg.eta > 1.0 / obj.smoothness:
        warnings.warn(
            f"eta={cfg.eta:g} exceeds 1/lambda_max={1.0 / obj.smoothness:g}; convergence guarantees do not apply",
            RuntimeWarning,
            stacklevel=2,
        )
    rng = make_rng(cfg.seed, *stream)
    theta = obj.theta0.copy()
    steps, losses, gnorms = [], [], []

    def record(k):
        G = obj.grad(theta)
        steps.append(k)
        losses.append(obj.loss(theta))
        gnorms.append(float(G @ G))

    record(0)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, cfg.steps + 1):
            theta = theta - cfg.eta * obj.minibatch_grad(theta, cfg.B, rng)
            if k % record_every == 0 or k == cfg.steps:
                record(k)
    return Trajectory(np.array(steps), np.array(losses), np.array(gnorms), theta)


def gradient_descent_path(obj: QuadraticObjective, eta: float, steps: int) -> np.ndarray:
    """Noise-free iterates ``theta_0..theta_steps`` (the mean SGD dynamics)."""
    out = np.empty((steps + 1, obj.dim))
    out[0] = obj.theta0
    for k in range(steps):
        out[k + 1] = out[k] - eta * obj.grad(out[k])
    return out


@dataclass(frozen=True)
class SweepResult:
    token_budget: int
    B_grid: np.ndarray
    eta_grid: np.ndarray
    final_loss: np.ndarray  # shape (len(B_grid), len(eta_grid))
    steps: np.ndarray

    def best(self) -> tuple[float, float, float]:
        i, j = np.unravel_index(np.nanargmin(self.final_loss), self.final_loss.shape)
        return float(self.B_grid[i]), float(self.eta_grid[j]), float(self.final_loss[i, j])


def sweep_hyperparams(
    obj: QuadraticObjective,
    token_budget: int,
    B_grid: Sequence[int],
    eta_grid: Sequence[float],
    seed: int = 0,
    repeats: int = 1,
) -> SweepResult:
    """Final loss of SGD for every ``(B, eta)`` under a fixed sample budget.

    Each cell runs ``token_budget // B`` steps on its own random stream keyed by
    ``(seed, cell index, repeat)`` and reports the mean final loss over ``repeats``.
    """
    B_grid = np.asarray(B_grid, dtype=int)
    eta_grid = np.asarray(eta_grid, dtype=float)
    if B_grid.size == 0 or eta_grid.size == 0:
        raise ValueError("empty hyperparameter grid")
    if np.any(B_grid < 1) or np.any(B_grid > token_budget):
        raise ValueError("batch sizes must lie in [1, token_budget]")
    steps = token_budget // B_grid
    out = np.empty((B_grid.size, eta_grid.size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i, B in enumerate(B_grid):
            for j, eta in enumerate(eta_grid):
                cell = i * eta_grid.size + j
                finals = [
                    run_sgd(obj, SgdConfig(float(eta), int(B), int(steps[i]), seed), stream=(cell, r)).loss[-1]
                    for r in range(repeats)
                ]
                out[i, j] = np.mean(finals)
    return SweepResult(int(token_budget), B_grid, eta_grid, out, steps)


def trajectory_runs(
    obj: QuadraticObjective,
    configs: Sequence[SgdConfig],
    record_every: int = 1,
    shape: ModelShape | None = None,
    cfg: ComputeConfig | None = None,
) -> list[TrainingRun]:
    """SGD trajectories as run-store records (one sample = one token by default).

    Requires ``obj.L_star > 0`` so that every recorded loss is positive.
    """
    if not obj.L_star > 0:
        raise ValueError("trajectory runs need L_star > 0 so that every recorded loss is positive")
    shape = shape or ModelShape(1)
    cfg = cfg or ComputeConfig(n_ctx=1, n_text=0)
    runs = []
    for i, c in enumerate(configs):
        traj = run_sgd(obj, c, stream=(i, 0), record_every=record_every)
        series = tuple(
            (float(k * c.B * cfg.tokens_per_sample), float(l)) for k, l in zip(traj.step, traj.loss) if k > 0
        )
        runs.append(TrainingRun(f"sgd-{i:03d}-B{c.B}-lr{c.eta:.6g}", shape, c.B, c.eta, cfg, series))
    return runs


# ---------------------------------------------------------------- synthetic scaling data


def _factor_grid(n: int, step: float) -> np.ndarray:
    return 2.0 ** (step * np.arange(-(n // 2), n // 2 + 1))


def synth_runs(
    law_B: PowerLaw2,
    law_eta: PowerLaw2,
    surface: LossSurface,
    n_layers: Sequence[int],
    tokens: Sequence[float],
    noise_sigma: float = 0.0,
    seed: int = 0,
    cfg: ComputeConfig | None = None,
    width_ratio: int = DEFAULT_WIDTH_RATIO,
    B_factors: Sequence[float] | None = None,
    eta_factors: Sequence[float] | None = None,
    curvature: tuple[float, float] = (0.05, 0.05),
) -> list[Observation]:
    """Grid-search observations with known optimal hyperparameters.

    For every model size and token count, batch sizes and learning rates are
    placed at multiples of the laws' optima. The loss is the surface value
    times ``1 + k_B ln(B/B_opt)^2 + k_eta ln(eta/eta_opt)^2`` times log-normal
    noise. ``tokens`` are raw token counts; ``B`` is in samples.
    """
    cfg = cfg or ComputeConfig()
    B_factors = _factor_grid(9, 0.25) if B_factors is None else np.asarray(B_factors, float)
    eta_factors = _factor_grid(9, 0.25) if eta_factors is None else np.asarray(eta_factors, float)
    kb, ke = curvature
    rng = make_rng(seed, 1)
    out = []
    for n in n_layers:
        shape = ModelShape(int(n), width_ratio)
        N = float(params_from_layers(int(n), width_ratio))
        c_token = compute_per_token(shape, cfg)
        for T in tokens:
            T = float(T)
            b_opt = float(law_B(T / law_B.units.token_unit, N / law_B.units.param_unit))
            if law_B.units.batch_unit == "tokens":
                b_opt /= cfg.tokens_per_sample
            e_opt = float(law_eta(T / law_eta.units.token_unit, N / law_eta.units.param_unit))
            base = eval_loss(surface, T / surface.units.token_unit, N / surface.units.param_unit)
            for fb in B_factors:
                for fe in eta_factors:
                    penalty = kb * np.log(fb) ** 2 + ke * np.log(fe) ** 2
                    noise = np.exp(noise_sigma * rng.standard_normal()) if noise_sigma > 0 else 1.0
                    out.append(
                        Observation(
                            N=N,
                            T=T,
                            B=b_opt * fb,
                            eta=e_opt * fe,
                            loss=float(base * (1.0 + penalty) * noise),
                            C=c_token * T,
                            tokens_per_sample=float(cfg.tokens_per_sample),
                            run_id=f"L{n}-T{T:.6g}-b{fb:.4g}-e{fe:.4g}",
                        )
                    )
    return out


def observations_to_runs(observations: Sequence[Observation], width_ratio: int = DEFAULT_WIDTH_RATIO) -> list[TrainingRun]:
    """Single-measurement runs for observations on the layer grid (batch rounded to whole samples)."""
    runs = []
    for i, o in enumerate(observations):
        n_layer = layers_for_params(o.N, width_ratio)
        if params_from_layers(n_layer, width_ratio) != o.N:
            raise ValueError(f"observation {i}: N={o.N:g} is not on the layer grid")
        runs.append(
            TrainingRun(
                run_id=o.run_id or f"obs-{i:05d}",
                shape=ModelShape(n_layer, width_ratio),
                batch_size_samples=max(1, int(round(o.B))),
                learning_rate=o.eta,
                cfg=ComputeConfig(n_ctx=int(o.tokens_per_sample)),
                loss_series=((o.T, o.loss),),
            )
        )
    return runs
