"""Training-run records: loading, validation, persistence and selection.

On disk a run file is either CSV with one row per validation measurement
(lines starting with ``#`` are comments)::

    run_id,n_layer,width_ratio,n_ctx,batch_samples,lr,tokens_seen,val_loss

or JSON of the form ``{"runs": [{"run_id": ..., "n_layer": ..., "width_ratio": ...,
"n_ctx": ..., "batch_samples": ..., "lr": ..., "series": [[tokens_seen, val_loss],
...]}]}``. Reals are written with 17 significant digits so files round-trip
exactly.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .compute import ComputeConfig, ModelShape, compute_per_token
from .units import UnitConvention

CSV_HEADER = ("run_id", "n_layer", "width_ratio", "n_ctx", "batch_samples", "lr", "tokens_seen", "val_loss")
DEFAULT_REL_TOL = 2e-4


class RunFileError(ValueError):
    """A run file could not be parsed."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class RunValidationError(RunFileError):
    """A run record violates an invariant (loss sign, token ordering, ...)."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TrainingRun:
    run_id: str
    shape: ModelShape
    batch_size_samples: int
    learning_rate: float
    cfg: ComputeConfig
    loss_series: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.batch_size_samples < 1:
            raise ValueError(f"run {self.run_id}: batch size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError(f"run {self.run_id}: learning rate must be positive")
        if not self.loss_series:
            raise ValueError(f"run {self.run_id}: empty loss series")
        prev = -math.inf
        for tokens, loss in self.loss_series:
            if not tokens > prev:
                raise ValueError(f"run {self.run_id}: tokens_seen must be strictly increasing")
            if not (tokens > 0 and loss > 0 and math.isfinite(loss)):
                raise ValueError(f"run {self.run_id}: tokens_seen and val_loss must be positive")
            prev = tokens

    @property
    def batch_size_tokens(self) -> int:
        return self.batch_size_samples * self.cfg.tokens_per_sample

    @property
    def n_params(self) -> int:
        return self.shape.n_params


@dataclass(frozen=True)
class Observation:
    """One (N, T, B, eta) -> loss measurement.

    Raw observations count parameters, tokens and samples; see :func:`to_units`.
    ``tokens_per_sample`` lets the batch size switch between samples and tokens.
    """

    N: float
    T: float
    B: float
    eta: float
    loss: float
    C: float
    tokens_per_sample: float = 1.0
    run_id: str = ""


# ---------------------------------------------------------------- loading


def _parse_number(value: str, kind, field: str, path, line: int):
    try:
        if kind is int:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        return float(value)
    except (TypeError, ValueError):
        raise RunFileError(f"field {field!r}: cannot parse {value!r} as {kind.__name__}", path, line) from None


def _build_runs(records: Iterable[tuple[int, dict]], path) -> list[TrainingRun]:
    """Group per-measurement records into runs, validating as we go."""
    order: list[str] = []
    meta: dict[str, tuple] = {}
    series: dict[str, list[tuple[float, float]]] = defaultdict(list)

    for line, rec in records:
        run_id = str(rec["run_id"])
        n_layer = _parse_number(rec["n_layer"], int, "n_layer", path, line)
        width_ratio = _parse_number(rec["width_ratio"], int, "width_ratio", path, line)
        n_ctx = _parse_number(rec["n_ctx"], int, "n_ctx", path, line)
        batch = _parse_number(rec["batch_samples"], int, "batch_samples", path, line)
        lr = _parse_number(rec["lr"], float, "lr", path, line)
        tokens = _parse_number(rec["tokens_seen"], float, "tokens_seen", path, line)
        loss = _parse_number(rec["val_loss"], float, "val_loss", path, line)

        if n_layer < 1 or width_ratio < 1:
            raise RunValidationError("n_layer and width_ratio must be >= 1", path, line)
        if n_ctx < 1:
            raise RunValidationError(f"n_ctx must be >= 1, got {n_ctx}", path, line)
        if batch < 1:
            raise RunValidationError(f"batch_samples must be >= 1, got {batch}", path, line)
        if not (lr > 0 and math.isfinite(lr)):
            raise RunValidationError(f"lr must be positive, got {lr}", path, line)
        if not (tokens > 0 and math.isfinite(tokens)):
            raise RunValidationError(f"tokens_seen must be positive, got {tokens}", path, line)
        if not (loss > 0 and math.isfinite(loss)):
            raise RunValidationError(f"val_loss must be positive, got {loss}", path, line)

        key = (n_layer, width_ratio, n_ctx, batch, lr)
        if run_id not in meta:
            order.append(run_id)
            meta[run_id] = key
        elif meta[run_id] != key:
            raise RunValidationError(f"run {run_id!r}: configuration changes within the run", path, line)
        prev = series[run_id][-1][0] if series[run_id] else None
        if prev is not None and not tokens > prev:
            raise RunValidationError(
                f"run {run_id!r}: tokens_seen {tokens:g} does not increase (previous {prev:g})", path, line
            )
        series[run_id].append((tokens, loss))

    runs = []
    for run_id in order:
        n_layer, width_ratio, n_ctx, batch, lr = meta[run_id]
        runs.append(
            TrainingRun(
                run_id=run_id,
                shape=ModelShape(n_layer, width_ratio),
                batch_size_samples=batch,
                learning_rate=lr,
                cfg=ComputeConfig(n_ctx=n_ctx),
                loss_series=tuple(series[run_id]),
            )
        )
    return runs


def _csv_records(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            if row and not row[0].lstrip().startswith("#"):
                header = row
                break
        if header is None:
            raise RunValidationError("empty run file", path, 1)
        header = [h.strip() for h in header]
        missing = [h for h in CSV_HEADER if h not in header]
        if missing:
            raise RunFileError(f"missing columns {missing}", path, 1)
        idx = {h: header.index(h) for h in CSV_HEADER}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
                continue
            if len(row) != len(header):
                raise RunFileError(f"expected {len(header)} fields, found {len(row)}", path, line)
            yield line, {h: row[i].strip() for h, i in idx.items()}


def _json_records(path: Path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise RunFileError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(data, dict) or not isinstance(data.get("runs"), list):
        raise RunFileError("expected an object with a 'runs' list", path)
    for i, run in enumerate(data["runs"]):
        try:
            base = {k: run[k] for k in CSV_HEADER[:6]}
            points = run["series"]
        except (KeyError, TypeError) as exc:
            raise RunFileError(f"run #{i}: missing field {exc}", path) from None
        for j, point in enumerate(points):
            if not isinstance(point, (list, tuple)) or len(point) != 2:
                raise RunFileError(f"run #{i} point #{j}: expected [tokens_seen, val_loss]", path)
            # JSON has no line numbers worth reporting; use the series index
            yield j, {**base, "tokens_seen": point[0], "val_loss": point[1]}


def load_runs(path) -> list[TrainingRun]:
    """Load and validate a CSV or JSON run file."""
    path = Path(path)
    if not path.exists():
        raise RunFileError("no such file", path)
    records = _json_records(path) if path.suffix.lower() == ".json" else _csv_records(path)
    runs = _build_runs(records, path)
    if not runs:
        raise RunValidationError("run file contains no measurements", path)
    return runs


def save_runs(runs: Sequence[TrainingRun], path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = {
            "runs": [
                {
                    "run_id": r.run_id,
                    "n_layer": r.shape.n_layer,
                    "width_ratio": r.shape.width_ratio,
                    "n_ctx": r.cfg.n_ctx,
                    "batch_samples": r.batch_size_samples,
                    "lr": r.learning_rate,
                    "series": [[t, l] for t, l in r.loss_series],
                }
                for r in runs
            ]
        }
        path.write_text(json.dumps(payload, indent=1) + "\n")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in runs:
            for tokens, loss in r.loss_series:
                writer.writerow(
                    [
                        r.run_id,
                        r.shape.n_layer,
                        r.shape.width_ratio,
                        r.cfg.n_ctx,
                        r.batch_size_samples,
                        _fmt(r.learning_rate),
                        _fmt(tokens),
                        _fmt(loss),
                    ]
                )


# ---------------------------------------------------------------- observations


def to_observations(runs: Iterable[TrainingRun], final_only: bool = False) -> list[Observation]:
    """Flatten runs into raw observations, one per measurement (or per run)."""
    out = []
    for run in runs:
        c_token = compute_per_token(run.shape, run.cfg)
        points = run.loss_series[-1:] if final_only else run.loss_series
        for tokens, loss in points:
            out.append(
                Observation(
                    N=float(run.n_params),
                    T=float(tokens),
                    B=float(run.batch_size_samples),
                    eta=run.learning_rate,
                    loss=loss,
                    C=c_token * tokens,
                    tokens_per_sample=float(run.cfg.tokens_per_sample),
                    run_id=run.run_id,
                )
            )
    return out


def group_by_size(observations: Iterable[Observation]) -> dict[tuple[float, float], list[Observation]]:
    """Exact ``(N, T)`` grouping, in first-seen order."""
    groups: dict[tuple[float, float], list[Observation]] = {}
    for obs in observations:
        groups.setdefault((obs.N, obs.T), []).append(obs)
    return groups


def select_near_optimal(observations: Iterable[Observation], rel_tol: float = DEFAULT_REL_TOL) -> list[Observation]:
    """Keep observations within ``(1 + rel_tol)`` of their ``(N, T)`` group's minimum loss."""
    if rel_tol < 0:
        raise ValueError("rel_tol must be non-negative")
    kept = []
    for group in group_by_size(observations).values():
        threshold = (1.0 + rel_tol) * min(o.loss for o in group)
        kept.extend(o for o in group if o.loss <= threshold)
    return kept


def best_per_group(observations: Iterable[Observation]) -> list[Observation]:
    """Lowest-loss observation of each ``(N, T)`` group (first one on ties)."""
    return [min(group, key=lambda o: o.loss) for group in group_by_size(observations).values()]


def _batch_scale(obs: Observation, conv: UnitConvention) -> float:
    return obs.tokens_per_sample if conv.batch_unit == "tokens" else 1.0


def to_units(obs: Observation, conv: UnitConvention) -> Observation:
    """Rescale a raw observation into ``conv``; loss, eta and C are unchanged."""
    return replace(
        obs,
        N=obs.N / conv.param_unit,
        T=obs.T / conv.token_unit,
        B=obs.B * _batch_scale(obs, conv),
    )


def from_units(obs: Observation, conv: UnitConvention) -> Observation:
    """Inverse of :func:`to_units`."""
    return replace(
        obs,
        N=obs.N * conv.param_unit,
        T=obs.T * conv.token_unit,
        B=obs.B / _batch_scale(obs, conv),
    )


def write_observations_csv(observations: Sequence[Observation], path) -> None:
    fields = ("run_id", "N", "T", "B", "eta", "loss", "C")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for o in observations:
            writer.writerow([o.run_id] + [_fmt(getattr(o, f)) for f in fields[1:]])
