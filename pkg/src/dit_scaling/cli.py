"""Command-line front end.

Every subcommand writes JSON/CSV/SVG artifacts into ``--out`` and prints a
summary on stdout. Artifacts carry the tool version and a hash of the resolved
configuration. Exit codes: 0 success, 2 usage or validation error, 3 numeric
failure (diagnostic JSON on stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .allocation import (
    DEFAULT_BUDGETS,
    AllocationLaw,
    empirical_nopt,
    exponent_bracket,
    parameter_saving,
    predicted_profiles,
    profiles_from_observations,
    slope_deviation,
)
from .compute import ComputeConfig
from .config import ConfigError, Settings, load_settings
from .planning import plan
from .powerlaw import NoInteriorMinimumError, SingularFitError, fit_powerlaw2
from .presets import PRESETS, REPORTED, SURFACES, get_preset, get_surface
from .runs import (
    RunFileError,
    best_per_group,
    load_runs,
    save_runs,
    select_near_optimal,
    to_observations,
    to_units,
    write_observations_csv,
)
from .sgd import SgdConfig, make_quadratic, observations_to_runs, sweep_hyperparams, synth_runs, trajectory_runs
from .surface import LossSurface, SurfaceFitError, fit_loss_surface, reduction_percent
from .svg import Series, write_plot

TOOL = "dit-scaling"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


def tool_version() -> str:
    try:
        return version(TOOL)
    except PackageNotFoundError:
        return "0+unknown"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- artifact plumbing


class Workspace:
    def __init__(self, args, settings: Settings):
        self.settings = settings
        self.out = Path(args.out)
        self.seed = args.seed
        self.command = args.command
        self.format = args.format
        self.out.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    @property
    def provenance(self) -> dict:
        return {
            "tool": TOOL,
            "version": tool_version(),
            "config_hash": self.settings.hash,
            "command": self.command,
            "seed": self.seed,
        }

    @property
    def stamp(self) -> str:
        p = self.provenance
        return f"# {p['tool']} {p['version']} command={p['command']} config_hash={p['config_hash']} seed={p['seed']}"

    def _path(self, name: str) -> Path:
        self.written.append(name)
        return self.out / name

    def json(self, name: str, kind: str, payload: dict) -> dict:
        doc = {"kind": kind, "provenance": self.provenance, "config": self.settings.to_dict(), **payload}
        self._path(name).write_text(json.dumps(_clean(doc), indent=2) + "\n")
        return doc

    def csv(self, name: str, header, rows) -> None:
        with self._path(name).open("w", newline="") as fh:
            fh.write(self.stamp + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])

    def stamp_csv(self, name: str) -> None:
        """Prepend the provenance line to a CSV written by library code."""
        path = self.out / name
        path.write_text(self.stamp + "\n" + path.read_text())

    def plot(self, name: str, series, **kwargs) -> None:
        svg_path, csv_path = write_plot(self._path(name), series, **kwargs)
        self.written.append(csv_path.name)
        text = svg_path.read_text().split("\n", 1)
        svg_path.write_text(f"{text[0]}\n<!-- {self.stamp[2:]} -->\n{text[1]}")
        self.stamp_csv(csv_path.name)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def _emit(ws: Workspace, summary: dict) -> None:
    summary = _clean({**summary, "artifacts": sorted(ws.written)})
    if ws.format == "json":
        print(json.dumps(summary, indent=2))
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for key, value in _flatten(summary):
        w.writerow([key, _cell(value)])
    sys.stdout.write(buf.getvalue())


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _compute_cfg(args, ws: Workspace, preset_n_ctx: int | None = None) -> ComputeConfig:
    # an explicit config wins; otherwise follow the preset's context length
    if args.config is None and preset_n_ctx is not None:
        return ComputeConfig(n_ctx=preset_n_ctx, n_text=ws.settings.compute.n_text)
    return ws.settings.compute


def _load_observations(path):
    runs = load_runs(path)
    return runs, to_observations(runs)


def _read_json(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a JSON object")
    return data


def _surface_arg(name: str) -> LossSurface:
    """A preset name or a JSON file holding a fitted surface."""
    if name in SURFACES or name == "video":
        return get_surface(name)
    data = _read_json(name)
    try:
        return LossSurface.from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{name}: not a loss-surface record ({exc})") from None


# ---------------------------------------------------------------- subcommands


def cmd_fit_hparams(args, ws: Workspace) -> dict:
    units = ws.settings.units
    runs, obs = _load_observations(args.runs)
    selected = [to_units(o, units) for o in select_near_optimal(obs, args.rel_tol)]
    T = [o.T for o in selected]
    N = [o.N for o in selected]
    try:
        law_B = fit_powerlaw2(T, N, [o.B for o in selected], units)
        law_eta = fit_powerlaw2(T, N, [o.eta for o in selected], units)
    except SingularFitError as exc:
        raise SingularFitError(f"{args.runs}: {exc}") from None
    payload = {
        "input": str(args.runs),
        "rel_tol": args.rel_tol,
        "n_runs": len(runs),
        "n_observations": len(obs),
        "n_selected": len(selected),
        "batch_law": law_B.to_dict(),
        "lr_law": law_eta.to_dict(),
    }
    ws.json("hparams.json", "hparams", payload)
    write_observations_csv(selected, ws._path("hparams_observations.csv"))
    ws.stamp_csv("hparams_observations.csv")
    T_arr = np.asarray(T)
    for key, law, values, label in (
        ("batch", law_B, [o.B for o in selected], f"batch ({units.batch_unit})"),
        ("lr", law_eta, [o.eta for o in selected], "learning rate"),
    ):
        ws.plot(
            f"hparams_{key}.svg",
            [Series("selected runs", T_arr, values), Series("fitted law", T_arr, law(T_arr, np.asarray(N)), "scatter")],
            title=f"near-optimal {label}",
            xlabel=f"tokens / {units.token_unit:g}",
            ylabel=label,
            logx=True,
            logy=True,
        )
    return {"batch": law_B.to_dict()["params"], "lr": law_eta.to_dict()["params"], "n_selected": len(selected)}


def cmd_fit_loss(args, ws: Workspace) -> dict:
    units = ws.settings.units
    runs, obs = _load_observations(args.runs)
    best = [to_units(o, units) for o in best_per_group(obs)]
    T = np.array([o.T for o in best])
    N = np.array([o.N for o in best])
    loss = np.array([o.loss for o in best])
    fit = fit_loss_surface(T, N, loss, objective=args.objective, huber_delta=args.huber_delta, units=units)
    payload = {"input": str(args.runs), "objective": args.objective, **fit.to_dict()}
    if args.objective == "huber":
        payload["huber_delta"] = args.huber_delta
    ws.json("loss_surface.json", "loss_surface", payload)
    fitted = fit.surface(T, N)
    ws.csv(
        "loss_residuals.csv",
        ["N", "T", "loss", "fitted", "residual"],
        zip(N, T, loss, fitted, loss - fitted),
    )
    series = []
    for n in np.unique(N):
        m = N == n
        order = np.argsort(T[m])
        series.append(Series(f"N={n:.4g} observed", T[m][order], loss[m][order]))
        series.append(Series(f"N={n:.4g} fitted", T[m][order], fitted[m][order], "line"))
    ws.plot("loss_fit.svg", series, title="loss surface fit", xlabel="tokens", ylabel="loss", logx=True, logy=True)
    return {"params": fit.to_dict()["params"], "mse": fit.mse, "unconstrained": list(fit.unconstrained)}


def _profile_rows(label, profiles):
    for p in profiles:
        for n, l in zip(p.N, p.loss):
            yield [label, p.budget_C, float(n), float(l), float(p.fit(np.log10(n)))]


def cmd_isoflop(args, ws: Workspace) -> dict:
    if args.runs is None and args.surface is None:
        raise UsageError("isoflop needs --runs, --surface or both")
    budgets = tuple(args.budgets) if args.budgets else None
    payload: dict = {"budgets": list(budgets) if budgets else None}
    series, rows, laws = [], [], {}
    if args.runs is not None:
        _, obs = _load_observations(args.runs)
        profiles = profiles_from_observations(obs, budgets, args.rel_tol)
        law = empirical_nopt(profiles)
        laws["empirical"] = law
        payload["empirical"] = {"profiles": [p.to_dict() for p in profiles], "law": law.to_dict()}
        rows += list(_profile_rows("empirical", profiles))
        for p in profiles:
            series.append(Series(f"C={p.budget_C:.3g}", p.N, p.loss))
    if args.surface is not None:
        surface = _surface_arg(args.surface)
        cfg = ws.settings.compute
        pb = budgets or DEFAULT_BUDGETS
        profiles = predicted_profiles(surface, pb, cfg, verbatim=args.verbatim)
        law = empirical_nopt(profiles)
        laws["predicted"] = law
        payload["predicted"] = {
            "surface": surface.to_dict(),
            "verbatim_data_term": args.verbatim,
            "profiles": [p.to_dict() for p in profiles],
            "law": law.to_dict(),
            "exponent_bracket": list(exponent_bracket(surface)),
        }
        rows += list(_profile_rows("predicted", profiles))
        for p in profiles:
            series.append(Series(f"predicted C={p.budget_C:.3g}", p.N, p.loss, "line"))
    if len(laws) == 2:
        payload["comparison"] = AllocationLaw.compare(laws["empirical"], laws["predicted"]).to_dict()
    ws.json("isoflop.json", "isoflop", payload)
    ws.csv("isoflop_profiles.csv", ["source", "budget_C", "N", "loss", "parabola"], rows)
    ws.plot("isoflop.svg", series, title="IsoFLOP profiles", xlabel="parameters", ylabel="loss", logx=True)
    summary = {k: v.to_dict()["params"] for k, v in laws.items()}
    if "comparison" in payload:
        summary["slope_abs_err"] = payload["comparison"]["slope_abs_err"]
        summary["slope_rel_err"] = payload["comparison"]["slope_rel_err"]
    return summary


def cmd_plan(args, ws: Workspace) -> dict:
    preset = get_preset(args.preset or ws.settings.preset)
    cfg = _compute_cfg(args, ws, preset.n_ctx)
    result = plan(args.compute, preset, cfg, ws.settings.width_ratio)
    payload = {"plan": result}
    if preset.name == "video":
        payload["reported"] = REPORTED["plan"]
    ws.json("plan.json", "plan", payload)
    keys = [k for k in ("C", "N_opt", "n_layer", "N", "T", "batch_samples", "lr", "predicted_loss") if k in result]
    ws.csv("plan.csv", ["quantity", "value", "reported"],
           [[k, result[k], payload.get("reported", {}).get(k, "")] for k in keys])
    return payload


def _simulate_sgd(sim: dict, ws: Workspace):
    obj = make_quadratic(
        eigenvalues=sim.get("eigenvalues"),
        noise_eigenvalues=sim.get("noise_eigenvalues"),
        dim=int(sim.get("dim", 16)),
        noise_scale=float(sim.get("noise_scale", 1.0)),
        theta0_scale=float(sim.get("theta0_scale", 1.0)),
        L_star=float(sim.get("L_star", 1.0)),
        seed=ws.seed,
        rotate=bool(sim.get("rotate", True)),
        theta0=sim.get("theta0"),
    )
    return obj


def cmd_simulate(args, ws: Workspace) -> dict:
    sim = _read_json(args.sim)
    kind = sim.get("kind")
    suffix = ".json" if ws.format == "json" else ".csv"
    if kind == "sgd":
        obj = _simulate_sgd(sim, ws)
        configs = [
            SgdConfig(float(c["eta"]), int(c["B"]), int(c["steps"]), ws.seed) for c in sim.get("configs", [])
        ]
        if not configs:
            raise UsageError("sgd simulation needs a non-empty 'configs' list of {eta, B, steps}")
        runs = trajectory_runs(obj, configs, int(sim.get("record_every", 1)))
        name = "simulated_runs" + suffix
        save_runs(runs, ws._path(name))
        if suffix == ".csv":
            ws.stamp_csv(name)
        ws.plot(
            "simulated_runs_plot.svg",
            [Series(r.run_id, [t for t, _ in r.loss_series], [l for _, l in r.loss_series], "line") for r in runs],
            title="SGD trajectories", xlabel="samples seen", ylabel="loss", logx=True, logy=True,
        )
        summary = {"kind": kind, "n_runs": len(runs), "final_loss": [r.loss_series[-1][1] for r in runs]}
    elif kind == "sweep":
        obj = _simulate_sgd(sim, ws)
        res = sweep_hyperparams(
            obj, int(sim["token_budget"]), sim["batch_sizes"], sim["learning_rates"], ws.seed,
            int(sim.get("repeats", 1)),
        )
        B, eta, best = res.best()
        rows = [
            [int(b), float(e), int(res.steps[i]), float(res.final_loss[i, j])]
            for i, b in enumerate(res.B_grid)
            for j, e in enumerate(res.eta_grid)
        ]
        ws.csv("sweep.csv", ["B", "eta", "steps", "final_loss"], rows)
        ws.plot(
            "sweep_plot.svg",
            [Series(f"B={int(b)}", res.eta_grid, res.final_loss[i], "line") for i, b in enumerate(res.B_grid)],
            title="final loss at fixed sample budget", xlabel="learning rate", ylabel="final loss",
            logx=True, logy=True,
        )
        summary = {"kind": kind, "best": {"B": B, "eta": eta, "final_loss": best}}
        ws.json("sweep.json", "sweep", {"simulation": sim, **summary})
    elif kind == "laws":
        preset = get_preset(sim.get("preset", ws.settings.preset))
        if preset.batch is None or preset.lr is None:
            raise UsageError(f"preset {preset.name!r} has no hyperparameter laws to simulate from")
        cfg = ws.settings.compute if "n_ctx" not in sim else ComputeConfig(n_ctx=int(sim["n_ctx"]))
        obs = synth_runs(
            preset.batch, preset.lr, preset.surface,
            n_layers=sim.get("n_layers", [4, 6, 8, 10]),
            tokens=sim.get("tokens", [2e9, 4e9, 6e9, 8e9, 10e9, 12e9]),
            noise_sigma=float(sim.get("noise_sigma", 0.0)),
            seed=ws.seed,
            cfg=cfg,
            width_ratio=ws.settings.width_ratio,
            B_factors=sim.get("B_factors"),
            eta_factors=sim.get("eta_factors"),
        )
        runs = observations_to_runs(obs, ws.settings.width_ratio)
        name = "simulated_runs" + suffix
        save_runs(runs, ws._path(name))
        if suffix == ".csv":
            ws.stamp_csv(name)
        summary = {"kind": kind, "preset": preset.name, "n_runs": len(runs)}
    else:
        raise UsageError(f"{args.sim}: 'kind' must be one of 'sgd', 'sweep', 'laws', got {kind!r}")
    return summary


def _allocation_rows():
    pairs = {
        "optimal": (PRESETS["video"].nopt_empirical, PRESETS["video"].nopt_predicted, "optimal"),
        "fixed": (PRESETS["video-fixed"].nopt_empirical, PRESETS["video-fixed"].nopt_predicted, "fixed"),
    }
    out = []
    for label, (emp, pred, key) in pairs.items():
        a, r = slope_deviation(emp, pred)
        out.append(
            {
                "hyperparameters": label,
                "empirical_exponent": emp.exponent,
                "predicted_exponent": pred.exponent,
                "slope_abs_err": a,
                "slope_rel_err_pct": 100.0 * r,
                "reported_abs_err": REPORTED[f"slope_abs_err_{key}"],
                "reported_rel_err_pct": REPORTED[f"slope_rel_err_{key}_pct"],
            }
        )
    return out


def _artifact_summary(path) -> dict:
    data = _read_json(path)
    kind = data.get("kind")
    row = {"path": str(path), "kind": kind}
    if kind == "loss_surface":
        row["params"] = data.get("params")
        row["mse"] = data.get("diagnostics", {}).get("mse")
    elif kind == "hparams":
        row["batch"] = data["batch_law"]["params"]
        row["lr"] = data["lr_law"]["params"]
    elif kind == "isoflop":
        for side in ("empirical", "predicted"):
            if side in data:
                row[f"{side}_law"] = data[side]["law"]["params"]
        if "comparison" in data:
            row["slope_abs_err"] = data["comparison"]["slope_abs_err"]
            row["slope_rel_err_pct"] = 100.0 * data["comparison"]["slope_rel_err"]
    elif kind == "plan":
        row["plan"] = data["plan"]
    else:
        raise UsageError(f"{path}: unrecognised artifact kind {kind!r}")
    return row


def cmd_report(args, ws: Workspace) -> dict:
    cfg = ws.settings.compute
    video = PRESETS["video"]
    fixed = PRESETS["video-fixed"]

    allocation = _allocation_rows()
    mse = {
        "fixed": REPORTED["mse_fixed"],
        "optimal": REPORTED["mse_optimal"],
        "reduction_pct": reduction_percent(REPORTED["mse_fixed"], REPORTED["mse_optimal"]),
        "reported_reduction_pct": REPORTED["mse_reduction_pct"],
    }
    C_big = REPORTED["parameter_saving_budget"]
    saving = [
        {"smaller": smaller, "larger": larger, "C": C_big, "saving_pct": 100.0 * parameter_saving(a, b, C_big)}
        for smaller, larger, a, b in (
            ("optimal, empirical", "fixed, empirical", video.nopt_empirical, fixed.nopt_empirical),
            ("optimal, predicted", "fixed, empirical", video.nopt_predicted, fixed.nopt_empirical),
            ("optimal, predicted", "fixed, predicted", video.nopt_predicted, fixed.nopt_predicted),
        )
    ]
    plan_video = plan(REPORTED["plan"]["C"], video, ComputeConfig(n_ctx=cfg.n_ctx, n_text=cfg.n_text))
    checkpoints = [
        {
            "label": c["label"],
            "T": c["T"],
            "N": c["N"],
            "predicted": float(video.surface(c["T"] / 1e9, c["N"] / 1e9)),
            "reported_deviation_pct": c["deviation_pct"],
        }
        for c in REPORTED["video_checkpoints"]
    ]
    img = REPORTED["image_checkpoint"]
    image_pred = float(PRESETS["image"].surface(img["T"] / 1e9, img["N"] / 1e9))
    image_check = {
        "T": img["T"],
        "N": img["N"],
        "predicted": image_pred,
        "reported_predicted": img["predicted"],
        "reported_actual": img["actual"],
        "discrepancy": image_pred - img["predicted"],
    }
    exponents = {}
    for name, surface in (("video-optimal", video.surface), ("video-fixed", fixed.surface)):
        try:
            law = empirical_nopt(predicted_profiles(surface, DEFAULT_BUDGETS, cfg))
            e = law.exponent
        except NoInteriorMinimumError:
            e = None
        lo, hi = exponent_bracket(surface)
        exponents[name] = {"n_ctx": cfg.n_ctx, "predicted_exponent": e, "long_context_limit": hi, "short_context_limit": lo}
    exponents["video-optimal"]["reported_predicted_exponent"] = video.nopt_predicted.exponent
    exponents["video-fixed"]["reported_predicted_exponent"] = fixed.nopt_predicted.exponent

    artifacts = [_artifact_summary(p) for p in args.artifacts]
    # reference constants only make sense under a declared unit convention
    units = {
        f"{name}.{law_name}": law.units.to_dict()
        for name, preset in PRESETS.items()
        for law_name, law in (("batch", preset.batch), ("lr", preset.lr), ("surface", preset.surface))
        if law is not None
    }
    payload = {
        "unit_conventions": units,
        "allocation_slopes": allocation,
        "mse": mse,
        "parameter_saving": saving,
        "reported_parameter_saving_pct": REPORTED["parameter_saving_pct"],
        "plan": {"computed": plan_video, "reported": REPORTED["plan"]},
        "loss_checkpoints": checkpoints,
        "image_checkpoint": image_check,
        "predicted_exponents": exponents,
        "artifacts": artifacts,
    }
    ws.json("report.json", "report", payload)
    rows = []
    for r in allocation:
        h = r["hyperparameters"]
        rows.append(["allocation", f"{h} slope abs err", r["slope_abs_err"], r["reported_abs_err"]])
        rows.append(["allocation", f"{h} slope rel err %", r["slope_rel_err_pct"], r["reported_rel_err_pct"]])
    rows.append(["mse", "reduction %", mse["reduction_pct"], mse["reported_reduction_pct"]])
    for s in saving:
        rows.append(["saving", f"{s['smaller']} vs {s['larger']} %", s["saving_pct"], REPORTED["parameter_saving_pct"]])
    for k in ("N_opt", "n_layer", "N", "batch_samples", "lr"):
        rows.append(["plan", k, plan_video[k], REPORTED["plan"][k]])
    rows.append(["plan", "predicted_loss", plan_video["predicted_loss"], ""])
    for c in checkpoints:
        rows.append(["checkpoint", c["label"], c["predicted"], ""])
    rows.append(["image", "predicted loss", image_pred, img["predicted"]])
    for name, e in exponents.items():
        rows.append(["exponent", f"{name} predicted", e["predicted_exponent"], e["reported_predicted_exponent"]])
    for k, u in units.items():
        rows.append(["units", k, f"T/{u['token_unit']:g} N/{u['param_unit']:g} B in {u['batch_unit']}", ""])
    ws.csv("report.csv", ["section", "item", "computed", "reported"], rows)
    return {
        "allocation_slopes": [
            {k: r[k] for k in ("hyperparameters", "slope_abs_err", "slope_rel_err_pct")} for r in allocation
        ],
        "mse_reduction_pct": mse["reduction_pct"],
        "parameter_saving_pct": {f"{s['smaller']} vs {s['larger']}": s["saving_pct"] for s in saving},
        "image_discrepancy": image_check["discrepancy"],
    }


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config (width_ratio, n_ctx, n_text, preset, units)")
    common.add_argument("--out", type=Path, default=Path("."), help="artifact directory (default: .)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="stdout summary format")

    parser = argparse.ArgumentParser(prog=TOOL, description="Scaling-law toolkit for diffusion transformers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-hparams", parents=[common], help="fit batch-size and learning-rate laws")
    p.add_argument("runs", type=Path, help="run file (CSV or JSON)")
    p.add_argument("--rel-tol", type=float, default=2e-4, help="keep runs within this fraction of the best loss")
    p.set_defaults(func=cmd_fit_hparams)

    p = sub.add_parser("fit-loss", parents=[common], help="fit the loss surface")
    p.add_argument("runs", type=Path)
    p.add_argument("--objective", choices=("squared", "huber"), default="squared")
    p.add_argument("--huber-delta", type=float, default=1e-3)
    p.set_defaults(func=cmd_fit_loss)

    p = sub.add_parser("isoflop", parents=[common], help="IsoFLOP profiles and the optimal-size law")
    p.add_argument("--runs", type=Path, help="measured runs for empirical profiles")
    p.add_argument("--surface", help=f"surface preset ({', '.join(sorted(SURFACES))}) or fitted surface JSON")
    p.add_argument("--budgets", type=float, nargs="+", help="compute budgets in FLOPs")
    p.add_argument("--rel-tol", type=float, default=0.01, help="budget matching tolerance for measured runs")
    p.add_argument("--verbatim", action="store_true", help="drop the exponent on the constrained data term")
    p.set_defaults(func=cmd_isoflop)

    p = sub.add_parser("plan", parents=[common], help="model size, tokens and hyperparameters for a budget")
    p.add_argument("--compute", "-C", type=float, required=True, help="compute budget in FLOPs")
    p.add_argument("--preset", choices=sorted(PRESETS), help="defaults to the config preset")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", parents=[common], help="synthetic runs from SGD or from known laws")
    p.add_argument("sim", type=Path, help="JSON simulation file with 'kind': sgd | sweep | laws")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="comparison report against published values")
    p.add_argument("artifacts", type=Path, nargs="*", help="JSON artifacts from other subcommands")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.config)
        ws = Workspace(args, settings)
        summary = args.func(args, ws)
    except (SingularFitError, NoInteriorMinimumError, SurfaceFitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        best = getattr(exc, "best", None)
        if isinstance(best, LossSurface):
            diag["best"] = best.to_dict()
        if hasattr(exc, "objective"):
            diag["objective"] = exc.objective
        print(json.dumps(_clean(diag), indent=2), file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConfigError, RunFileError, ValueError, KeyError, TypeError, OSError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
        print(f"{TOOL} {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    _emit(ws, summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
