import csv
import json

import numpy as np
import pytest

from dit_scaling.cli import main
from dit_scaling.config import load_settings


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


@pytest.fixture
def laws_file(tmp_path):
    (tmp_path / "inputs").mkdir()
    p = tmp_path / "inputs" / "laws.json"
    p.write_text(json.dumps({"kind": "laws", "preset": "video", "n_layers": [4, 6, 8, 10]}))
    return p


def test_plan_reports_values_next_to_reference(tmp_path, capsys):
    code, out, _ = run(capsys, "plan", "-C", "5.85e20", "--out", tmp_path)
    assert code == 0
    summary = json.loads(out)
    plan = summary["plan"]
    assert plan["n_layer"] == 14 and plan["N"] == 719_323_136
    assert plan["N_opt"] == pytest.approx(0.64e9, abs=0.01e9)
    assert plan["lr"] == pytest.approx(1.686e-4, rel=1e-3)
    assert summary["reported"]["batch_samples"] == 832
    assert abs(plan["batch_samples"] / 832 - 1) < 0.1
    assert plan["predicted_loss"] == pytest.approx(0.8163, abs=1e-4)
    header, rows = read_csv(tmp_path / "plan.csv")
    assert header == ["quantity", "value", "reported"]


def test_plan_for_image_preset(tmp_path, capsys):
    code, out, _ = run(capsys, "plan", "-C", "1e20", "--preset", "image", "--out", tmp_path)
    assert code == 0
    plan = json.loads(out)["plan"]
    assert plan["n_ctx"] == 256 and "reported" not in json.loads(out)


def test_report_values(tmp_path, capsys):
    code, out, _ = run(capsys, "report", "--out", tmp_path)
    assert code == 0
    s = json.loads(out)
    opt, fixed = s["allocation_slopes"]
    assert (round(opt["slope_abs_err"], 4), round(opt["slope_rel_err_pct"], 2)) == (0.0148, 3.57)
    assert (round(fixed["slope_abs_err"], 4), round(fixed["slope_rel_err_pct"], 2)) == (0.1581, 30.26)
    assert s["mse_reduction_pct"] == pytest.approx(45.5, abs=0.1)
    assert s["image_discrepancy"] == pytest.approx(0.9666 - 0.6414, abs=1e-3)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["image_checkpoint"]["reported_predicted"] == 0.6414
    assert report["unit_conventions"]["image.batch"]["batch_unit"] == "tokens"
    assert report["unit_conventions"]["video.surface"]["token_unit"] == 1e9


def test_synthetic_round_trip_recovers_laws(tmp_path, capsys, laws_file):
    assert run(capsys, "simulate", laws_file, "--out", tmp_path, "--format", "csv")[0] == 0
    code, out, _ = run(capsys, "fit-hparams", tmp_path / "simulated_runs.csv", "--out", tmp_path)
    assert code == 0
    s = json.loads(out)
    assert s["lr"]["beta"] == pytest.approx(-0.0453, abs=1e-6)
    assert s["lr"]["gamma"] == pytest.approx(-0.1619, abs=1e-6)
    # batch sizes are whole samples on disk, so the batch law is only close
    assert s["batch"]["beta"] == pytest.approx(0.808, abs=0.02)
    assert s["batch"]["gamma"] == pytest.approx(0.1906, abs=0.02)


def test_fit_loss_and_isoflop(tmp_path, capsys, laws_file):
    run(capsys, "simulate", laws_file, "--out", tmp_path, "--format", "csv")
    code, out, _ = run(capsys, "fit-loss", tmp_path / "simulated_runs.csv", "--out", tmp_path)
    assert code == 0
    params = json.loads(out)["params"]
    assert params["L_inf"] == pytest.approx(0.4856, rel=1e-4)
    code, out, _ = run(capsys, "isoflop", "--surface", tmp_path / "loss_surface.json", "--out", tmp_path)
    assert code == 0
    assert json.loads(out)["predicted"]["exponent"] == pytest.approx(0.477, abs=2e-3)
    code, out, _ = run(capsys, "report", tmp_path / "loss_surface.json", tmp_path / "isoflop.json", "--out", tmp_path)
    assert code == 0
    arts = json.loads((tmp_path / "report.json").read_text())["artifacts"]
    assert [a["kind"] for a in arts] == ["loss_surface", "isoflop"]


def test_empirical_isoflop_from_runs(tmp_path, capsys):
    from dit_scaling.compute import ComputeConfig, ModelShape, compute_per_token
    from dit_scaling.presets import VIDEO_SURFACE

    cfg = ComputeConfig()
    lines = ["run_id,n_layer,width_ratio,n_ctx,batch_samples,lr,tokens_seen,val_loss"]
    for C in (1e18, 1e19):
        for n in range(2, 16):
            T = C / compute_per_token(ModelShape(n), cfg)
            loss = VIDEO_SURFACE(T / 1e9, ModelShape(n).n_params / 1e9)
            lines.append(f"C{C:g}-L{n},{n},128,1280,64,0.0001,{T!r},{loss!r}")
    p = tmp_path / "iso.csv"
    p.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "isoflop", "--runs", p, "--surface", "video", "--budgets", "1e18", "1e19",
                       "--out", tmp_path)
    assert code == 0
    s = json.loads(out)
    assert s["empirical"]["exponent"] > 0 and "slope_abs_err" in s


def test_noiseless_simulation_matches_geometric_decay(tmp_path, capsys):
    lam = [1.0, 0.5, 0.25]
    theta0 = [1.0, 1.0, -2.0]
    sim = {"kind": "sgd", "eigenvalues": lam, "noise_scale": 0.0, "rotate": False, "theta0": theta0,
           "L_star": 1.0, "configs": [{"eta": 1.0, "B": 1, "steps": 20}]}
    p = tmp_path / "sgd.json"
    p.write_text(json.dumps(sim))
    assert run(capsys, "simulate", p, "--out", tmp_path, "--format", "csv")[0] == 0
    header, rows = read_csv(tmp_path / "simulated_runs.csv")
    k = np.array([float(r[header.index("tokens_seen")]) for r in rows])
    loss = np.array([float(r[header.index("val_loss")]) for r in rows])
    lam, theta0 = np.array(lam), np.array(theta0)
    expected = 1.0 + 0.5 * (lam * theta0**2 * (1 - lam) ** (2 * k[:, None])).sum(axis=1)
    assert np.allclose(loss, expected, rtol=1e-15)


def test_sweep_simulation(tmp_path, capsys):
    sim = {"kind": "sweep", "dim": 8, "theta0_scale": 3.0, "token_budget": 256, "batch_sizes": [1, 4, 16],
           "learning_rates": [0.1, 0.4, 0.8]}
    p = tmp_path / "sweep.json"
    p.write_text(json.dumps(sim))
    code, out, _ = run(capsys, "simulate", p, "--out", tmp_path, "--seed", "3")
    assert code == 0
    header, rows = read_csv(tmp_path / "sweep.csv")
    assert header == ["B", "eta", "steps", "final_loss"] and len(rows) == 9


ALL_COMMANDS = [
    ("plan", "-C", "1e21"),
    ("report",),
    ("isoflop", "--surface", "video-fixed"),
]


def _snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_reruns_are_byte_identical(tmp_path, capsys, laws_file):
    snaps = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for cmd in ALL_COMMANDS:
            assert run(capsys, *cmd, "--out", out, "--seed", "5")[0] == 0
        run(capsys, "simulate", laws_file, "--out", out, "--seed", "5", "--format", "csv")
        run(capsys, "fit-hparams", tmp_path / "run0" / "simulated_runs.csv", "--out", out)
        snaps.append(_snapshot(out))
    assert snaps[0].keys() == snaps[1].keys()
    assert snaps[0] == snaps[1]


def test_artifacts_carry_provenance(tmp_path, capsys, laws_file):
    run(capsys, "simulate", laws_file, "--out", tmp_path, "--format", "csv")
    run(capsys, "fit-hparams", tmp_path / "simulated_runs.csv", "--out", tmp_path)
    digest = load_settings().hash
    for p in tmp_path.iterdir():
        if p.is_dir():
            continue
        text = p.read_text()
        head = text.splitlines()[0 if p.suffix == ".csv" else 1]
        assert digest in head if p.suffix != ".json" else digest in text, p.name
        if p.suffix == ".svg":
            assert p.with_suffix(".csv").exists()
            assert text.startswith("<?xml") and "<svg" in text
    doc = json.loads((tmp_path / "hparams.json").read_text())
    assert doc["provenance"]["config_hash"] == digest
    assert doc["provenance"]["version"]


def test_config_changes_the_hash(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "image", "n_ctx": 300}))
    run(capsys, "plan", "-C", "1e20", "--config", cfg, "--out", tmp_path)
    doc = json.loads((tmp_path / "plan.json").read_text())
    assert doc["config"]["n_ctx"] == 300 and doc["plan"]["n_ctx"] == 300
    assert doc["provenance"]["config_hash"] != load_settings().hash


def test_empty_run_file_is_a_validation_error(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("")
    code, _, err = run(capsys, "fit-hparams", p, "--out", tmp_path)
    assert code == 2 and "empty" in err


@pytest.mark.parametrize(
    "config, fragment",
    [({"colour": 1}, "unknown config keys"), ({"preset": "audio"}, "unknown preset"), ({"n_ctx": 0}, "n_ctx")],
)
def test_bad_config_is_a_usage_error(tmp_path, capsys, config, fragment):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    code, _, err = run(capsys, "report", "--config", cfg, "--out", tmp_path)
    assert code == 2 and fragment in err


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["plan", "-C", "1e20", "--preset", "audio"])
    assert info.value.code == 2
    assert run(capsys, "isoflop", "--out", tmp_path)[0] == 2
    assert run(capsys, "fit-loss", tmp_path / "missing.csv", "--out", tmp_path)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "laws", "preset": "video-fixed"}))
    assert run(capsys, "simulate", bad, "--out", tmp_path)[0] == 2


def test_numeric_failure_exit_code(tmp_path, capsys):
    p = tmp_path / "one_size.csv"
    rows = ["run_id,n_layer,width_ratio,n_ctx,batch_samples,lr,tokens_seen,val_loss"]
    rows += [f"r{k},4,128,1280,{8 * (k + 1)},0.0001,{(k + 1) * 1e9},1.0" for k in range(4)]
    p.write_text("\n".join(rows) + "\n")
    code, _, err = run(capsys, "fit-hparams", p, "--out", tmp_path)
    assert code == 3
    diag = json.loads(err)
    assert diag["error"] == "SingularFitError" and "N" in diag["message"]


def test_csv_summary_format(tmp_path, capsys):
    code, out, _ = run(capsys, "plan", "-C", "5.85e20", "--out", tmp_path, "--format", "csv")
    assert code == 0
    rows = dict(list(csv.reader(out.splitlines()))[1:])
    assert rows["plan.n_layer"] == "14"
