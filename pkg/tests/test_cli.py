import filecmp
import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from projclust.cli import main
from projclust.config import load_config, parse_shared
from projclust.errors import ValidationError


@pytest.fixture()
def runner():
    return CliRunner()


def _write_config(path: Path, **extra) -> Path:
    cfg = {
        "input": extra.pop("input"),
        "seed": 1,
        "basis": {"kind": "fourier", "order": 3},
        "shared": "all",
        "mcmc": {"chains": 2, "iterations": 12, "burn_in": 6},
    }
    cfg.update(extra)
    path.write_text(yaml.safe_dump(cfg))
    return path


def _simulate(runner, out_dir, n_per_group=2, timepoints=12, seed=3):
    result = runner.invoke(
        main,
        [
            "simulate", "--out", str(out_dir), "--seed", str(seed),
            "--n-per-group", str(n_per_group), "--timepoints", str(timepoints),
        ],
    )
    assert result.exit_code == 0, result.output
    return out_dir / "data.csv", out_dir / "labels.csv"


# --- shared-set parsing ------------------------------------------------------

def test_parse_shared_forms():
    assert parse_shared([0, 2], 4) == (0, 2)
    assert parse_shared("all", 3) == (0, 1, 2)
    assert parse_shared("low:0..3", 10) == (0, 1, 2, 3)
    assert parse_shared("high:7..9", 10) == (7, 8, 9)


def test_parse_shared_rejections():
    for bad in ("bogus", "low", [], [5], [-1]):
        with pytest.raises(ValidationError):
            parse_shared(bad, 4)


def test_config_k_xor_selection(tmp_path):
    cfg = load_config(None, {"input": "x.csv"})
    with pytest.raises(ValidationError):
        cfg.k_or_selection()
    cfg.raw.update({"k": 3, "selection": {"method": "kl"}})
    with pytest.raises(ValidationError):
        cfg.k_or_selection()


# --- simulate ---------------------------------------------------------------

def test_simulate_defaults(runner, tmp_path):
    out = tmp_path / "sim"
    result = runner.invoke(main, ["simulate", "--out", str(out), "--seed", "0"])
    assert result.exit_code == 0
    rows = (out / "data.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 40 * 40  # header + 40 subjects x 40 timepoints
    labels = (out / "labels.csv").read_text().strip().splitlines()
    assert labels[0] == "subject,label"
    assert len(labels) == 41


def test_simulate_seed_byte_identity(runner, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _simulate(runner, a)
    _simulate(runner, b)
    assert filecmp.cmp(a / "data.csv", b / "data.csv", shallow=False)


def test_simulate_invalid_size_exits_2(runner, tmp_path):
    result = runner.invoke(
        main, ["simulate", "--out", str(tmp_path / "s"), "--n-per-group", "0"]
    )
    assert result.exit_code == 2


# --- fit --------------------------------------------------------------------

def test_fit_and_overwrite_guard(runner, tmp_path):
    data, _ = _simulate(runner, tmp_path / "sim")
    cfg = _write_config(tmp_path / "cfg.yaml", input=str(data))
    out = tmp_path / "fit"
    result = runner.invoke(main, ["fit", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "draws.jsonl").exists()
    assert (out / "config_echo.yaml").exists()
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["n_draws"] == 12  # 2 chains x 6 kept iterations
    assert "split_rhat" in diag

    # second run without --force must refuse
    result = runner.invoke(main, ["fit", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 2
    result = runner.invoke(
        main, ["fit", "--config", str(cfg), "--out", str(out), "--force"]
    )
    assert result.exit_code == 0


def test_fit_missing_input_exits_4(runner, tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml", input=str(tmp_path / "missing.csv"))
    result = runner.invoke(main, ["fit", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 4


def test_fit_bad_csv_exits_2(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("subject,time,y\na,0.1,not_a_number\n")
    cfg = _write_config(tmp_path / "cfg.yaml", input=str(bad))
    result = runner.invoke(main, ["fit", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_shared_out_of_range_fails_before_sampling(runner, tmp_path):
    data, _ = _simulate(runner, tmp_path / "sim")
    cfg = _write_config(tmp_path / "cfg.yaml", input=str(data), shared=[0, 9])
    result = runner.invoke(main, ["fit", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2
    assert "shared indices" in result.output


# --- cluster / evaluate -----------------------------------------------------

@pytest.fixture()
def fitted_run(runner, tmp_path):
    data, labels = _simulate(runner, tmp_path / "sim")
    cfg = _write_config(tmp_path / "cfg.yaml", input=str(data), k=4)
    out = tmp_path / "fit"
    result = runner.invoke(main, ["fit", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return cfg, out / "draws.jsonl", labels, tmp_path


def test_cluster_outputs(runner, fitted_run):
    cfg, draws, labels, tmp_path = fitted_run
    out = tmp_path / "clust"
    result = runner.invoke(
        main,
        ["cluster", "--config", str(cfg), "--draws", str(draws), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    lines = (out / "partitions.jsonl").read_text().strip().splitlines()
    header = json.loads(lines[0])
    assert header["record"] == "header" and header["K"] == 4
    assert len(lines) - 1 == 12  # one partition per draw
    for line in lines[1:]:
        rec = json.loads(line)
        assert len(rec["labels"]) == 8
    assert (out / "coincidence.csv").exists()
    summary = json.loads((out / "coincidence_summary.json").read_text())
    assert summary["n_pairs"] == 8 * 7 // 2

    # evaluate against the simulation truth
    result = runner.invoke(
        main,
        ["evaluate", "--partitions", str(out / "partitions.jsonl"),
         "--labels", str(labels)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output.strip().splitlines()[-1])
    assert set(report) == {"rand_mean", "rand_sd", "ari_mean", "ari_sd"}


def test_cluster_rerun_byte_identity(runner, fitted_run):
    cfg, draws, _labels, tmp_path = fitted_run
    outs = []
    for name in ("c1", "c2"):
        out = tmp_path / name
        result = runner.invoke(
            main,
            ["cluster", "--config", str(cfg), "--draws", str(draws),
             "--out", str(out), "--threads", "2" if name == "c2" else "1"],
        )
        assert result.exit_code == 0, result.output
        outs.append(out)
    for fname in ("partitions.jsonl", "coincidence.csv", "coincidence_summary.json"):
        assert filecmp.cmp(outs[0] / fname, outs[1] / fname, shallow=False), fname


def test_cluster_requires_fixed_k(runner, fitted_run):
    cfg, draws, _labels, tmp_path = fitted_run
    cfg2 = tmp_path / "sel.yaml"
    raw = yaml.safe_load(Path(cfg).read_text())
    del raw["k"]
    raw["selection"] = {"method": "kl"}
    cfg2.write_text(yaml.safe_dump(raw))
    result = runner.invoke(
        main,
        ["cluster", "--config", str(cfg2), "--draws", str(draws),
         "--out", str(tmp_path / "c")],
    )
    assert result.exit_code == 2


def test_evaluate_missing_labels_exits_2(runner, fitted_run, tmp_path):
    cfg, draws, _labels, base = fitted_run
    out = base / "clust_eval"
    result = runner.invoke(
        main, ["cluster", "--config", str(cfg), "--draws", str(draws), "--out", str(out)]
    )
    assert result.exit_code == 0
    wrong = tmp_path / "wrong_labels.csv"
    wrong.write_text("subject,label\nnot_a_subject,1\n")
    result = runner.invoke(
        main,
        ["evaluate", "--partitions", str(out / "partitions.jsonl"),
         "--labels", str(wrong)],
    )
    assert result.exit_code == 2


# --- select-k ----------------------------------------------------------------

def test_select_k_both_methods(runner, fitted_run):
    cfg, draws, _labels, tmp_path = fitted_run
    cfg2 = tmp_path / "sel.yaml"
    raw = yaml.safe_load(Path(cfg).read_text())
    del raw["k"]
    raw["selection"] = {"method": "both", "k_max": 8, "s": 4, "b": 5, "epsilon": 0.9}
    cfg2.write_text(yaml.safe_dump(raw))
    out = tmp_path / "sel"
    result = runner.invoke(
        main, ["select-k", "--config", str(cfg2), "--draws", str(draws), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert (out / "kl_curve.csv").exists()
    assert (out / "instability_curve.csv").exists()
    chosen = json.loads((out / "chosen_k.json").read_text())
    assert 1 <= chosen["kl"]["K"] <= 8
    assert 2 <= chosen["bootstrap"]["K"] <= 8


# --- spectrum ----------------------------------------------------------------

def test_spectrum_command(runner, tmp_path):
    data, _ = _simulate(runner, tmp_path / "sim", timepoints=16)
    out = tmp_path / "spec"
    result = runner.invoke(
        main, ["spectrum", "--input", str(data), "--out", str(out), "--n-freq", "8"]
    )
    assert result.exit_code == 0, result.output
    rows = (out / "spectrum.csv").read_text().strip().splitlines()
    assert rows[0] == "subject,frequency_bin,power"
    assert len(rows) == 1 + 8 * 8  # 8 subjects x 8 frequency bins
