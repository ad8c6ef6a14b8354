"""Command-line front end wiring the pipeline end to end.

Commands: simulate, fit, cluster, select-k, evaluate, spectrum.
Every command is a pure function of (config, input files, seed); reruns
produce byte-identical outputs regardless of --threads.

Exit codes: 0 success, 2 validation error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import evaluation, selection
from .config import echo_config, load_config, parse_shared
from .dataset import load_csv, power_spectrum, standardize, write_csv
from .errors import NumericalError, ValidationError
from .projection import project_cluster
from .replicate import subject_metrics
from .sampler import gibbs_fit, load_draws, save_draws, split_rhat
from .synthgen import SynthConfig, generate_example1

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"validation error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except NumericalError as exc:
            click.echo(f"numerical error: {exc}", err=True)
            sys.exit(EXIT_NUMERICAL)
        except OSError as exc:
            click.echo(f"I/O error: {exc}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
def main():
    """Bayesian projection clustering for longitudinal data."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--n-per-group", type=int, default=None)
@click.option("--timepoints", type=int, default=None)
@click.option("--noise-var", type=float, default=None)
@_handle_errors
def simulate(config_path, out, seed, n_per_group, timepoints, noise_var):
    """Generate the four-group synthetic dataset (data.csv, labels.csv)."""
    cfg = load_config(config_path, {"seed": seed})
    sim = dict(cfg.raw.get("simulate", {}))
    if n_per_group is not None:
        sim["n_per_group"] = n_per_group
    if timepoints is not None:
        sim["timepoints"] = timepoints
    if noise_var is not None:
        sim["noise_var"] = noise_var
    cfg.raw["simulate"] = sim
    synth = SynthConfig(
        n_per_group=int(sim.get("n_per_group", 10)),
        n_times=int(sim.get("timepoints", 40)),
        noise_var=float(sim.get("noise_var", 0.1)),
        seed=cfg.seed,
    )
    ds, labels = generate_example1(synth)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out_dir)
    write_csv(ds, out_dir / "data.csv")
    with open(out_dir / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "label"])
        for subj, lab in zip(ds.subjects, labels):
            writer.writerow([subj.id, int(lab)])
    click.echo(f"wrote {ds.n} subjects to {out_dir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=1)
@click.option("--force", is_flag=True)
@_handle_errors
def fit(config_path, out, seed, threads, force):
    """Standardize, build designs, run the Gibbs sampler, save draws."""
    cfg = load_config(config_path, {"seed": seed})
    out_dir = Path(out)
    draws_path = out_dir / "draws.jsonl"
    if draws_path.exists() and not force:
        raise ValidationError(f"{draws_path} exists; pass --force to overwrite")
    ds = load_csv(cfg.input)
    ds, _transform = standardize(ds)
    spec = cfg.model_spec()
    mcmc = cfg.mcmc()
    draws = gibbs_fit(ds, spec, mcmc, threads=threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out_dir)
    subject_ids = [s.id for s in ds.subjects]
    save_draws(draws_path, draws, subject_ids)

    diagnostics = {"n_draws": len(draws), "n_chains": mcmc.n_chains}
    if mcmc.n_chains >= 2:
        per_chain = lambda f: [
            np.array([f(d) for d in draws if d.chain == c])
            for c in range(mcmc.n_chains)
        ]
        rhat = {"sigma2": split_rhat(per_chain(lambda d: d.sigma2))}
        for j in range(len(draws[0].beta)):
            rhat[f"beta[{j}]"] = split_rhat(per_chain(lambda d, j=j: d.beta[j]))
        diagnostics["split_rhat"] = rhat
    for name in ("sigma2",):
        vals = np.array([d.sigma2 for d in draws])
        diagnostics[f"{name}_mean"] = float(vals.mean())
        diagnostics[f"{name}_sd"] = float(vals.std(ddof=1))
    _write_json(out_dir / "diagnostics.json", diagnostics)
    click.echo(f"wrote {len(draws)} draws to {draws_path}")


def _cluster_one(args):
    s, draw, ds, spec, K, restarts, seed = args
    b_A, Qinv = subject_metrics(ds, spec, draw)
    part_seed = int(np.random.SeedSequence(entropy=(seed, s)).generate_state(1)[0])
    return project_cluster(b_A, Qinv, K, n_restarts=restarts, seed=part_seed)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--draws", "draws_path", type=click.Path(exists=True), required=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--k", type=int, default=None)
@click.option("--shared", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=1)
@_handle_errors
def cluster(config_path, draws_path, out, k, shared, seed, threads):
    """Per-draw KL projection clustering plus the coincidence matrix."""
    overrides = {"seed": seed, "shared": shared}
    if k is not None:
        overrides["k"] = k
    cfg = load_config(config_path, overrides)
    ds = load_csv(cfg.input)
    ds, _ = standardize(ds)
    spec = cfg.model_spec()
    mode, value = cfg.k_or_selection()
    if mode != "k":
        raise ValidationError("cluster needs a fixed 'k'; run select-k first")
    K = value
    draws, subject_ids = load_draws(draws_path)
    if subject_ids != [s.id for s in ds.subjects]:
        raise ValidationError("draw file subjects do not match the input dataset")

    tasks = [
        (s, draw, ds, spec, K, cfg.restarts, cfg.seed)
        for s, draw in enumerate(draws)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_cluster_one, tasks))
    else:
        parts = [_cluster_one(t) for t in tasks]

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out_dir)
    with open(out_dir / "partitions.jsonl", "w") as fh:
        fh.write(
            json.dumps({"record": "header", "K": K, "subject_ids": subject_ids}) + "\n"
        )
        for s, part in enumerate(parts):
            fh.write(part.to_json(s) + "\n")

    C = evaluation.coincidence([p.labels for p in parts])
    with open(out_dir / "coincidence.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject"] + subject_ids)
        for sid, row in zip(subject_ids, C):
            writer.writerow([sid] + [repr(float(v)) for v in row])
    _write_json(out_dir / "coincidence_summary.json", evaluation.threshold_summary(C))
    click.echo(f"wrote {len(parts)} partitions to {out_dir}")


@main.command("select-k")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--draws", "draws_path", type=click.Path(exists=True), required=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@_handle_errors
def select_k(config_path, draws_path, out, seed):
    """Choose the number of clusters by the KL-ratio and/or bootstrap rule."""
    cfg = load_config(config_path, {"seed": seed})
    mode, sel = cfg.k_or_selection()
    if mode != "selection":
        raise ValidationError("select-k needs a 'selection' block in the config")
    ds = load_csv(cfg.input)
    ds, _ = standardize(ds)
    spec = cfg.model_spec()
    draws, subject_ids = load_draws(draws_path)
    if subject_ids != [s.id for s in ds.subjects]:
        raise ValidationError("draw file subjects do not match the input dataset")

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out_dir)
    report = {}
    method = sel["method"]
    k_max = int(sel.get("k_max", 30))

    if method in ("kl", "both"):
        S = int(sel.get("s", min(len(draws), 100)))
        curve = selection.kl_curve(
            ds, spec, draws, K_max=min(k_max, ds.n), S=S,
            seed=cfg.seed, n_restarts=cfg.restarts,
        )
        with open(out_dir / "kl_curve.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["K", "KL_K"])
            for kk, v in zip(curve.k_values, curve.kl):
                writer.writerow([int(kk), repr(float(v))])
        report["kl"] = {
            "epsilon": float(sel.get("epsilon", 0.1)),
            "K": selection.choose_k_kl(curve, float(sel.get("epsilon", 0.1))),
        }

    if method in ("bootstrap", "both"):
        B = int(sel.get("b", 100))
        max_draws = int(sel.get("max_draws", 200))
        _times, fitted = selection.fitted_mean_matrix(ds, spec, draws, max_draws)
        curve = selection.instability_curve(
            fitted, K_max=min(k_max, ds.n), B=B, seed=cfg.seed,
            n_restarts=cfg.restarts,
        )
        with open(out_dir / "instability_curve.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["K", "I_K"])
            for kk, v in zip(curve.k_values, curve.instability):
                writer.writerow([int(kk), repr(float(v))])
        report["bootstrap"] = {"B": B, "K": selection.choose_k_bootstrap(curve)}

    _write_json(out_dir / "chosen_k.json", report)
    click.echo(json.dumps(report, sort_keys=True))


@main.command()
@click.option("--partitions", "partitions_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None)
@_handle_errors
def evaluate(partitions_path, labels_path, out):
    """Mean/sd of Rand and adjusted Rand indices across per-draw partitions."""
    with open(partitions_path) as fh:
        header = json.loads(fh.readline())
        if header.get("record") != "header":
            raise ValidationError(f"{partitions_path}: missing header record")
        subject_ids = header["subject_ids"]
        label_sets = []
        for line in fh:
            if line.strip():
                label_sets.append(np.asarray(json.loads(line)["labels"]))
    if not label_sets:
        raise ValidationError(f"{partitions_path}: no partitions")

    truth_by_id = {}
    with open(labels_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "subject" not in reader.fieldnames:
            raise ValidationError(f"{labels_path}: expected header subject,label")
        for row in reader:
            truth_by_id[row["subject"]] = row["label"]
    missing = [sid for sid in subject_ids if sid not in truth_by_id]
    if missing:
        raise ValidationError(f"labels missing for subjects: {missing[:5]}")
    truth = np.asarray([truth_by_id[sid] for sid in subject_ids])

    report = evaluation.index_report(label_sets, truth)
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "evaluation.json", report)
    click.echo(json.dumps(report, sort_keys=True))


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--n-freq", type=int, default=40)
@click.option("--window", type=float, default=0.5)
@_handle_errors
def spectrum(input_path, out, n_freq, window):
    """Per-subject power spectra of the response series (long-format CSV in,
    subject,frequency_bin,power CSV out)."""
    ds = load_csv(input_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "spectrum.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "frequency_bin", "power"])
        for subj in ds.subjects:
            ps = power_spectrum(subj.y, n_freq=n_freq, h=window)
            for k, v in enumerate(ps, start=1):
                writer.writerow([subj.id, k, repr(float(v))])
    click.echo(f"wrote spectra for {ds.n} subjects to {out_dir}")


if __name__ == "__main__":
    main()
