"""Command-line front end.

Subcommands: gen, train, attack, eval, ensemble, defend-eval, report.  Every
flag can also come from a JSON config file (--config); explicit flags win.
Worker count for experiment grids comes from AMCLAB_WORKERS.

Exit codes: 0 ok, 2 invalid configuration, 3 numeric failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from amclab import architectures, attacks, defenses, harness, reports
from amclab.models import TrainedModel, train_model
from amclab.nn import TrainConfig, TrainingDiverged
from amclab.signals import (Domain, GenerationConfig, LabeledDataset, Split,
                            generate_dataset, load_dataset, save_dataset)
from amclab.spectral import dft_matrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _run(fn):
    try:
        fn()
    except (TrainingDiverged, FloatingPointError) as exc:
        _fail(EXIT_NUMERIC, str(exc))
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, str(exc))


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _opt(ctx: click.Context, config: dict, name: str, value):
    """Explicit command-line flags beat config-file values beat defaults."""
    src = ctx.get_parameter_source(name)
    if src is not None and src.name == "COMMANDLINE":
        return value
    return config.get(name, value)


def _to_freq(ds: LabeledDataset) -> LabeledDataset:
    mats = dft_matrix(ds.matrices().astype(np.float64))
    return LabeledDataset(
        samples=mats[:, :, 0] + 1j * mats[:, :, 1],
        labels=ds.labels, class_names=list(ds.class_names), split=ds.split,
        domain=Domain.FREQUENCY, snr_db=ds.snr_db, seed=ds.seed,
        meta=dict(ds.meta))


def _load_domain_dataset(path: str, domain: str) -> LabeledDataset:
    ds = load_dataset(path)
    domain = Domain(domain)
    if ds.domain is domain:
        return ds
    if ds.domain is Domain.TIME and domain is Domain.FREQUENCY:
        return _to_freq(ds)
    raise ValueError("cannot derive a time-domain set from a frequency one")


def _split_arrays(ds: LabeledDataset, split: Split):
    sub = ds.subset(split)
    return sub.matrices().astype(np.float64), sub.labels


@click.group()
def main():
    """Desk-scale AMC adversarial-interference laboratory."""


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--schemes", default="CPFSK,GFSK,PAM4,QPSK", show_default=True)
@click.option("--per-class", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--snr-db", default=18.0, show_default=True)
@click.option("--length", default=128, show_default=True)
@click.option("--out", required=True, help="Output path prefix.")
@click.pass_context
def gen(ctx, config_path, schemes, per_class, seed, snr_db, length, out):
    """Generate a synthetic labeled dataset."""
    def body():
        config = _load_config(config_path)
        cfg = GenerationConfig(
            schemes=tuple(str(_opt(ctx, config, "schemes", schemes)).split(",")),
            per_class=int(_opt(ctx, config, "per_class", per_class)),
            seed=int(_opt(ctx, config, "seed", seed)),
            snr_db=float(_opt(ctx, config, "snr_db", snr_db)),
            length=int(_opt(ctx, config, "length", length)),
            fading=bool(config.get("fading", False)),
            cfo=bool(config.get("cfo", False)),
            sro=bool(config.get("sro", False)),
        )
        ds = generate_dataset(cfg)
        paths = save_dataset(ds, _opt(ctx, config, "out", out))
        click.echo(f"wrote {paths[0]} and {paths[1]} ({len(ds)} signals)")
    _run(body)


@main.command()
@click.option("--config", "config_path", default=None)
@click.option("--dataset", required=True, help="Dataset path prefix.")
@click.option("--arch", default="CNN", show_default=True,
              type=click.Choice(architectures.ARCH_IDS[:5]))
@click.option("--domain", default="time", show_default=True,
              type=click.Choice(["time", "frequency"]))
@click.option("--width-scale", default=1.0, show_default=True)
@click.option("--max-epochs", default=500, show_default=True)
@click.option("--patience", default=50, show_default=True)
@click.option("--batch-size", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="Checkpoint path prefix.")
@click.pass_context
def train(ctx, config_path, dataset, arch, domain, width_scale, max_epochs,
          patience, batch_size, seed, out):
    """Train one classifier and save its checkpoint."""
    def body():
        config = _load_config(config_path)
        domain_v = str(_opt(ctx, config, "domain", domain))
        ds = _load_domain_dataset(str(_opt(ctx, config, "dataset", dataset)),
                                  domain_v)
        xt, yt = _split_arrays(ds, Split.TRAIN)
        xv, yv = _split_arrays(ds, Split.VAL)
        arch_v = str(_opt(ctx, config, "arch", arch))
        scale = float(_opt(ctx, config, "width_scale", width_scale))
        cfg = TrainConfig(
            batch_size=int(_opt(ctx, config, "batch_size", batch_size)),
            max_epochs=int(_opt(ctx, config, "max_epochs", max_epochs)),
            patience=int(_opt(ctx, config, "patience", patience)),
            seed=int(_opt(ctx, config, "seed", seed)))
        specs = architectures.build(arch_v, ds.length, ds.num_classes, scale)
        model = train_model(arch_v, specs, xt, yt, xv, yv, ds.domain,
                            ds.class_names, cfg)
        acc, _ = harness.eval_accuracy(model, ds.subset(Split.TEST))
        paths = model.save(_opt(ctx, config, "out", out))
        click.echo(f"trained {arch_v} ({domain_v}); test accuracy {acc:.4f}; "
                   f"wrote {paths[0]}")
    _run(body)


@main.command()
@click.option("--config", "config_path", default=None)
@click.option("--dataset", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--kind", default="FGSM", type=click.Choice(["FGSM", "BIM"]),
              show_default=True)
@click.option("--pnr-db", default=0.0, show_default=True)
@click.option("--iterations", default=10, show_default=True)
@click.option("--split", default="test", show_default=True,
              type=click.Choice(["train", "val", "test"]))
@click.option("--out", required=True, help="Perturbed dataset path prefix.")
@click.pass_context
def attack(ctx, config_path, dataset, model_path, kind, pnr_db, iterations,
           split, out):
    """Craft a perturbed copy of a dataset split on a source model."""
    def body():
        config = _load_config(config_path)
        model = TrainedModel.load(_opt(ctx, config, "model_path", model_path))
        ds = _load_domain_dataset(str(_opt(ctx, config, "dataset", dataset)),
                                  model.input_domain.value)
        sub = ds.subset(Split(str(_opt(ctx, config, "split", split))))
        x = sub.matrices().astype(np.float64)
        kind_v = str(_opt(ctx, config, "kind", kind))
        pnr = float(_opt(ctx, config, "pnr_db", pnr_db))
        p_t = attacks.budget_for_pnr(pnr, sub, sub.snr_db)
        cfg = attacks.AttackConfig(
            kind=kind_v, p_t=p_t,
            iterations=int(_opt(ctx, config, "iterations", iterations)),
            source_domain=model.input_domain, source_arch=model.arch_id)
        deltas, degenerate = attacks.craft_batch(model, x, sub.labels, cfg)
        adv = x + deltas
        out_ds = LabeledDataset(
            samples=adv[:, :, 0] + 1j * adv[:, :, 1], labels=sub.labels,
            class_names=list(sub.class_names), split=sub.split,
            domain=sub.domain, snr_db=sub.snr_db, seed=sub.seed,
            meta=dict(sub.meta))
        out_v = str(_opt(ctx, config, "out", out))
        paths = save_dataset(out_ds, out_v)
        provenance = {
            "kind": kind_v,
            "p_t": p_t,
            "pnr_db": pnr,
            "source_model_hash": model.params_hash(),
            "source_arch": model.arch_id,
            "domain": model.input_domain.value,
            "degenerate_count": int(degenerate.sum()),
        }
        prov_path = Path(out_v).with_suffix(".attack.json")
        with open(prov_path, "w") as f:
            json.dump(provenance, f, indent=1, sort_keys=True)
            f.write("\n")
        click.echo(f"wrote {paths[0]}, {paths[1]}, {prov_path}")
    _run(body)


@main.command("eval")
@click.option("--config", "config_path", default=None)
@click.option("--dataset", required=True)
@click.option("--model", "model_path", default=None)
@click.option("--ensemble", "ensemble_path", default=None)
@click.option("--split", default="test", show_default=True,
              type=click.Choice(["train", "val", "test"]))
@click.pass_context
def eval_cmd(ctx, config_path, dataset, model_path, ensemble_path, split):
    """Accuracy and confusion matrix of a model or ensemble on a split."""
    def body():
        config = _load_config(config_path)
        model_v = _opt(ctx, config, "model_path", model_path)
        ens_v = _opt(ctx, config, "ensemble_path", ensemble_path)
        if (model_v is None) == (ens_v is None):
            raise ValueError("pass exactly one of --model / --ensemble")
        ds = load_dataset(str(_opt(ctx, config, "dataset", dataset)))
        sub = ds.subset(Split(str(_opt(ctx, config, "split", split))))
        if model_v is not None:
            predictor = TrainedModel.load(model_v)
            if predictor.input_domain is Domain.FREQUENCY:
                sub = _to_freq(sub) if sub.domain is Domain.TIME else sub
        else:
            predictor = defenses.load_ensemble(ens_v)
        acc, cm = harness.eval_accuracy(predictor, sub)
        click.echo(f"accuracy {acc:.4f}")
        click.echo("confusion:")
        for row in cm:
            click.echo("  " + " ".join(f"{v:5d}" for v in row))
    _run(body)


@main.command()
@click.option("--config", "config_path", default=None)
@click.option("--dataset", required=True)
@click.option("--members", default="CNN,CRNN,CNN,CRNN", show_default=True)
@click.option("--k", default=30, show_default=True)
@click.option("--sigma-iq", default=0.001, show_default=True)
@click.option("--sigma-dft", default=0.005, show_default=True)
@click.option("--width-scale", default=1.0, show_default=True)
@click.option("--max-epochs", default=500, show_default=True)
@click.option("--patience", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="Ensemble output directory.")
@click.pass_context
def ensemble(ctx, config_path, dataset, members, k, sigma_iq, sigma_dft,
             width_scale, max_epochs, patience, seed, out):
    """Construct the assorted deep ensemble and save it."""
    def body():
        config = _load_config(config_path)
        ds = load_dataset(str(_opt(ctx, config, "dataset", dataset)))
        if ds.domain is not Domain.TIME:
            raise ValueError("ensemble construction needs a time-domain dataset")
        cfg = TrainConfig(
            max_epochs=int(_opt(ctx, config, "max_epochs", max_epochs)),
            patience=int(_opt(ctx, config, "patience", patience)),
            seed=int(_opt(ctx, config, "seed", seed)))
        ens = defenses.ade_construct(
            ds, _to_freq(ds),
            str(_opt(ctx, config, "members", members)).split(","),
            int(_opt(ctx, config, "k", k)),
            float(_opt(ctx, config, "sigma_iq", sigma_iq)),
            float(_opt(ctx, config, "sigma_dft", sigma_dft)),
            float(_opt(ctx, config, "width_scale", width_scale)),
            cfg, master_seed=int(_opt(ctx, config, "seed", seed)))
        path = defenses.save_ensemble(ens, _opt(ctx, config, "out", out))
        click.echo(f"wrote {path}")
    _run(body)


@main.command("defend-eval")
@click.option("--config", "config_path", default=None)
@click.option("--dataset", required=True)
@click.option("--ensemble", "ensemble_path", required=True)
@click.option("--surrogate-time", required=True)
@click.option("--surrogate-freq", required=True)
@click.option("--baseline", "baselines", multiple=True,
              help="name=checkpoint pairs for extra single-model defenses.")
@click.option("--kinds", default="FGSM,BIM", show_default=True)
@click.option("--domains", default="time,frequency", show_default=True)
@click.option("--pnr-grid", default="-20,-15,-10,-5,0,5,10", show_default=True)
@click.option("--out", required=True, help="Report output directory.")
@click.pass_context
def defend_eval(ctx, config_path, dataset, ensemble_path, surrogate_time,
                surrogate_freq, baselines, kinds, domains, pnr_grid, out):
    """Black-box defense comparison on surrogate-crafted attacks."""
    def body():
        config = _load_config(config_path)
        ds = load_dataset(str(_opt(ctx, config, "dataset", dataset)))
        test_time = ds.subset(Split.TEST)
        test_freq = _to_freq(test_time)
        surrogates = {
            "time": TrainedModel.load(_opt(ctx, config, "surrogate_time",
                                           surrogate_time)),
            "frequency": TrainedModel.load(_opt(ctx, config, "surrogate_freq",
                                                surrogate_freq)),
        }
        defense_map: dict[str, object] = {
            "ade": defenses.load_ensemble(
                _opt(ctx, config, "ensemble_path", ensemble_path)),
        }
        for item in _opt(ctx, config, "baselines", list(baselines)):
            name, _, ckpt = str(item).partition("=")
            if not ckpt:
                raise ValueError(f"--baseline must be name=checkpoint: {item!r}")
            defense_map[name] = TrainedModel.load(ckpt)
        grid = [float(v) for v in
                str(_opt(ctx, config, "pnr_grid", pnr_grid)).split(",")]
        report = harness.blackbox_experiment(
            surrogates, defense_map,
            str(_opt(ctx, config, "kinds", kinds)).split(","),
            str(_opt(ctx, config, "domains", domains)).split(","),
            grid, test_time, test_freq)
        paths = reports.emit_report(report, _opt(ctx, config, "out", out))
        click.echo("wrote " + ", ".join(str(p) for p in paths))
    _run(body)


@main.command()
@click.option("--config", "config_path", default=None)
@click.option("--report", "report_path", required=True,
              help="Existing report JSON.")
@click.option("--out", required=True, help="Output directory.")
@click.option("--formats", default="csv,svg", show_default=True)
@click.pass_context
def report(ctx, config_path, report_path, out, formats):
    """Re-emit an existing JSON report as CSV/SVG."""
    def body():
        config = _load_config(config_path)
        rep = reports.load_report(_opt(ctx, config, "report_path", report_path))
        fmts = str(_opt(ctx, config, "formats", formats)).split(",")
        paths = reports.emit_report(rep, _opt(ctx, config, "out", out),
                                    formats=fmts)
        click.echo("wrote " + ", ".join(str(p) for p in paths))
    _run(body)


if __name__ == "__main__":
    main()
