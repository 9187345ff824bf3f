"""Command-line entry point: ``bdcl generate | train | evaluate | ablate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import data as D
from .config import RunConfig, build_dataset
from .experiment import VARIANTS, run_suite
from .metrics import MetricsReport, coupling_matrices, embed_and_assign, evaluate_labels
from .model import ConfigError, init_model
from .plotting import plot_ablation, plot_coupling, plot_loss_curves
from .trainer import (
    CheckpointError,
    fit,
    load_checkpoint,
    predict_assignments,
    save_checkpoint,
)

log = logging.getLogger("bdcl")

ABLATIONS = {k: v for k, v in VARIANTS.items() if k != "full"}


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    raw = cfg.to_dict()
    if getattr(args, "seed", None) is not None:
        raw["train"]["seed"] = args.seed
    if getattr(args, "out", None):
        raw["out"] = str(args.out)
    for flag, overrides in ABLATIONS.items():
        if getattr(args, flag, False):
            raw["train"].update(overrides)
    return RunConfig.from_dict(raw)


def build_report(model, ds: D.MultiViewDataset, out: Path) -> MetricsReport:
    """Predict, score (when labels exist) and export coupling matrices."""
    pred, _ = predict_assignments(model, ds)
    report = evaluate_labels(pred, ds.labels) if ds.labels is not None else MetricsReport()
    coupling = coupling_matrices(model, ds)
    report.coupling_z_offdiag = coupling.z_offdiag
    report.coupling_p_offdiag = coupling.p_offdiag
    for v, (gz, gp) in enumerate(zip(coupling.z, coupling.p)):
        np.savetxt(out / f"coupling_z_view{v}.csv", gz, delimiter=",", fmt="%.17g")
        np.savetxt(out / f"coupling_p_view{v}.csv", gp, delimiter=",", fmt="%.17g")
        plot_coupling(gz, out / f"coupling_z_view{v}.png", f"embedding coupling, view {v}")
        plot_coupling(gp, out / f"coupling_p_view{v}.png", f"cluster coupling, view {v}")
    np.savetxt(out / "assignments.csv", pred, fmt="%d")
    if ds.labels is not None:
        _dump_json(report.as_dict(), out / "metrics.json")
    return report


def train_run(cfg: RunConfig, out: Path) -> dict:
    cfg = cfg.resolved()
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(cfg.to_dict(), out / "resolved_config.json")
    ds = build_dataset(cfg)
    D.save_dataset(ds, out / "dataset")
    model = init_model(
        cfg.model.view_specs(ds.dims), cfg.model.contrast_dim, ds.n_clusters, cfg.train.seed, cfg.train.np_dtype
    )
    with open(out / "train_log.jsonl", "w") as fh:

        def write(rec):
            fh.write(json.dumps(rec) + "\n")
            fh.flush()

        model, records = fit(model, ds, cfg.train, on_record=write)
    save_checkpoint(model, cfg.train, out / "checkpoint.bin")
    plot_loss_curves(records, out / "loss_curves.png")
    report = build_report(model, ds, out)
    return report.as_dict()


def _train_one(args_tuple):
    raw, out = args_tuple
    return train_run(RunConfig.from_dict(raw), Path(out))


# ------------------------------------------------------------------ commands


def cmd_generate(args) -> int:
    cfg = load_run_config(args).resolved()
    s = cfg.dataset.synthetic
    ds = D.normalize(D.generate_synthetic(s.n, s.k, s.view_dims, s.cluster_sep, s.noise, s.seed, s.latent_dim), cfg.dataset.normalization)
    out = Path(args.out or cfg.out)
    try:
        manifest = D.save_dataset(ds, out)
    except OSError as exc:
        raise ConfigError(f"cannot write dataset to {out}: {exc}") from exc
    print(f"wrote {manifest}: n={ds.n_samples} k={ds.n_clusters} dims={ds.dims} normalization={ds.normalization}")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args)
    out = Path(cfg.out)
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        jobs = []
        for s in seeds:
            raw = cfg.to_dict()
            raw["train"]["seed"] = s
            jobs.append((raw, str(out / f"seed{s}")))
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_train_one, jobs))
        else:
            results = [_train_one(j) for j in jobs]
        for s, res in zip(seeds, results):
            print(f"seed {s}: acc={res['acc']} nmi={res['nmi']} pur={res['pur']}")
        return 0
    res = train_run(cfg, out)
    print(f"acc={res['acc']} nmi={res['nmi']} pur={res['pur']} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    ds = D.load_dataset(args.dataset)
    if args.normalize != "none" and ds.normalization == "none":
        ds = D.normalize(ds, args.normalize)
    if ds.n_views != model.n_views or ds.dims != [s.input_dim for s in model.specs]:
        raise ConfigError(
            f"checkpoint expects {model.n_views} views with dims {[s.input_dim for s in model.specs]}, "
            f"dataset has {ds.n_views} views with dims {ds.dims}"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(model, ds, out)
    if args.export_embeddings:
        zs, _ = embed_and_assign(model, ds.views)
        for v, z in enumerate(zs):
            np.savetxt(out / f"embeddings_view{v}.csv", z, delimiter=",", fmt="%.17g")
    print(json.dumps(report.as_dict(), sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    cfg = load_run_config(args)
    out = Path(cfg.out)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    unknown = set(variants) - set(VARIANTS)
    if unknown:
        raise ConfigError(f"unknown variants {sorted(unknown)}; choose from {list(VARIANTS)}")

    def show(run):
        print(f"seed {run.seed} {run.variant}: acc={run.acc:.4f} nmi={run.nmi:.4f} z_offdiag={run.z_offdiag:.4f}", flush=True)

    result = run_suite(cfg, seeds, variants, on_run=show)
    result.write_csv(out / "ablation.csv")
    summary = result.summary()
    _dump_json({"variants": summary, "kmeans_per_view_acc": result.kmeans}, out / "ablation_summary.json")
    plot_ablation(summary, out / "ablation.png")
    for name, row in summary.items():
        print(f"{name}: mean acc={row['acc']:.4f} nmi={row['nmi']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdcl", description="Train and evaluate a multi-view clustering model.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic multi-view dataset")
    g.add_argument("--config", type=Path)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", type=Path)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="pretrain, train and score a model")
    t.add_argument("--config", type=Path)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", type=Path)
    t.add_argument("--seeds", help="comma-separated seed sweep; one subdirectory per seed")
    t.add_argument("--jobs", type=int, default=1, help="parallel processes for --seeds")
    for flag in ABLATIONS:
        t.add_argument("--" + flag.replace("_", "-"), dest=flag, action="store_true")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("ablate", help="compare training variants over several seeds")
    a.add_argument("--config", type=Path)
    a.add_argument("--out", type=Path)
    a.add_argument("--seeds", default="0,1,2,3,4")
    a.add_argument("--variants", default=",".join(VARIANTS))
    a.set_defaults(func=cmd_ablate)

    e = sub.add_parser("evaluate", help="score a checkpoint on a dataset")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--dataset", type=Path, required=True, help="manifest.json or its directory")
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--normalize", choices=D.NORMALIZATIONS, default="none")
    e.add_argument("--export-embeddings", action="store_true")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, D.DatasetError, CheckpointError, ValueError, OSError) as exc:
        print(f"bdcl: error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"bdcl: training diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
