import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy
from pydantic import ValidationError

from . import __version__
from .baselines import gbt_train, logreg_train
from .config import ExperimentConfig, get_default_config, load_config, with_overrides
from .data.dataset import CompressedDataset, build_dataset, minibatch_caption, render_minibatch
from .data.ingest import ingest
from .data.synth import synth_generate
from .errors import AnnealRbmError, EstimationError
from .metrics import compare_runs, read_metrics_csv, unique_run_names, write_metrics_csv
from .rbm import RbmParams
from .samplers.base import AbstractSampler, ConstantSampler, UniformSampler
from .samplers.factory import build_sampler
from .thermometry import (
    beta_report,
    bin_by_coupling,
    estimate_beta,
    ks_vs_coupling_report,
    seed_advantage,
    steps_curve,
    trend_correlation,
)
from .training import Trainer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

PREVIEW_ROWS = 50
CHECKPOINT_PATTERN = re.compile(r"epoch_(\d+)\.params$")
SAMPLER_CHOICES = ["gibbs", "simulated_annealing", "exact", "chimera", "zeros", "uniform"]


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def parse_rbm_shape(text: str) -> Tuple[int, int]:
    match = re.fullmatch(r"(\d+)[xX](\d+)", text.strip())
    if not match:
        raise UsageError(f"--rbm expects NxM (visible x hidden), got {text!r}")
    return int(match.group(1)), int(match.group(2))


def write_manifest(out: Path, command: str, config: ExperimentConfig, seed: int, extra: Optional[Dict[str, Any]] = None):
    manifest = {
        "command": command,
        "seed": seed,
        "config": config.model_dump(mode="json", by_alias=True),
        "versions": {
            "annealrbm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
    }
    if extra:
        manifest.update(extra)
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def make_sampler(name: str, config: ExperimentConfig) -> AbstractSampler:
    sampler_config = config.train.sampler
    if name == "zeros":
        return ConstantSampler(sampler_config.n_samples)
    if name == "uniform":
        return UniformSampler(sampler_config.n_samples)
    return build_sampler(with_overrides(sampler_config, {"kind": name}), config.train.chimera)


def load_checkpoints(directory: Path) -> List[Tuple[int, RbmParams]]:
    if not directory.is_dir():
        raise FileNotFoundError(f"Checkpoint directory {directory} does not exist")
    checkpoints = []
    for path in sorted(directory.iterdir()):
        match = CHECKPOINT_PATTERN.search(path.name)
        if match:
            checkpoints.append((int(match.group(1)), RbmParams.load(path)))
    if not checkpoints:
        raise FileNotFoundError(f"No epoch_*.params checkpoints in {directory}")
    return sorted(checkpoints, key=lambda item: item[0])


def load_split(directory: Path, name: str, limit: Optional[int] = None) -> CompressedDataset:
    path = directory / f"{name}.cds"
    if not path.is_file():
        raise FileNotFoundError(f"Dataset file {path} does not exist; run the dataset command first")
    dataset = CompressedDataset.load(path)
    return dataset.subset(limit) if limit else dataset


def cmd_dataset(args, config: ExperimentConfig) -> int:
    dataset_config = with_overrides(
        config.dataset,
        {
            "source": args.source,
            "n": args.n,
            "side": args.side,
            "n_feature_bits": args.bits,
            "rng_seed": args.seed,
            "fit_fraction": args.fit_fraction,
            "path": args.path,
            "manifest": args.manifest,
            "crop": args.crop,
        },
    )
    config = config.model_copy(update={"dataset": dataset_config})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(dataset_config.rng_seed)
    if dataset_config.source == "synth":
        images, labels = synth_generate(dataset_config.n // 2, dataset_config.side, rng)
    else:
        if not dataset_config.path:
            raise UsageError("--source dir needs --path")
        images, labels = ingest(dataset_config.path, dataset_config.manifest, dataset_config.crop)

    model, quantizer, train, test = build_dataset(
        images,
        labels,
        dataset_config.fit_fraction,
        dataset_config.n_feature_bits,
        rng,
        dataset_config.test_fraction,
    )
    model.save(out / "pca.json")
    quantizer.save(out / "quantizer.json")
    train.save(out / "train.cds")
    test.save(out / "test.cds")

    stop = min(PREVIEW_ROWS, len(train))
    raster, bit_sum = render_minibatch(train, 0, stop)
    (out / "preview.pgm").write_bytes(raster)
    (out / "preview.txt").write_text(minibatch_caption(train, 0, stop, bit_sum), encoding="utf-8")
    write_manifest(out, "dataset", config, dataset_config.rng_seed)
    logger.info(f"Dataset written to {out}")
    return EXIT_OK


def cmd_train(args, config: ExperimentConfig) -> int:
    sampler_config = with_overrides(config.train.sampler, {"kind": args.sampler})
    train_config = with_overrides(
        config.train,
        {
            "algorithm": args.algo,
            "batch_size": args.batch,
            "n_epochs": args.epochs,
            "lambda": args.lambda_,
            "switch_epoch": args.switch_epoch,
            "learning_rate": args.lr,
            "rng_seed": args.seed,
            "sampler": sampler_config.model_dump(),
        },
    )
    config = config.model_copy(update={"train": train_config})
    data = Path(args.data)
    train = load_split(data, "train", args.train_size)
    test = load_split(data, "test")

    n_visible, n_hidden = parse_rbm_shape(args.rbm)
    if n_visible != train.n_feature_bits + 1:
        raise UsageError(
            f"--rbm {n_visible}x{n_hidden} needs n_visible = feature bits + 1 = {train.n_feature_bits + 1} "
            f"for this {train.n_feature_bits}-bit dataset"
        )

    out = Path(args.out)
    checkpoints = out / "checkpoints"
    checkpoints.mkdir(parents=True, exist_ok=True)
    initial = RbmParams.initialize(n_visible, n_hidden, np.random.default_rng([train_config.rng_seed, 1]))

    def save_checkpoint(epoch: int, params: RbmParams, _metrics) -> None:
        if (epoch + 1) % train_config.checkpoint_every == 0 or epoch + 1 == train_config.n_epochs:
            params.save(checkpoints / f"epoch_{epoch:04d}.params")

    run_name = args.name or train_config.algorithm
    trainer = Trainer(train_config, thermometry=config.thermometry, run_name=run_name)
    params, history = trainer.fit(initial, train.rows, test.rows, on_epoch_end=save_checkpoint)
    params.save(out / "params.txt")
    write_metrics_csv(out / "metrics.csv", run_name, history)
    if trainer.beta_history:
        beta_report(trainer.beta_history, config.thermometry.rolling_window).to_csv(
            out / "beta_estimates.csv", index=False, float_format="%.10g"
        )
    write_manifest(
        out, "train", config, train_config.rng_seed,
        {"rbm": [n_visible, n_hidden], "run": run_name, "train_rows": len(train)},
    )
    return EXIT_OK


def cmd_baselines(args, config: ExperimentConfig) -> int:
    logreg_config = with_overrides(config.logreg, {"n_epochs": args.epochs, "batch_size": args.batch, "rng_seed": args.seed})
    gbt_config = with_overrides(config.gbt, {"n_trees": args.trees, "rng_seed": args.seed})
    config = config.model_copy(update={"logreg": logreg_config, "gbt": gbt_config})
    data = Path(args.data)
    train = load_split(data, "train", args.train_size)
    test = load_split(data, "test")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, logreg_history = logreg_train(train.rows, logreg_config, test.rows)
    write_metrics_csv(out / "logreg_metrics.csv", "logreg", logreg_history)
    _, gbt_history = gbt_train(train.rows, gbt_config, test.rows)
    write_metrics_csv(out / "gbt_metrics.csv", "gbt", gbt_history)
    write_manifest(
        out, "baselines", config, logreg_config.rng_seed,
        {"feature_sha256": train.feature_hash(), "train_rows": len(train)},
    )
    return EXIT_OK


def cmd_audit(args, config: ExperimentConfig) -> int:
    thermometry = config.thermometry
    overrides = {"beta_0": getattr(args, "beta0", None), "max_sweeps": getattr(args, "max_sweeps", None), "n_samples": args.n}
    thermometry = with_overrides(thermometry, overrides)
    config = config.model_copy(update={"thermometry": thermometry})
    checkpoints = load_checkpoints(Path(args.checkpoints))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    reference = {"burn_in": thermometry.reference_burn_in, "thin": thermometry.reference_thin}

    if args.audit == "beta":
        sampler = make_sampler(args.sampler, config)
        estimates = []
        beta_0 = thermometry.beta_0
        for epoch, params in checkpoints[:: args.every]:
            try:
                estimate = estimate_beta(params, sampler, beta_0, thermometry.n_samples, rng, thermometry.min_bin_count)
                beta_0 = estimate.beta_eff if estimate.beta_eff > 0 else beta_0
            except EstimationError as e:
                logger.warning(f"Epoch {epoch}: beta estimation failed ({e})")
                estimate = None
            estimates.append((epoch, estimate))
        report = beta_report(estimates, thermometry.rolling_window).rename(columns={"step": "epoch"})
        report.to_csv(out / "beta.csv", index=False, float_format="%.10g")
    elif args.audit == "ks":
        sampler = make_sampler(args.sampler, config)
        report = ks_vs_coupling_report(checkpoints, sampler, rng, thermometry.n_samples, **reference)
        report.to_csv(out / "ks.csv", index=False, float_format="%.10g")
        bin_by_coupling(report).to_csv(out / "ks_binned.csv", index=False, float_format="%.10g")
    elif args.audit == "steps":
        sampler = make_sampler(args.sampler, config)
        curve = steps_curve(
            checkpoints,
            sampler,
            rng,
            n_trials=args.trials,
            n_samples=thermometry.n_samples,
            max_sweeps=thermometry.max_sweeps,
            threshold=thermometry.ks_threshold,
            **reference,
        )
        curve.to_csv(out / "steps.csv", index=False, float_format="%.10g")
        if len(curve) > 1:
            logger.info(f"Spearman correlation of epoch and mean steps: {trend_correlation(curve):.3f}")
    else:
        result = seed_advantage(
            [params for _, params in checkpoints],
            make_sampler(args.sampler_a, config),
            make_sampler(args.sampler_b, config),
            rng,
            n_samples=thermometry.n_samples,
            max_sweeps=thermometry.max_sweeps,
            threshold=thermometry.ks_threshold,
            **reference,
        )
        (out / "seed_advantage.json").write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")
    write_manifest(out, f"audit {args.audit}", config, args.seed)
    return EXIT_OK


def cmd_compare(args, config: ExperimentConfig) -> int:
    frames = [read_metrics_csv(path) for path in args.runs]
    names = unique_run_names([str(frame["run"].iloc[0]) if len(frame) else Path(path).stem for frame, path in zip(frames, args.runs)])
    reference = args.reference or names[0]
    joined = compare_runs(dict(zip(names, frames)), reference)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    joined.to_csv(out, index=False, float_format="%.10g")
    logger.info(f"Compared {len(names)} runs against '{reference}' into {out}")
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="annealrbm", description="RBM training and sampler audits on compressed image data.")
    parser.add_argument("--config", help="Sectioned key = value experiment file")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    dataset = commands.add_parser("dataset", help="Build compressed train/test datasets")
    dataset.add_argument("--source", choices=["synth", "dir"])
    dataset.add_argument("--n", type=int, help="Number of synthetic images (half per class)")
    dataset.add_argument("--side", type=int)
    dataset.add_argument("--bits", type=int, help="Feature bits per row, a multiple of 8")
    dataset.add_argument("--fit-fraction", type=float)
    dataset.add_argument("--path", help="Image directory for --source dir")
    dataset.add_argument("--manifest", help="Label manifest CSV (default <path>/labels.csv)")
    dataset.add_argument("--crop", type=int)
    dataset.add_argument("--seed", type=int)
    dataset.add_argument("--out", required=True)
    dataset.set_defaults(handler=cmd_dataset)

    train = commands.add_parser("train", help="Train an RBM classifier")
    train.add_argument("--algo", choices=["cd", "sampler_generative", "discriminative", "hybrid", "annealed_hybrid"])
    train.add_argument("--sampler", choices=["gibbs", "simulated_annealing", "exact", "chimera"])
    train.add_argument("--rbm", required=True, help="NxM: visible x hidden units")
    train.add_argument("--batch", type=int)
    train.add_argument("--epochs", type=int)
    train.add_argument("--lambda", dest="lambda_", type=float)
    train.add_argument("--switch-epoch", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--train-size", type=int, help="Use only the first N training rows")
    train.add_argument("--name", help="Run name in the metrics file")
    train.add_argument("--seed", type=int)
    train.add_argument("--data", required=True)
    train.add_argument("--out", required=True)
    train.set_defaults(handler=cmd_train)

    baselines = commands.add_parser("baselines", help="Train logistic regression and boosted trees")
    baselines.add_argument("--epochs", type=int)
    baselines.add_argument("--trees", type=int)
    baselines.add_argument("--batch", type=int)
    baselines.add_argument("--train-size", type=int)
    baselines.add_argument("--seed", type=int)
    baselines.add_argument("--data", required=True)
    baselines.add_argument("--out", required=True)
    baselines.set_defaults(handler=cmd_baselines)

    audit = commands.add_parser("audit", help="Thermometry audits over training checkpoints")
    audits = audit.add_subparsers(dest="audit", required=True)
    for name in ("beta", "ks", "steps", "seed-advantage"):
        sub = audits.add_parser(name)
        sub.add_argument("--checkpoints", required=True, help="Directory of epoch_*.params files")
        sub.add_argument("--out", required=True)
        sub.add_argument("--n", type=int, help="Samples per draw")
        sub.add_argument("--seed", type=int, default=0)
        sub.set_defaults(handler=cmd_audit)
    audits.choices["beta"].add_argument("--sampler", choices=SAMPLER_CHOICES, default="chimera")
    audits.choices["beta"].add_argument("--every", type=int, default=1, help="Use every Nth checkpoint")
    audits.choices["beta"].add_argument("--beta0", type=float)
    audits.choices["ks"].add_argument("--sampler", choices=SAMPLER_CHOICES, default="simulated_annealing")
    audits.choices["steps"].add_argument("--sampler", choices=SAMPLER_CHOICES, default="zeros")
    audits.choices["steps"].add_argument("--max-sweeps", type=int)
    audits.choices["steps"].add_argument("--trials", type=int, default=5)
    audits.choices["seed-advantage"].add_argument("--sampler-a", choices=SAMPLER_CHOICES, default="exact")
    audits.choices["seed-advantage"].add_argument("--sampler-b", choices=SAMPLER_CHOICES, default="zeros")
    audits.choices["seed-advantage"].add_argument("--max-sweeps", type=int)

    compare = commands.add_parser("compare", help="Join metrics files and compute accuracy ratios")
    compare.add_argument("--runs", nargs="+", required=True)
    compare.add_argument("--reference", help="Run name to divide by (default: the first run)")
    compare.add_argument("--out", required=True)
    compare.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"annealrbm: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
    )
    try:
        config = load_config(args.config) if args.config else get_default_config()
        return args.handler(args, config)
    except (UsageError, ValidationError) as e:
        logger.error(f"Usage error: {e}")
        print(f"annealrbm: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (AnnealRbmError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"annealrbm: error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
