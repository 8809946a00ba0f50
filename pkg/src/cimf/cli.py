"""Command-line surface: similarity precomputation, training, evaluation, prediction.

Subcommands::

    cimf similarity   build and dump per-item neighborhoods
    cimf train        train one MF-family method on a full dataset, write a checkpoint
    cimf evaluate     run the method x dimension x fold comparison grid
    cimf predict      score user/item pairs from a checkpoint

Every flag can also come from a JSON config file (``--config``); explicit
flags win. The effective configuration is always written next to the outputs,
and it alone reproduces the run: all randomness derives from the single seed.
The worker count for evaluation grids is taken from the CIMF_WORKERS
environment variable (default 1).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import METHOD_KINDS, MF_SIMILARITY_KIND, MethodSpec, format_predictions
from .coupling import (
    SIMILARITY_KINDS,
    CouplingConfig,
    build_neighborhoods,
    dump_neighborhoods,
    load_neighborhoods,
)
from .evaluation import evaluate_grid
from .factorization import Checkpoint, TrainingConfig, load_checkpoint, save_checkpoint, train
from .ingestion import GenericSchema, demo_paths, load_bookcrossing, load_generic, load_movielens
from .util import atomic_write_text, derive_seed

logger = logging.getLogger(__name__)

DATASET_KINDS = ("movielens", "bookcrossing", "generic", "demo")


@dataclass
class RunConfig:
    """Fully serialized run description; written next to every output."""

    dataset: str = "demo"
    ratings_path: str | None = None
    items_path: str | None = None
    delimiter: str = "\t"
    rating_min: float = 1.0
    rating_max: float = 5.0

    methods: list[str] = field(default_factory=lambda: ["plain-mf", "cimf"])
    dims: list[int] = field(default_factory=lambda: [10, 50, 100])
    folds: int = 5
    reference: str | None = None
    dump_predictions: bool = False

    kind: str = "coupled"
    neighbors: int = 10
    gamma: list[float] | None = None
    normalize: bool = True

    method: str = "cimf"
    neighbors_file: str | None = None
    dim: int = 10
    learning_rate: float = 0.005
    reg_lambda: float = 0.05
    alpha: float = 0.1
    max_epochs: int = 200
    convergence_tol: float = 1e-5
    init_scale: float = 0.1

    seed: int = 0
    out: str = "out"

    def training_config(self, dim: int | None = None, seed: int | None = None) -> TrainingConfig:
        return TrainingConfig(
            latent_dim=self.dim if dim is None else dim,
            learning_rate=self.learning_rate,
            reg_lambda=self.reg_lambda,
            alpha=self.alpha,
            max_epochs=self.max_epochs,
            convergence_tol=self.convergence_tol,
            seed=self.seed if seed is None else seed,
            init_scale=self.init_scale,
        )

    def coupling_config(self) -> CouplingConfig:
        return CouplingConfig(
            neighborhood_size=self.neighbors,
            gamma=tuple(self.gamma) if self.gamma else None,
            normalize=self.normalize,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def load_dataset(config: RunConfig):
    if config.dataset == "demo":
        ratings_path, items_path = demo_paths()
        return load_generic(ratings_path, items_path, GenericSchema())
    if config.ratings_path is None:
        raise SystemExit(f"dataset kind {config.dataset!r} needs --ratings")
    if config.dataset == "movielens":
        if config.items_path is None:
            raise SystemExit("movielens needs --items (the movies file)")
        return load_movielens(config.ratings_path, config.items_path)
    if config.dataset == "bookcrossing":
        if config.items_path is None:
            raise SystemExit("bookcrossing needs --items (the books file)")
        return load_bookcrossing(config.ratings_path, config.items_path)
    if config.dataset == "generic":
        if config.items_path is None:
            raise SystemExit("generic needs --items")
        schema = GenericSchema(
            delimiter=config.delimiter,
            rating_min=config.rating_min,
            rating_max=config.rating_max,
        )
        return load_generic(config.ratings_path, config.items_path, schema)
    raise SystemExit(f"unknown dataset kind {config.dataset!r}")


def _write_effective_config(config: RunConfig) -> None:
    os.makedirs(config.out, exist_ok=True)
    atomic_write_text(os.path.join(config.out, "run_config.json"), config.to_json())


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_similarity(config: RunConfig) -> int:
    ratings, space, _stats = load_dataset(config)
    sim = build_neighborhoods(
        space,
        config.coupling_config(),
        config.kind,
        ratings=ratings if config.kind == "rating-pearson" else None,
    )
    _write_effective_config(config)
    dump_path = os.path.join(config.out, "neighbors.tsv")
    dump_neighborhoods(sim, space.item_labels, dump_path)
    weights = [w for entries in sim.neighbors for _, w in entries]
    summary = {
        "kind": sim.kind,
        "items": sim.n_items,
        "neighbors_per_item": config.neighbors,
        "mean_neighbor_weight": float(np.mean(weights)) if weights else 0.0,
        "fingerprint": sim.fingerprint(),
    }
    atomic_write_text(
        os.path.join(config.out, "similarity_summary.json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    print(f"wrote {dump_path} ({sim.n_items} items, K={config.neighbors})")
    return 0


def cmd_train(config: RunConfig) -> int:
    if config.method not in MF_SIMILARITY_KIND and config.method != "plain-mf":
        raise SystemExit(f"train supports MF-family methods, not {config.method!r}")
    ratings, space, _stats = load_dataset(config)
    training = config.training_config(seed=derive_seed(config.seed, "init") % (2**32))
    sim = None
    fingerprint = None
    _write_effective_config(config)
    if config.method != "plain-mf" and training.alpha > 0.0:
        if config.neighbors_file:
            sim = load_neighborhoods(
                config.neighbors_file, space.item_labels, MF_SIMILARITY_KIND[config.method]
            )
        else:
            sim = build_neighborhoods(
                space, config.coupling_config(), MF_SIMILARITY_KIND[config.method]
            )
            dump_neighborhoods(sim, space.item_labels, os.path.join(config.out, "neighbors.tsv"))
        fingerprint = sim.fingerprint()
    if config.method == "plain-mf":
        training = TrainingConfig(**{**asdict(training), "alpha": 0.0})
    result = train(ratings, sim, training)
    checkpoint = Checkpoint(
        model=result.model,
        config=training,
        user_labels=ratings.user_labels,
        item_labels=ratings.item_labels,
        rating_min=ratings.rating_min,
        rating_max=ratings.rating_max,
        similarity_fingerprint=fingerprint,
    )
    path = os.path.join(config.out, "model.npz")
    save_checkpoint(path, checkpoint)
    print(
        f"trained {config.method} for {result.epochs} epochs ({result.stop_reason}), "
        f"objective {result.trace[-1]:.6g}, wrote {path}"
    )
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    ratings, space, _stats = load_dataset(config)
    unknown = [m for m in config.methods if m not in METHOD_KINDS]
    if unknown:
        raise SystemExit(f"unknown method name(s): {', '.join(unknown)}")
    config.methods = list(dict.fromkeys(config.methods))  # dedupe, keep order
    specs = [
        MethodSpec(
            kind=m,
            mf_config=config.training_config(),
            cf_neighbors=config.neighbors,
            coupling=config.coupling_config(),
        )
        for m in config.methods
    ]
    workers = int(os.environ.get("CIMF_WORKERS", "1"))
    report, predictions = evaluate_grid(
        ratings,
        space,
        specs,
        dims=config.dims,
        folds=config.folds,
        seed=config.seed,
        reference_method=config.reference,
        workers=workers,
        keep_predictions=config.dump_predictions,
    )
    _write_effective_config(config)
    if config.dump_predictions:
        cells_dir = os.path.join(config.out, "cells")
        os.makedirs(cells_dir, exist_ok=True)
        for (method, dim, fold), preds in predictions.items():
            atomic_write_text(
                os.path.join(cells_dir, f"{method}_d{dim}_f{fold}.tsv"),
                format_predictions(preds, ratings),
            )
    atomic_write_text(os.path.join(config.out, "report.csv"), report.to_csv())
    table = report.to_table()
    atomic_write_text(os.path.join(config.out, "report.txt"), table)
    print(table, end="")
    failed = [c for c in report.cells if c.failed]
    for cell in failed:
        print(f"FAILED cell ({cell.method}, dim={cell.dim}, fold={cell.fold}): {cell.error}",
              file=sys.stderr)
    return 1 if failed else 0


def cmd_predict(checkpoint_path: str, pairs_path: str) -> int:
    if not os.path.exists(checkpoint_path):
        raise SystemExit(f"checkpoint not found: {checkpoint_path}")
    checkpoint = load_checkpoint(checkpoint_path)
    source = sys.stdin if pairs_path == "-" else open(pairs_path, encoding="utf-8")
    try:
        for line in source:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise SystemExit(f"pair lines must be 'user<TAB>item', got: {line!r}")
            value, fallback = checkpoint.predict_label(parts[0], parts[1])
            print(f"{parts[0]}\t{parts[1]}\t{value:.6f}\t{int(fallback)}")
    finally:
        if source is not sys.stdin:
            source.close()
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", choices=DATASET_KINDS, default=None,
                        help="dataset kind (default: demo, the bundled 4-movie corpus)")
    parser.add_argument("--ratings", dest="ratings_path", default=None, help="ratings file")
    parser.add_argument("--items", dest="items_path", default=None,
                        help="item catalog file (movies/books/items)")
    parser.add_argument("--delimiter", default=None, help="generic-format field delimiter")
    parser.add_argument("--rating-min", type=float, default=None)
    parser.add_argument("--rating-max", type=float, default=None)


def _add_coupling_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--neighbors", type=int, default=None,
                        help="neighborhood size K (also the CF neighbor count)")
    parser.add_argument("--gamma", default=None,
                        help="comma-separated per-attribute weights for the inter coupling")
    parser.add_argument("--raw-weights", action="store_true", default=None,
                        help="keep raw neighbor weights instead of unit-sum normalization")


def _add_training_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--learning-rate", type=float, default=None)
    parser.add_argument("--reg-lambda", type=float, default=None)
    parser.add_argument("--alpha", type=float, default=None,
                        help="coupling weight; 0 reduces to plain MF")
    parser.add_argument("--max-epochs", type=int, default=None)
    parser.add_argument("--tol", dest="convergence_tol", type=float, default=None)
    parser.add_argument("--init-scale", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cimf",
        description="Coupled item-based matrix factorization: similarity, training, evaluation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("similarity", help="build and dump per-item neighborhoods")
    _add_dataset_args(p_sim)
    _add_coupling_args(p_sim)
    p_sim.add_argument("--kind", choices=SIMILARITY_KINDS, default=None)
    p_sim.add_argument("--config", default=None, help="JSON file supplying any flag")
    p_sim.add_argument("--out", default=None, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None)

    p_train = sub.add_parser("train", help="train an MF-family method, write a checkpoint")
    _add_dataset_args(p_train)
    _add_coupling_args(p_train)
    _add_training_args(p_train)
    p_train.add_argument("--method", default=None,
                         help="one of: " + ", ".join(k for k in METHOD_KINDS if k not in ("ubcf", "ibcf")))
    p_train.add_argument("--neighbors-file", default=None,
                         help="precomputed neighborhood dump to use instead of rebuilding")
    p_train.add_argument("--dim", type=int, default=None, help="latent dimension")
    p_train.add_argument("--config", default=None)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--seed", type=int, default=None)

    p_eval = sub.add_parser("evaluate", help="run the method x dimension x fold grid")
    _add_dataset_args(p_eval)
    _add_coupling_args(p_eval)
    _add_training_args(p_eval)
    p_eval.add_argument("--methods", default=None,
                        help="comma-separated method kinds: " + ", ".join(METHOD_KINDS))
    p_eval.add_argument("--dims", default=None, help="comma-separated latent dimensions")
    p_eval.add_argument("--folds", type=int, default=None)
    p_eval.add_argument("--reference", default=None,
                        help="method the improvement columns compare against")
    p_eval.add_argument("--dump-predictions", action="store_true", default=None,
                        help="write per-cell prediction files under <out>/cells/")
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--seed", type=int, default=None)

    p_pred = sub.add_parser("predict", help="score user/item pairs from a checkpoint")
    p_pred.add_argument("--checkpoint", required=True, help="model.npz written by train")
    p_pred.add_argument("--pairs", required=True,
                        help="file of 'user<TAB>item' lines, or - for stdin")

    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    """defaults <- config file <- explicit flags."""
    config = RunConfig()
    file_path = getattr(args, "config", None)
    if file_path:
        with open(file_path, encoding="utf-8") as handle:
            data = json.load(handle)
        unknown = [k for k in data if k not in config.__dataclass_fields__]
        if unknown:
            raise SystemExit(f"unknown config file keys: {', '.join(unknown)}")
        for key, value in data.items():
            setattr(config, key, value)

    overrides = {
        "dataset": args.dataset if hasattr(args, "dataset") else None,
        "ratings_path": getattr(args, "ratings_path", None),
        "items_path": getattr(args, "items_path", None),
        "delimiter": getattr(args, "delimiter", None),
        "rating_min": getattr(args, "rating_min", None),
        "rating_max": getattr(args, "rating_max", None),
        "neighbors": getattr(args, "neighbors", None),
        "learning_rate": getattr(args, "learning_rate", None),
        "reg_lambda": getattr(args, "reg_lambda", None),
        "alpha": getattr(args, "alpha", None),
        "max_epochs": getattr(args, "max_epochs", None),
        "convergence_tol": getattr(args, "convergence_tol", None),
        "init_scale": getattr(args, "init_scale", None),
        "kind": getattr(args, "kind", None),
        "method": getattr(args, "method", None),
        "neighbors_file": getattr(args, "neighbors_file", None),
        "dim": getattr(args, "dim", None),
        "folds": getattr(args, "folds", None),
        "reference": getattr(args, "reference", None),
        "seed": getattr(args, "seed", None),
        "out": getattr(args, "out", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if getattr(args, "gamma", None):
        config.gamma = [float(g) for g in args.gamma.split(",")]
    if getattr(args, "raw_weights", None):
        config.normalize = False
    if getattr(args, "methods", None):
        config.methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if getattr(args, "dims", None):
        config.dims = [int(d) for d in str(args.dims).split(",")]
    if getattr(args, "dump_predictions", None):
        config.dump_predictions = True
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "predict":
        return cmd_predict(args.checkpoint, args.pairs)
    config = _merge_config(args)
    try:
        if args.command == "similarity":
            return cmd_similarity(config)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "evaluate":
            return cmd_evaluate(config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise SystemExit(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
