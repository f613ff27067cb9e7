"""Command line interface: ``fundusqa {extract,pca,train,score,dump-debug}``.

Exit codes: 0 success (``score``: every image acceptable), 1 failure or
per-image errors, 2 (``score`` only) at least one image judged blurry.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classifiers import MODEL_KINDS, load_model, save_model, train_model
from .config import Config, ConfigError, load_config
from .dataset import (
    ManifestEntry,
    SchemaError,
    extract_table,
    read_feature_csv,
    read_manifest,
    write_feature_csv,
)
from .evaluation import evaluate_scores, split_dataset
from .features import FEATURE_SCHEMA_VERSION, cluster_columns, extract_features, feature_columns, model_columns
from .gradients import laplacian, sobel_magnitude
from .image_core import fundus_mask, load_image, save_debug_png, to_grayscale
from .preprocessing import apply_scaler, fit_pca, fit_scaler, project
from .vesselness import frangi, perivascular_mask

log = logging.getLogger("fundusqa")

CLUSTERS = ("statistical", "gradient", "wavelet")


def build_config(args) -> Config:
    config = load_config(args.config) if args.config else Config()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.mask_all_metrics:
        changes["mask_all_metrics"] = True
    if args.split is not None:
        changes["split"] = args.split
    if args.frangi_downscale is not None:
        changes["frangi_downscale"] = args.frangi_downscale
    return config.replace(**changes) if changes else config


# ------------------------------------------------------------------ extract


def cmd_extract(args, config: Config) -> int:
    entries = read_manifest(args.manifest)
    table = extract_table(entries, config)
    write_feature_csv(table, args.out)
    failed = [(i, e) for i, e in zip(table.ids, table.errors) if e]
    for ident, err in failed:
        log.error("%s: %s", ident, err)
    log.info("wrote %d rows to %s (%d failed)", len(table), args.out, len(failed))
    return 1 if failed else 0


# ---------------------------------------------------------------------- pca


def cluster_pca(X: np.ndarray, k: int = 2):
    """Standard-scale ``X`` and fit a ``k``-component PCA; returns (model, projection)."""
    if X.shape[1] < 2:
        raise ValueError("PCA needs at least two feature columns")
    Xs = apply_scaler(fit_scaler(X), X)
    model = fit_pca(Xs, k)
    return model, project(model, Xs)


def cmd_pca(args, config: Config) -> int:
    if args.cluster not in CLUSTERS:
        raise ValueError(f"unknown cluster {args.cluster!r}; expected one of {CLUSTERS}")
    table = read_feature_csv(args.features, config).ok()
    cols = cluster_columns(args.cluster, config)
    model, proj = cluster_pca(table.matrix(cols))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        out.write(f"# cluster={args.cluster} columns={','.join(cols)}\n")
        ev = ",".join(repr(float(v)) for v in model.explained_variance_ratio)
        out.write(f"# explained_variance_ratio={ev}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["id", "pc1", "pc2", "label"])
        for ident, row, lab in zip(table.ids, proj, table.labels):
            w.writerow([ident, repr(float(row[0])), repr(float(row[1])), {1: "good", 0: "bad", None: ""}[lab]])
    finally:
        if args.out:
            out.close()
    return 0


# -------------------------------------------------------------------- train


def train_and_evaluate(table, kind: str, config: Config):
    """Split ``table``, train ``kind`` on the training part, evaluate on the rest."""
    table = table.ok()
    if any(lab is None for lab in table.labels):
        raise ValueError("training needs every row labelled good or bad")
    y = np.array(table.labels, dtype=int)
    if np.unique(y).size < 2:
        raise ValueError("training needs both good and bad images")
    groups = table.subjects if config.split == "subject" else None
    train, test = split_dataset(y, config.test_fraction, config.seed, groups)
    cols = model_columns(config)
    X = table.matrix(cols)
    model = train_model(kind, X[train], y[train], cols, config, FEATURE_SCHEMA_VERSION)
    report = evaluate_scores(y[test], model.score(X[test]), 0.5, kind, [table.ids[i] for i in test])
    return model, report


def cmd_train(args, config: Config) -> int:
    table = read_feature_csv(args.features, config)
    model, report = train_and_evaluate(table, args.kind, config)
    save_model(model, args.out)
    prefix = Path(args.report) if args.report else Path(args.out).with_suffix("")
    Path(f"{prefix}.report.txt").write_text(report.to_table())
    Path(f"{prefix}.report.json").write_text(report.to_json())
    sys.stdout.write(report.to_table())
    return 0


# -------------------------------------------------------------------- score


class ModelMismatchError(RuntimeError):
    pass


def check_model_compatible(model, config: Config) -> None:
    if model.schema_version != FEATURE_SCHEMA_VERSION:
        raise ModelMismatchError(
            f"model built for feature schema {model.schema_version}, extractor is {FEATURE_SCHEMA_VERSION}"
        )
    available = set(feature_columns(config))
    missing = [c for c in model.feature_names if c not in available]
    if missing:
        raise ModelMismatchError(f"extractor does not produce model features: {', '.join(missing)}")


def cmd_score(args, config: Config) -> int:
    model = load_model(args.model)
    check_model_compatible(model, config)
    entries = [ManifestEntry(str(p), Path(p).stem, None, str(p)) for p in args.images]
    table = extract_table(entries, config)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    any_blurry = any_failed = False
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["path", "score", "verdict"] + list(table.columns) + ["error"])
        for i, ident in enumerate(table.ids):
            if table.errors[i]:
                any_failed = True
                w.writerow([ident, "", "error"] + [""] * len(table.columns) + [table.errors[i]])
                continue
            x = table.values[i : i + 1, [table.columns.index(c) for c in model.feature_names]]
            score = float(model.score(x)[0])
            verdict = "acceptable" if score >= 0.5 else "blurry"
            any_blurry |= verdict == "blurry"
            w.writerow([ident, repr(score), verdict] + [repr(float(v)) for v in table.values[i]] + [""])
    finally:
        if args.out:
            out.close()
    if any_failed:
        return 1
    return 2 if any_blurry else 0


# --------------------------------------------------------------- dump-debug


def cmd_dump_debug(args, config: Config) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gray = to_grayscale(load_image(args.image))
    fmask = fundus_mask(gray, config.mask_threshold)
    vmap = frangi(gray, config.frangi, fmask, downscale=config.frangi_downscale)
    maps = {
        "gray": gray,
        "fundus_mask": fmask.astype(np.float64),
        "sobel_magnitude": sobel_magnitude(gray),
        "laplacian": laplacian(gray),
        "vesselness": vmap,
        "perivascular_mask": perivascular_mask(vmap, 1.0, config.perivascular_variant),
    }
    for name, m in maps.items():
        save_debug_png(m, out / f"{name}.png")
    log.info("wrote %d debug images to %s", len(maps), out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--seed", type=int, help="random seed for splits and models")
    common.add_argument("--workers", type=int, help="parallel image workers")
    common.add_argument("--mask-all-metrics", action="store_true", help="restrict every metric to the fundus mask")
    common.add_argument("--split", choices=("subject", "image"), help="keep subjects together or split per image")
    common.add_argument("--frangi-downscale", type=int, help="run the vesselness filter at 1/N resolution")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fundusqa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="compute the feature CSV for a manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("pca", parents=[common], help="2-component PCA of one feature cluster")
    p.add_argument("features")
    p.add_argument("--cluster", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("train", parents=[common], help="split, train, evaluate and save a model")
    p.add_argument("features")
    p.add_argument("--kind", choices=MODEL_KINDS, default="logreg_cv")
    p.add_argument("-o", "--out", required=True, help="model file")
    p.add_argument("--report", help="report path prefix (default: model path without suffix)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", parents=[common], help="triage images with a saved model")
    p.add_argument("model")
    p.add_argument("images", nargs="+")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("dump-debug", parents=[common], help="write intermediate maps as 16-bit PNGs")
    p.add_argument("image")
    p.add_argument("-o", "--out-dir", required=True)
    p.set_defaults(func=cmd_dump_debug)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = build_config(args)
        return args.func(args, config)
    except (ConfigError, SchemaError, ValueError, OSError, RuntimeError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
