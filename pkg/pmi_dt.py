# pmi_dt.py - command line entry point for the bolt predictive-maintenance twin
"""
Workflow: validate the part against the scanner, ingest test data, prepare
the feature matrix, train, evaluate, serve the twin store, predict.

    python pmi_dt.py run-all data/bolt_tests.csv --out-dir artifacts
    python pmi_dt.py validate-geometry data/bolt_synthetic.stl --features data/bolt_features.csv

Exit codes: 0 success, 1 validation or model failure, 2 I/O or usage error.
All randomness comes from --seed, which is recorded in the run manifest.
"""
import functools
import hashlib
import json
import logging
import sys
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np
import pandas as pd
import uvicorn
from pydantic import BaseModel, ValidationError

import ml
from errors import InputError, InvalidConfig, MissingColumn, PmiError
from evaluation import evaluate_predictions
from inspect_geom import check_containment, coverage, scan_deviation
from mesh_io import load_features, load_mesh, load_scanner_config
from pipeline import (
    PipelineConfig,
    bootstrap_augment,
    ingest,
    model_matrix,
    prepare,
)
from settings import DEFAULT_SCANNER, Settings, load_settings
from twin_feed import feed_dataset
from twin_model import load_model_file
from twin_server import create_app
from twin_store import TwinStore

logger = logging.getLogger("pmi-dt.cli")

MANIFEST_FILE = "manifest.json"


class RunManifest(BaseModel):
    command: str
    created_at: str
    seed: int
    config: Dict[str, Any]
    flags: Dict[str, Any] = {}
    inputs: Dict[str, str] = {}
    outputs: Dict[str, Dict[str, str]] = {}
    stage_seconds: Dict[str, float] = {}
    results: Dict[str, Any] = {}


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Collects timings and outputs for one command, then writes the manifest."""

    def __init__(self, command: str, settings: Settings, out_dir: Path, flags: Optional[Dict[str, Any]] = None):
        self.out_dir = out_dir
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(
            command=command,
            created_at=datetime.now(timezone.utc).isoformat(),
            seed=settings.pipeline.seed,
            config=settings.model_dump(mode="json"),
            flags=flags or {},
        )

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        logger.info(f"▶️ {name}")
        yield
        self.manifest.stage_seconds[name] = round(time.perf_counter() - start, 6)

    def add_input(self, path):
        self.manifest.inputs[str(path)] = sha256_file(path)

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.out_dir / name
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        self._record(name, path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        self._record(name, path)
        return path

    def write_csv(self, name: str, df: pd.DataFrame) -> Path:
        path = self.out_dir / name
        df.to_csv(path, index=False, lineterminator="\n")
        self._record(name, path)
        return path

    def record(self, name: str, path: Path):
        self._record(name, path)

    def _record(self, name: str, path: Path):
        self.manifest.outputs[name] = {"path": str(path), "sha256": sha256_file(path)}

    def finish(self) -> Path:
        path = self.out_dir / MANIFEST_FILE
        path.write_text(self.manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info(f"✅ Manifest written to {path}")
        return path


def handle_errors(fn):
    """Turn PmiError into a JSON diagnostic on stderr and the error's exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PmiError as e:
            logger.error(f"❌ {e.error_code}: {e.message}")
            click.echo(json.dumps(e.to_dict()), err=True)
            sys.exit(e.exit_code)
        except OSError as e:
            logger.error(f"❌ I/O error: {e}")
            click.echo(json.dumps({"error_code": "IOError", "message": str(e)}), err=True)
            sys.exit(2)

    return wrapper


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as e:
        raise InputError(f"Cannot read {path}: {e}")


def _read_matrix(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"Cannot read feature matrix {path}: {e}")


def _pipeline_config(settings: Settings, **overrides) -> PipelineConfig:
    data = settings.pipeline.model_dump()
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise InvalidConfig(f"Invalid pipeline options: {e.error_count()} errors")


def _train_config(settings: Settings, **overrides) -> ml.TrainConfig:
    data = settings.train.model_dump()
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ml.TrainConfig.model_validate(data)
    except ValidationError as e:
        raise InvalidConfig(f"Invalid training options: {e.error_count()} errors")


def _pipeline_options(fn):
    for decorator in reversed([
        click.option("--area", type=float, default=None, help="Cross-section area in in² (assumed)."),
        click.option("--l0", "initial_length", type=float, default=None, help="Gauge length in inches (assumed)."),
        click.option("--z-threshold", type=float, default=None, help="|z| above which a value is an outlier."),
        click.option("--bootstrap-bolts", type=int, default=None, help="Number of virtual bolts."),
        click.option("--drop-fracture-rows", is_flag=True, default=False,
                     help="Drop fracture rows whose measurements had to be carried."),
    ]):
        fn = decorator(fn)
    return fn


def _train_options(fn):
    for decorator in reversed([
        click.option("--criterion", type=click.Choice(["gini", "entropy"]), default=None),
        click.option("--max-depth", type=int, default=None),
        click.option("--n-trees", type=int, default=None),
        click.option("--test-fraction", type=float, default=None),
        click.option("--n-jobs", type=int, default=None, help="Threads for forest training."),
        click.option("--include-derived", is_flag=True, default=False, help="Also train on stress and strain."),
    ]):
        fn = decorator(fn)
    return fn


# ── group ───────────────────────────────────────────────────────────────
@click.group()
@click.option("--seed", type=int, default=None, help="Master seed for bootstrap, split and forest.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Settings JSON file.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Artifact directory.")
@click.option("--log-level", default="INFO", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"],
                                                              case_sensitive=False))
@click.pass_context
@handle_errors
def cli(ctx, seed, config_path, out_dir, log_level):
    """Bolt predictive-maintenance digital twin toolkit."""
    logging.basicConfig(level=getattr(logging, log_level.upper()), format="%(levelname)s %(name)s: %(message)s")
    settings = load_settings(config_path)
    if seed is not None:
        if seed < 0:
            raise InvalidConfig(f"--seed must be non-negative, got {seed}")
        settings.pipeline.seed = seed
        settings.train.seed = seed
    if out_dir is not None:
        settings.out_dir = out_dir
    ctx.obj = settings


# ── geometry ────────────────────────────────────────────────────────────
@cli.command("validate-geometry")
@click.argument("mesh_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--scanner", "scanner_path", type=click.Path(exists=True, dir_okay=False), default=DEFAULT_SCANNER)
@click.option("--features", "features_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--policy", type=click.Choice(["any", "pair"]), default="any")
@click.option("--scan", "scan_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Optional x,y,z point cloud to compare against the mesh.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
@handle_errors
def validate_geometry(settings: Settings, mesh_path, scanner_path, features_path, policy, scan_path, report_path):
    """Check that the part fits the inspection volume and every feature can be seen."""
    mesh = load_mesh(mesh_path)
    scanner = load_scanner_config(scanner_path)
    containment = check_containment(mesh, scanner.cylinder)
    report: Dict[str, Any] = {"mesh": mesh_path, "containment": containment.model_dump()}
    passed = containment.fully_inside

    if features_path:
        features = load_features(features_path)
        cov = coverage(mesh, features, scanner, policy=policy)
        report["coverage"] = cov.model_dump()
        passed = passed and cov.all_inspectable

    if scan_path:
        try:
            points = pd.read_csv(scan_path)[["x", "y", "z"]].to_numpy(dtype=np.float64)
        except (KeyError, ValueError, pd.errors.ParserError) as e:
            raise InputError(f"Cannot read scan {scan_path}: {e}")
        _, summary = scan_deviation(points, mesh)
        report["scan_deviation"] = summary.model_dump()

    report["passed"] = passed
    text = json.dumps(report, indent=2)
    if report_path:
        Path(report_path).write_text(text + "\n", encoding="utf-8")
    click.echo(text)
    if passed:
        logger.info("✅ Geometry validation passed")
    else:
        logger.info("❌ Geometry validation failed")
        sys.exit(1)


# ── data ────────────────────────────────────────────────────────────────
@cli.command("ingest")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--store", "store_dir", type=click.Path(file_okay=False), default=None,
              help="Feed the tests into this twin store directory.")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Twin model document; derived from the header if omitted.")
@click.pass_obj
@handle_errors
def ingest_cmd(settings: Settings, dataset, store_dir, model_path):
    """Parse a test dataset and optionally push it into the twin store."""
    df = ingest(_read_text(dataset))
    summary = {
        "rows": len(df),
        "bolts": int(df["bolt_id"].nunique()),
        "fractures": int(df["fracture"].sum()),
        "missing_cells": int(df.drop(columns=["bolt_id", "test_num", "fracture"]).isna().sum().sum()),
    }
    if store_dir:
        store = TwinStore.open(store_dir)
        try:
            model = load_model_file(model_path) if model_path else None
            summary["twins"] = feed_dataset(df, store, model)
        finally:
            store.close()
    click.echo(json.dumps(summary, indent=2))


@cli.command("prepare")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@_pipeline_options
@click.option("--no-bootstrap", is_flag=True, default=False, help="Stop after outlier handling.")
@click.pass_obj
@handle_errors
def prepare_cmd(settings: Settings, dataset, area, initial_length, z_threshold, bootstrap_bolts,
                drop_fracture_rows, no_bootstrap):
    """Impute, engineer features, replace outliers and bootstrap."""
    config = _pipeline_config(settings, area=area, initial_length=initial_length, z_threshold=z_threshold,
                              bootstrap_bolts=bootstrap_bolts, drop_fracture_rows=drop_fracture_rows or None)
    settings.pipeline = config
    run = Run("prepare", settings, Path(settings.out_dir), flags={"no_bootstrap": no_bootstrap})
    run.add_input(dataset)
    with run.stage("prepare"):
        data = prepare(_read_text(dataset), config, bootstrap=not no_bootstrap)
    _write_prepared(run, data)
    matrix = data.augmented if data.augmented is not None else data.cleaned
    run.write_csv("feature_matrix.csv", matrix)
    run.manifest.results["rows"] = len(matrix)
    run.finish()
    click.echo(f"✅ {len(matrix)} rows → {run.out_dir / 'feature_matrix.csv'}")


def _write_prepared(run: Run, data):
    run.write_csv("cleaned.csv", data.cleaned)
    run.write_json("imputation_report.json", data.imputation_report)
    run.write_json("outlier_report.json", data.outlier_report)
    stats = data.stats.reset_index().to_dict(orient="records")
    run.write_json("describe.json", stats)


# ── models ──────────────────────────────────────────────────────────────
def _fit_and_report(run: Run, settings: Settings, train_df: pd.DataFrame, test_df: pd.DataFrame,
                    train_config: ml.TrainConfig, include_derived: bool, kinds: List[str]):
    names, X_train, y_train = model_matrix(train_df, include_derived)
    _, X_test, y_test = model_matrix(test_df, include_derived)
    defaults = X_train.mean(axis=0)
    pipeline_meta = {"area": settings.pipeline.area, "initial_length": settings.pipeline.initial_length}
    run.manifest.results["split"] = {"train": len(train_df), "test": len(test_df)}

    for kind in kinds:
        with run.stage(f"train_{kind}"):
            if kind == "tree":
                model = ml.grow_tree(X_train, y_train, train_config)
            else:
                model = ml.train_forest(X_train, y_train, train_config)
        path = ml.save_model(model, run.out_dir / f"model_{kind}.json", names, defaults, pipeline_meta)
        run.record(f"model_{kind}.json", path)

        with run.stage(f"evaluate_{kind}"):
            report = evaluate_predictions(ml.predict(model, X_test), y_test)
        importances = ml.feature_importances(model, names)
        ranked = dict(sorted(importances.items(), key=lambda kv: (-kv[1], names.index(kv[0]))))
        run.write_json(f"report_{kind}.json", report.model_dump())
        run.write_text(f"report_{kind}.txt", report.text + "\n\n" + report.confusion_text)
        run.write_json(f"importances_{kind}.json", ranked)
        run.manifest.results[kind] = {"accuracy": report.accuracy, "confusion": report.confusion,
                                      "top_features": list(ranked)[:5]}
        click.echo(f"{kind}: accuracy {report.accuracy:.4f}")
        click.echo(report.text)
        click.echo(report.confusion_text)


@cli.command("train")
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(["tree", "forest", "both"]), default="both")
@_train_options
@click.pass_obj
@handle_errors
def train_cmd(settings: Settings, matrix, kind, criterion, max_depth, n_trees, test_fraction, n_jobs,
              include_derived):
    """Split a feature matrix, train, and report on the held-out part."""
    config = _train_config(settings, criterion=criterion, max_depth=max_depth, n_trees=n_trees,
                           test_fraction=test_fraction, n_jobs=n_jobs)
    settings.train = config
    run = Run("train", settings, Path(settings.out_dir), flags={"include_derived": include_derived})
    run.add_input(matrix)
    df = _read_matrix(matrix)
    train_df, test_df = ml.train_test_split(df, config.test_fraction, config.seed)
    run.write_csv("train_matrix.csv", train_df)
    run.write_csv("test_matrix.csv", test_df)
    kinds = ["tree", "forest"] if kind == "both" else [kind]
    _fit_and_report(run, settings, train_df, test_df, config, include_derived, kinds)
    run.finish()


def _matrix_for(saved: ml.SavedModel, df: pd.DataFrame) -> np.ndarray:
    missing = [n for n in saved.feature_names if n not in df.columns]
    if missing:
        raise MissingColumn(f"Feature matrix lacks model features: {', '.join(missing)}")
    return df[saved.feature_names].to_numpy(dtype=np.float64)


@cli.command("evaluate")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False))
@handle_errors
def evaluate_cmd(model_path, matrix):
    """Score a saved model on a labelled matrix; reports land next to the model file."""
    saved = ml.load_model(model_path)
    df = _read_matrix(matrix)
    if "failure" not in df.columns:
        raise MissingColumn("Feature matrix has no failure column")
    report = evaluate_predictions(ml.predict(saved.model, _matrix_for(saved, df)), df["failure"].to_numpy())
    stem = Path(model_path).with_suffix("")
    Path(f"{stem}.eval.json").write_text(json.dumps(report.model_dump(), indent=2) + "\n", encoding="utf-8")
    Path(f"{stem}.eval.txt").write_text(report.text + "\n\n" + report.confusion_text + "\n", encoding="utf-8")
    click.echo(report.text)
    click.echo(report.confusion_text)


@cli.command("predict")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="CSV path; stdout if omitted.")
@handle_errors
def predict_cmd(model_path, matrix, output):
    """Predict fracture for every row of a feature matrix."""
    saved = ml.load_model(model_path)
    df = _read_matrix(matrix)
    X = _matrix_for(saved, df)
    proba = ml.predict_proba(saved.model, X)
    out = pd.DataFrame({
        "predicted_label": np.argmax(proba, axis=1),
        "fracture_probability": proba[:, 1],
    })
    keys = [c for c in ("bolt_id", "test_num") if c in df.columns]
    out = pd.concat([df[keys].reset_index(drop=True), out], axis=1)
    if output:
        out.to_csv(output, index=False, lineterminator="\n")
    else:
        click.echo(out.to_csv(index=False, lineterminator="\n"), nl=False)


# ── whole chain ─────────────────────────────────────────────────────────
@cli.command("run-all")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@_pipeline_options
@_train_options
@click.option("--split-before-bootstrap", is_flag=True, default=False,
              help="Split cleaned rows first and bootstrap only the training part.")
@click.pass_obj
@handle_errors
def run_all(settings: Settings, dataset, area, initial_length, z_threshold, bootstrap_bolts, drop_fracture_rows,
            criterion, max_depth, n_trees, test_fraction, n_jobs, include_derived, split_before_bootstrap):
    """ingest → impute → engineer → outliers → bootstrap → split → train both → evaluate."""
    settings.pipeline = _pipeline_config(settings, area=area, initial_length=initial_length,
                                         z_threshold=z_threshold, bootstrap_bolts=bootstrap_bolts,
                                         drop_fracture_rows=drop_fracture_rows or None)
    settings.train = _train_config(settings, criterion=criterion, max_depth=max_depth, n_trees=n_trees,
                                   test_fraction=test_fraction, n_jobs=n_jobs)
    include_derived = include_derived or settings.include_derived
    if split_before_bootstrap:
        settings.split_before_bootstrap = True
    flags = {
        "drop_fracture_rows": settings.pipeline.drop_fracture_rows,
        "split_before_bootstrap": settings.split_before_bootstrap,
        "include_derived": include_derived,
    }
    run = Run("run-all", settings, Path(settings.out_dir), flags=flags)
    run.add_input(dataset)

    with run.stage("prepare"):
        data = prepare(_read_text(dataset), settings.pipeline, bootstrap=False)
    _write_prepared(run, data)

    f, seed = settings.train.test_fraction, settings.train.seed
    with run.stage("bootstrap_and_split"):
        if settings.split_before_bootstrap:
            train_rows, test_df = ml.train_test_split(data.cleaned, f, seed)
            train_df = bootstrap_augment(train_rows, settings.pipeline)
            matrix = train_df
        else:
            matrix = bootstrap_augment(data.cleaned, settings.pipeline)
            train_df, test_df = ml.train_test_split(matrix, f, seed)
    run.write_csv("feature_matrix.csv", matrix)
    run.write_csv("train_matrix.csv", train_df)
    run.write_csv("test_matrix.csv", test_df)
    run.manifest.results["rows"] = {"ingested": len(data.raw), "cleaned": len(data.cleaned), "matrix": len(matrix)}
    run.manifest.results["outliers"] = len(data.outlier_report)
    run.manifest.results["imputed_cells"] = len(data.imputation_report)

    _fit_and_report(run, settings, train_df, test_df, settings.train, include_derived, ["tree", "forest"])
    run.finish()


# ── service ─────────────────────────────────────────────────────────────
@cli.command("serve")
@click.option("--store", "store_dir", type=click.Path(file_okay=False), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Saved tree/forest used by POST /twins/{id}/predict.")
@click.pass_obj
@handle_errors
def serve(settings: Settings, store_dir, host, port, model_file):
    """Run the twin store HTTP service until interrupted."""
    server = settings.server.model_copy(update={
        k: v for k, v in {"store_dir": store_dir, "host": host, "port": port, "model_file": model_file}.items()
        if v is not None
    })
    app = create_app(server)
    logger.info(f"🚀 Serving {server.store_dir} on {server.host}:{server.port}")
    try:
        uvicorn.run(app, host=server.host, port=server.port)
    except OSError as e:
        logger.error(f"❌ Cannot bind {server.host}:{server.port}: {e}")
        sys.exit(2)
    except SystemExit as e:
        if e.code not in (0, None):
            sys.exit(2)


if __name__ == "__main__":
    cli()
