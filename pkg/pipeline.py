# pipeline.py - tensile + dimensional test data → model-ready feature matrix
"""
Cleaning chain for the bolt test dataset:

    ingest → impute_missing → engineer_features → handle_outliers → bootstrap_augment

Rows travel as pandas DataFrames in input order. Each stage returns a new
frame; the imputation and outlier stages also return a report (list of dicts)
that the CLI writes next to the feature matrix.

Assumptions (not measured values): the cross-section area defaults to the
minor-diameter circle of a 1"-4 ACME thread, pi * 0.375**2 in², and the gauge
length to 4.0 in.
"""
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from errors import (
    DuplicateKey,
    EmptyInput,
    FractureNotTerminal,
    InputError,
    MissingColumn,
    MissingMeasurement,
    NonPositiveArea,
    NonPositiveLength,
    UnimputableCell,
    UnpairedDimensionalColumn,
)

logger = logging.getLogger("pmi-dt.pipeline")

FAILURE_TOKEN = "failure"
ROTATED_SUFFIX = "_90"

KEY_COLUMNS = ["bolt_id", "test_num"]
MEASUREMENT_COLUMNS = ["max_load", "max_position"]
REQUIRED_COLUMNS = KEY_COLUMNS + MEASUREMENT_COLUMNS + ["fracture"]
DERIVED_COLUMNS = ["stress", "strain"]
CARRIED_FLAGS = {"max_load": "max_load_carried", "max_position": "max_position_carried"}
RESERVED_COLUMNS = set(REQUIRED_COLUMNS) | set(DERIVED_COLUMNS) | set(CARRIED_FLAGS.values()) | {
    "failure", "source_bolt",
}

_TRUE = {"true", "1", "yes", "y", "t"}
_FALSE = {"false", "0", "no", "n", "f", ""}


class PipelineConfig(BaseModel):
    area: float = math.pi * 0.375 ** 2
    initial_length: float = 4.0
    z_threshold: float = 3.0
    bootstrap_bolts: int = 100
    max_tests: int = 11
    seed: int = Field(default=42, ge=0)
    drop_fracture_rows: bool = False

    @field_validator("z_threshold")
    @classmethod
    def _z_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("z_threshold must be positive")
        return v

    @field_validator("bootstrap_bolts", "max_tests")
    @classmethod
    def _at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v


class TestRecord(BaseModel):
    """One tensile test of one bolt, with its dimensional inspection."""

    __test__ = False  # not a pytest class

    bolt_id: str
    test_num: int = Field(ge=1)
    max_load: Optional[float] = None
    max_position: Optional[float] = None
    dimensional: Dict[str, Optional[float]] = {}
    fracture: bool = False


def dimensional_columns(df: pd.DataFrame) -> List[str]:
    return [c for c in df.columns if c not in RESERVED_COLUMNS]


def _parse_bool(value: str, where: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise InputError(f"{where}: cannot read {value!r} as a boolean")


def _parse_measurement(value: str, where: str) -> Tuple[float, bool]:
    """Return (number or NaN, is_failure_token)."""
    v = value.strip()
    if not v:
        return np.nan, False
    if v.lower() == FAILURE_TOKEN:
        return np.nan, True
    try:
        return float(v), False
    except ValueError:
        raise InputError(f"{where}: cannot read {value!r} as a number")


# ── ingest ──────────────────────────────────────────────────────────────
def ingest(csv_text: str) -> pd.DataFrame:
    """Parse the raw test CSV. Empty cells become NaN; 'Failure' marks a fracture."""
    if csv_text.startswith("\ufeff"):
        csv_text = csv_text[1:]
    try:
        raw = pd.read_csv(io.StringIO(csv_text), dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"Cannot parse dataset: {e}")
    raw.columns = [c.strip() for c in raw.columns]

    missing = [c for c in REQUIRED_COLUMNS if c not in raw.columns]
    if missing:
        raise MissingColumn(f"Dataset lacks required columns: {', '.join(missing)}")

    dims = [c for c in raw.columns if c not in RESERVED_COLUMNS]
    for col in dims:
        partner = col[: -len(ROTATED_SUFFIX)] if col.endswith(ROTATED_SUFFIX) else col + ROTATED_SUFFIX
        if partner not in raw.columns:
            raise UnpairedDimensionalColumn(f"Column {col} has no {partner} counterpart")

    numeric = MEASUREMENT_COLUMNS + dims
    out: Dict[str, list] = {c: [] for c in REQUIRED_COLUMNS + dims}
    for i, row in enumerate(raw.itertuples(index=False), start=2):
        rec = dict(zip(raw.columns, row))
        where = f"line {i}"
        bolt_id = rec["bolt_id"].strip()
        if not bolt_id:
            raise InputError(f"{where}: empty bolt_id")
        try:
            test_num = int(rec["test_num"].strip())
        except ValueError:
            raise InputError(f"{where}: test_num {rec['test_num']!r} is not an integer")
        if test_num < 1:
            raise InputError(f"{where}: test_num must be ≥ 1")
        fracture = _parse_bool(rec["fracture"], where)
        out["bolt_id"].append(bolt_id)
        out["test_num"].append(test_num)
        for col in numeric:
            value, failed = _parse_measurement(rec[col], f"{where}, {col}")
            fracture = fracture or failed
            out[col].append(value)
        out["fracture"].append(fracture)

    df = pd.DataFrame(out, columns=REQUIRED_COLUMNS + dims)
    df["test_num"] = df["test_num"].astype("int64")
    df["fracture"] = df["fracture"].astype(bool)
    for col in numeric:
        df[col] = df[col].astype("float64")

    dupes = df[df.duplicated(KEY_COLUMNS, keep=False)]
    if not dupes.empty:
        first = dupes.iloc[0]
        raise DuplicateKey(f"({first['bolt_id']}, {first['test_num']}) appears more than once")

    for bolt_id, series in df.groupby("bolt_id", sort=False):
        fractures = series.loc[series["fracture"], "test_num"]
        if not fractures.empty and (series["test_num"] > fractures.min()).any():
            raise FractureNotTerminal(f"{bolt_id} has tests after its fracture at test {fractures.min()}")

    logger.info(f"✅ Ingested {len(df)} tests of {df['bolt_id'].nunique()} bolts, {len(dims)} dimensional columns")
    return df


def records(df: pd.DataFrame) -> List[TestRecord]:
    dims = dimensional_columns(df)
    result = []
    for _, row in df.iterrows():
        result.append(TestRecord(
            bolt_id=row["bolt_id"],
            test_num=int(row["test_num"]),
            max_load=None if pd.isna(row["max_load"]) else float(row["max_load"]),
            max_position=None if pd.isna(row["max_position"]) else float(row["max_position"]),
            dimensional={c: None if pd.isna(row[c]) else float(row[c]) for c in dims},
            fracture=bool(row["fracture"]),
        ))
    return result


def _series_order(df: pd.DataFrame) -> List[pd.Index]:
    """Row labels of each bolt's tests in test order, bolts in first-appearance order."""
    return [series.sort_values("test_num", kind="stable").index
            for _, series in df.groupby("bolt_id", sort=False)]


# ── imputation ──────────────────────────────────────────────────────────
def impute_missing(df: pd.DataFrame) -> Tuple[pd.DataFrame, List[dict]]:
    """
    Fill dimensional gaps: a missing value takes its rotated counterpart from
    the same row; if both are missing, the bolt's mean over its prior tests.
    """
    df = df.copy()
    report: List[dict] = []
    bases = [c for c in dimensional_columns(df) if not c.endswith(ROTATED_SUFFIX)]

    for base in bases:
        rotated = base + ROTATED_SUFFIX
        for target, source in ((base, rotated), (rotated, base)):
            mask = df[target].isna() & df[source].notna()
            for idx in df.index[mask]:
                value = df.at[idx, source]
                df.at[idx, target] = value
                report.append({"row": int(idx), "bolt_id": df.at[idx, "bolt_id"],
                               "test_num": int(df.at[idx, "test_num"]), "column": target,
                               "source": "rotated_pair", "value": float(value)})

    for order in _series_order(df):
        for pos, idx in enumerate(order):
            for col in bases + [b + ROTATED_SUFFIX for b in bases]:
                if not pd.isna(df.at[idx, col]):
                    continue
                prior = df.loc[order[:pos], col].dropna()
                if prior.empty:
                    raise UnimputableCell(f"{df.at[idx, 'bolt_id']} test {df.at[idx, 'test_num']}: "
                                          f"{col} and its pair are missing with no prior test")
                value = float(prior.mean())
                df.at[idx, col] = value
                report.append({"row": int(idx), "bolt_id": df.at[idx, "bolt_id"],
                               "test_num": int(df.at[idx, "test_num"]), "column": col,
                               "source": "prior_mean", "value": value})

    if report:
        logger.info(f"✅ Imputed {len(report)} dimensional cells")
    return df, report


# ── feature engineering ─────────────────────────────────────────────────
def _recompute_derived(df: pd.DataFrame, config: PipelineConfig):
    df["stress"] = df["max_load"] / config.area
    df["strain"] = df["max_position"] / config.initial_length


def engineer_features(df: pd.DataFrame, config: PipelineConfig) -> pd.DataFrame:
    """
    Add stress, strain and the binary failure label.

    A fracture row without a measurement inherits the bolt's last observed
    value; the inherited cell is marked in `<column>_carried`.
    """
    if not config.area > 0:
        raise NonPositiveArea(f"Cross-section area must be positive, got {config.area}")
    if not config.initial_length > 0:
        raise NonPositiveLength(f"Initial length must be positive, got {config.initial_length}")

    df = df.copy()
    for col, flag in CARRIED_FLAGS.items():
        df[flag] = False
        for order in _series_order(df):
            last = np.nan
            for idx in order:
                value = df.at[idx, col]
                if not pd.isna(value):
                    last = value
                    continue
                where = f"{df.at[idx, 'bolt_id']} test {df.at[idx, 'test_num']}"
                if not df.at[idx, "fracture"]:
                    raise MissingMeasurement(f"{where}: {col} is missing on a non-fracture test")
                if pd.isna(last):
                    raise MissingMeasurement(f"{where}: fracture on the first test leaves no {col} to carry")
                df.at[idx, col] = last
                df.at[idx, flag] = True

    _recompute_derived(df, config)
    df["failure"] = df["fracture"].astype("int64")
    return df


def drop_carried_rows(df: pd.DataFrame) -> pd.DataFrame:
    """Drop fracture rows whose measurements were inherited rather than observed."""
    carried = df[list(CARRIED_FLAGS.values())].any(axis=1)
    return df.loc[~carried].reset_index(drop=True)


# ── outliers ────────────────────────────────────────────────────────────
def outlier_columns(df: pd.DataFrame) -> List[str]:
    return MEASUREMENT_COLUMNS + dimensional_columns(df)


def handle_outliers(df: pd.DataFrame, config: PipelineConfig) -> Tuple[pd.DataFrame, List[dict]]:
    """
    Replace values with |z| > z_threshold by the mean of the same bolt's
    earlier, unflagged values in that column. A flagged first test falls back
    to the column mean without the flagged values.
    """
    original = df
    df = df.copy()
    report: List[dict] = []
    orders = _series_order(df)

    for col in outlier_columns(df):
        flag_col = CARRIED_FLAGS.get(col)
        observed = ~original[flag_col] if flag_col else pd.Series(True, index=original.index)
        values = original.loc[observed, col]
        if len(values) < 2:
            continue
        mean, std = values.mean(), values.std(ddof=1)
        if not std > 0:
            continue
        z = (values - mean) / std
        flagged = z.abs() > config.z_threshold
        if not flagged.any():
            continue
        usable = observed.copy()
        usable[flagged[flagged].index] = False
        fallback = float(original.loc[usable, col].mean())

        for order in orders:
            for pos, idx in enumerate(order):
                if idx not in flagged.index or not flagged[idx]:
                    continue
                prior = [p for p in order[:pos] if usable[p]]
                replacement = float(original.loc[prior, col].mean()) if prior else fallback
                df.at[idx, col] = replacement
                report.append({"row": int(idx), "bolt_id": df.at[idx, "bolt_id"],
                               "test_num": int(df.at[idx, "test_num"]), "column": col,
                               "original": float(original.at[idx, col]), "replacement": replacement,
                               "z": float(z[idx])})

    for col, flag_col in CARRIED_FLAGS.items():
        if flag_col not in df.columns:
            continue
        for order in orders:
            last = np.nan
            for idx in order:
                if df.at[idx, flag_col]:
                    df.at[idx, col] = last
                else:
                    last = df.at[idx, col]

    if "stress" in df.columns:
        _recompute_derived(df, config)
    logger.info(f"✅ Outlier pass replaced {len(report)} values")
    return df, report


# ── bootstrap ───────────────────────────────────────────────────────────
def bootstrap_draws(n_series: int, n_draws: int, seed: int) -> np.ndarray:
    """Indices of the original series picked for each virtual bolt."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, n_series, size=n_draws)


def bootstrap_augment(df: pd.DataFrame, config: PipelineConfig) -> pd.DataFrame:
    """Build `bootstrap_bolts` virtual bolts, each a copy of one drawn bolt's whole series."""
    if df.empty:
        raise EmptyInput("Cannot bootstrap an empty dataset")
    series = [df.loc[order] for order in _series_order(df)]
    draws = bootstrap_draws(len(series), config.bootstrap_bolts, config.seed)
    width = max(3, len(str(config.bootstrap_bolts)))

    parts = []
    for k, pick in enumerate(draws, start=1):
        part = series[int(pick)].head(config.max_tests).copy()
        part["source_bolt"] = part["bolt_id"]
        part["bolt_id"] = f"Bolt_V{k:0{width}d}"
        parts.append(part)
    out = pd.concat(parts, ignore_index=True)
    cols = ["bolt_id"] + [c for c in out.columns if c not in ("bolt_id", "source_bolt")] + ["source_bolt"]
    out = out[cols]
    logger.info(f"✅ Bootstrapped {config.bootstrap_bolts} virtual bolts → {len(out)} rows "
                f"({int(out['fracture'].sum())} fracture rows)")
    return out


# ── descriptive statistics ──────────────────────────────────────────────
def describe(df: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Mean, sample stddev, min and max per column, largest stddev first."""
    if df.empty:
        raise EmptyInput("Cannot describe an empty dataset")
    columns = list(columns) if columns is not None else dimensional_columns(df)
    stats = pd.DataFrame({
        "mean": df[columns].mean(),
        "stddev": df[columns].std(ddof=1).fillna(0.0),
        "min": df[columns].min(),
        "max": df[columns].max(),
    })
    stats.index.name = "column"
    return stats.sort_values("stddev", ascending=False, kind="stable")


# ── whole chain ─────────────────────────────────────────────────────────
@dataclass
class PreparedData:
    raw: pd.DataFrame
    imputed: pd.DataFrame
    imputation_report: List[dict]
    features: pd.DataFrame
    outlier_report: List[dict]
    cleaned: pd.DataFrame
    augmented: Optional[pd.DataFrame] = None
    stats: pd.DataFrame = field(default_factory=pd.DataFrame)


def prepare(csv_text: str, config: PipelineConfig, bootstrap: bool = True) -> PreparedData:
    raw = ingest(csv_text)
    imputed, imputation_report = impute_missing(raw)
    features = engineer_features(imputed, config)
    cleaned, outlier_report = handle_outliers(features, config)
    if config.drop_fracture_rows:
        before = len(cleaned)
        cleaned = drop_carried_rows(cleaned)
        logger.info(f"⚠️ Dropped {before - len(cleaned)} fracture rows with carried measurements")
    augmented = bootstrap_augment(cleaned, config) if bootstrap else None
    return PreparedData(
        raw=raw,
        imputed=imputed,
        imputation_report=imputation_report,
        features=features,
        outlier_report=outlier_report,
        cleaned=cleaned,
        augmented=augmented,
        stats=describe(cleaned),
    )


def feature_names(df: pd.DataFrame, include_derived: bool = False) -> List[str]:
    names = MEASUREMENT_COLUMNS + dimensional_columns(df)
    if include_derived:
        names = names + DERIVED_COLUMNS
    return names


def model_matrix(df: pd.DataFrame, include_derived: bool = False) -> Tuple[List[str], np.ndarray, np.ndarray]:
    """(feature names, X, y) with y the failure label."""
    names = feature_names(df, include_derived)
    X = df[names].to_numpy(dtype=np.float64)
    if np.isnan(X).any():
        raise MissingMeasurement("Feature matrix still contains missing values")
    y = df["failure"].to_numpy(dtype=np.int64)
    return names, X, y
