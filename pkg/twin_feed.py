# twin_feed.py - push the bolt test dataset into the twin store
"""
One twin per bolt. The twin is created from the bolt's first dimensional
inspection, then receives one patch per tensile test in test order, so the
twin's history mirrors the test campaign.
"""
import logging
from typing import Any, Dict, List, Optional

import pandas as pd

from pipeline import dimensional_columns
from twin_model import PropertyKind, PropertySpec, TwinModel
from twin_store import TwinStore

logger = logging.getLogger("pmi-dt.twin-feed")

BOLT_MODEL_ID = "dtmi:acme:Bolt;1"

# properties listed first on the bolt twin screen
PRIMARY_PROPERTIES = [
    ("Overall_Length", PropertyKind.FLOAT, "in"),
    ("Major_Diameter_1", PropertyKind.FLOAT, "in"),
    ("Angle_Left_1", PropertyKind.FLOAT, "deg"),
    ("Max_Load", PropertyKind.FLOAT, "lbf"),
    ("Max_Position", PropertyKind.FLOAT, "in"),
    ("Fracture", PropertyKind.BOOLEAN, None),
]
DATASET_TO_PROPERTY = {"max_load": "Max_Load", "max_position": "Max_Position", "fracture": "Fracture",
                       "test_num": "Test_Num"}


def _unit(column: str) -> str:
    return "deg" if column.lower().startswith("angle") else "in"


def bolt_model(df: pd.DataFrame, model_id: str = BOLT_MODEL_ID) -> TwinModel:
    """Twin type for the dataset's columns: primary properties first, then Test_Num and every other dimension."""
    specs: List[PropertySpec] = []
    dims = dimensional_columns(df)
    for name, kind, unit in PRIMARY_PROPERTIES:
        if kind is PropertyKind.FLOAT and name not in ("Max_Load", "Max_Position") and name not in dims:
            continue
        specs.append(PropertySpec(name=name, kind=kind, unit=unit))
    specs.append(PropertySpec(name="Test_Num", kind=PropertyKind.INTEGER))
    taken = {s.name for s in specs}
    specs += [PropertySpec(name=c, kind=PropertyKind.FLOAT, unit=_unit(c)) for c in dims if c not in taken]
    return TwinModel(model_id=model_id, display_name="ACME Bolt", properties=tuple(specs))


def _present(row: pd.Series, columns: List[str]) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for col in columns:
        value = row[col]
        if pd.isna(value):
            continue
        values[col] = float(value)
    return values


def feed_dataset(df: pd.DataFrame, store: TwinStore, model: Optional[TwinModel] = None) -> Dict[str, int]:
    """Create or extend twins from an ingested dataset; returns the twin versions reached."""
    model = model or bolt_model(df)
    store.register_model(model)
    known = set(model.property_names)
    dims = [c for c in dimensional_columns(df) if c in known]
    skipped = [c for c in dimensional_columns(df) if c not in known]
    if skipped:
        logger.warning(f"⚠️ Model {model.model_id} has no property for: {', '.join(skipped)}")

    existing = set(store.list_twins())
    versions: Dict[str, int] = {}
    for bolt_id, series in df.groupby("bolt_id", sort=False):
        series = series.sort_values("test_num", kind="stable")
        if bolt_id in existing:
            logger.warning(f"⚠️ Twin {bolt_id} already exists, skipping")
            continue
        first = series.iloc[0]
        initial = _present(first, dims)
        if "Fracture" in known:
            initial["Fracture"] = False
        twin = store.create_twin(bolt_id, model.model_id, initial)
        for i, (_, row) in enumerate(series.iterrows()):
            changes = {} if i == 0 else _present(row, dims)
            for col, prop in DATASET_TO_PROPERTY.items():
                if prop not in known:
                    continue
                value = row[col]
                if col == "fracture":
                    changes[prop] = bool(value)
                elif col == "test_num":
                    changes[prop] = int(value)
                elif not pd.isna(value):
                    changes[prop] = float(value)
            twin = store.patch_properties(bolt_id, changes)
        versions[bolt_id] = twin.version
    logger.info(f"✅ Fed {len(versions)} bolt twins into the store")
    return versions
