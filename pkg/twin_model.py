# twin_model.py - twin type definitions (a small DTDL-style JSON dialect)
"""
Parse and validate twin-type documents.

A document looks like::

    {
      "@id": "dtmi:acme:Bolt;1",
      "displayName": "ACME Bolt",
      "contents": [
        {"@type": "Property", "name": "Overall_Length", "schema": "float", "unit": "in"},
        {"@type": "Property", "name": "Fracture", "schema": "boolean"}
      ]
    }

Schema strings are matched case-insensitively. Unknown envelope keys are
ignored with a warning so newer documents still load.
"""
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from errors import (
    DuplicateProperty,
    EmptyModel,
    InvalidModel,
    KindMismatch,
    MalformedJson,
    NonFiniteFloat,
    UnsupportedSchema,
)

logger = logging.getLogger("pmi-dt.twin-model")

Scalar = Union[bool, int, float, str]

KNOWN_ENVELOPE_KEYS = {"@id", "@type", "@context", "displayName", "contents"}
KNOWN_ENTRY_KEYS = {"@type", "name", "schema", "unit", "displayName"}


class PropertyKind(str, Enum):
    FLOAT = "Float"
    BOOLEAN = "Boolean"
    INTEGER = "Integer"
    STRING = "String"

    @classmethod
    def from_schema(cls, schema: Any) -> "PropertyKind":
        if isinstance(schema, str):
            for kind in cls:
                if kind.value.lower() == schema.strip().lower():
                    return kind
        raise UnsupportedSchema(f"Unsupported schema {schema!r}; expected float, boolean, integer or string")


class PropertySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: PropertyKind
    unit: Optional[str] = None

    @field_validator("name")
    @classmethod
    def _name_not_blank(cls, v: str) -> str:
        if not v or not v.strip():
            raise ValueError("property name must be non-empty")
        return v


class TwinModel(BaseModel):
    model_config = ConfigDict(frozen=True, protected_namespaces=())

    model_id: str
    display_name: str = ""
    properties: Tuple[PropertySpec, ...]

    @model_validator(mode="after")
    def _check_invariants(self) -> "TwinModel":
        if not self.model_id.strip():
            raise ValueError("model_id must be non-empty")
        if not self.properties:
            raise ValueError("a twin model needs at least one property")
        names = [p.name for p in self.properties]
        if len(set(names)) != len(names):
            raise ValueError("property names must be distinct")
        return self

    def get_property(self, name: str) -> Optional[PropertySpec]:
        for spec in self.properties:
            if spec.name == name:
                return spec
        return None

    @property
    def property_names(self) -> List[str]:
        return [p.name for p in self.properties]


def parse_model(document: Union[str, bytes, Dict[str, Any]]) -> TwinModel:
    """Parse a twin-type document (JSON text or an already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            data = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise MalformedJson(f"Model document is not valid JSON: {e}")
    else:
        data = document

    if not isinstance(data, dict):
        raise InvalidModel("Model document must be a JSON object")

    extra = sorted(set(data) - KNOWN_ENVELOPE_KEYS)
    if extra:
        logger.warning(f"⚠️ Ignoring unrecognized envelope keys: {', '.join(extra)}")

    model_id = data.get("@id")
    if not isinstance(model_id, str) or not model_id.strip():
        raise InvalidModel("Model document needs a non-empty '@id'")

    contents = data.get("contents")
    if contents is None:
        contents = []
    if not isinstance(contents, list):
        raise InvalidModel("'contents' must be an array")
    if not contents:
        raise EmptyModel(f"Model {model_id} declares no properties")

    specs: List[PropertySpec] = []
    seen = set()
    for entry in contents:
        if not isinstance(entry, dict):
            raise InvalidModel("Every 'contents' entry must be an object")
        entry_type = entry.get("@type", "Property")
        if entry_type != "Property":
            raise InvalidModel(f"Only Property entries are supported, got {entry_type!r}")
        name = entry.get("name")
        if not isinstance(name, str) or not name.strip():
            raise InvalidModel("Every property needs a non-empty 'name'")
        if name in seen:
            raise DuplicateProperty(f"Property {name} is declared twice in {model_id}")
        seen.add(name)
        unknown = sorted(set(entry) - KNOWN_ENTRY_KEYS)
        if unknown:
            logger.warning(f"⚠️ Property {name}: ignoring keys {', '.join(unknown)}")
        unit = entry.get("unit")
        if unit is not None and not isinstance(unit, str):
            raise InvalidModel(f"Unit of {name} must be a string")
        specs.append(PropertySpec(name=name, kind=PropertyKind.from_schema(entry.get("schema")), unit=unit))

    display_name = data.get("displayName", "")
    if not isinstance(display_name, str):
        display_name = str(display_name)
    return TwinModel(model_id=model_id, display_name=display_name, properties=tuple(specs))


def model_document(model: TwinModel) -> Dict[str, Any]:
    contents = []
    for spec in model.properties:
        entry: Dict[str, Any] = {"@type": "Property", "name": spec.name, "schema": spec.kind.value.lower()}
        if spec.unit is not None:
            entry["unit"] = spec.unit
        contents.append(entry)
    return {"@id": model.model_id, "displayName": model.display_name, "contents": contents}


def serialize_model(model: TwinModel) -> str:
    return json.dumps(model_document(model), indent=2)


def load_model_file(path: Union[str, Path]) -> TwinModel:
    text = Path(path).read_text(encoding="utf-8")
    return parse_model(text)


def validate_value(spec: PropertySpec, value: Any) -> Scalar:
    """Check `value` against the property's kind and return the stored scalar."""
    kind = spec.kind
    # bool is an int subclass; keep it out of the numeric kinds
    if kind is PropertyKind.BOOLEAN:
        if isinstance(value, bool):
            return value
    elif kind is PropertyKind.FLOAT:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = float(value)
            if not math.isfinite(value):
                raise NonFiniteFloat(f"{spec.name} must be finite, got {value}")
            return value
    elif kind is PropertyKind.INTEGER:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is PropertyKind.STRING:
        if isinstance(value, str):
            return value
    raise KindMismatch(f"{spec.name} expects {kind.value}, got {type(value).__name__} {value!r}")
