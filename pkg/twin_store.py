# twin_store.py - event-sourced store of twin instances
"""
Local stand-in for a cloud digital-twin service.

Every accepted mutation becomes an UpdateEvent appended to an NDJSON log
(`events.ndjson`); the live state is always equal to `replay(log)`.
A store directory holds:

    models.json      registered twin models, keyed by model id
    events.ndjson    one checksummed UpdateEvent per line
    snapshot.json    optional; twin state at some point of the log
"""
import hashlib
import json
import logging
import os
import threading
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, ValidationError

from errors import (
    CorruptLog,
    DuplicateTwin,
    ModelConflict,
    PmiError,
    UnknownModel,
    UnknownProperty,
    UnknownTwin,
)
from twin_model import Scalar, TwinModel, model_document, parse_model, validate_value

logger = logging.getLogger("pmi-dt.twin-store")

MODELS_FILE = "models.json"
EVENTS_FILE = "events.ndjson"
SNAPSHOT_FILE = "snapshot.json"

Clock = Callable[[], datetime]


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


class TwinInstance(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    twin_id: str
    model_id: str
    properties: Dict[str, Scalar]
    version: int


class UpdateEvent(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    twin_id: str
    model_id: str
    version: int
    timestamp: datetime
    changes: Dict[str, Scalar]


def _canonical(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def event_line(event: UpdateEvent) -> str:
    payload = event.model_dump(mode="json")
    payload["checksum"] = hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()
    return _canonical(payload)


def parse_event_line(line: str, line_no: int = 0) -> UpdateEvent:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorruptLog(f"Line {line_no}: not JSON ({e})")
    if not isinstance(payload, dict) or "checksum" not in payload:
        raise CorruptLog(f"Line {line_no}: missing checksum")
    checksum = payload.pop("checksum")
    expected = hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()
    if checksum != expected:
        raise CorruptLog(f"Line {line_no}: checksum mismatch")
    try:
        return UpdateEvent.model_validate(payload)
    except ValidationError as e:
        raise CorruptLog(f"Line {line_no}: malformed event ({e.error_count()} errors)")


def read_log(path: Union[str, Path]) -> List[UpdateEvent]:
    path = Path(path)
    if not path.exists():
        return []
    events = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                events.append(parse_event_line(line, line_no))
    return events


def _validate_changes(model: TwinModel, changes: Mapping[str, Any]) -> Dict[str, Scalar]:
    validated = {}
    for name, value in changes.items():
        spec = model.get_property(name)
        if spec is None:
            raise UnknownProperty(f"{name} is not a property of {model.model_id}")
        validated[name] = validate_value(spec, value)
    return validated


class TwinStore:
    """Single-writer, many-reader twin store. All mutations serialize on one lock."""

    def __init__(self, directory: Optional[Union[str, Path]] = None, clock: Optional[Clock] = None):
        self._lock = threading.RLock()
        self._clock = clock or utc_now
        self._models: Dict[str, TwinModel] = {}
        self._twins: Dict[str, TwinInstance] = {}
        self._events: List[UpdateEvent] = []
        self._history: Dict[str, List[UpdateEvent]] = defaultdict(list)
        self._directory = Path(directory) if directory is not None else None
        self._log = None
        if self._directory is not None:
            self._directory.mkdir(parents=True, exist_ok=True)

    # ── opening / persistence ───────────────────────────────────────────
    @classmethod
    def open(cls, directory: Union[str, Path], clock: Optional[Clock] = None) -> "TwinStore":
        """Load a store directory: models, then snapshot (if any), then the event log."""
        store = cls(directory, clock=clock)
        directory = Path(directory)

        models_path = directory / MODELS_FILE
        if models_path.exists():
            try:
                documents = json.loads(models_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise CorruptLog(f"{models_path} is not valid JSON: {e}")
            for document in documents.values():
                model = parse_model(document)
                store._models[model.model_id] = model

        events = read_log(directory / EVENTS_FILE)
        snapshot_path = directory / SNAPSHOT_FILE
        if snapshot_path.exists():
            try:
                snapshot = json.loads(snapshot_path.read_text(encoding="utf-8"))
                for raw in snapshot.get("twins", []):
                    twin = TwinInstance.model_validate(raw)
                    store._twins[twin.twin_id] = twin
            except (json.JSONDecodeError, ValidationError) as e:
                raise CorruptLog(f"{snapshot_path} is unreadable: {e}")

        for event in events:
            known = store._twins.get(event.twin_id)
            if known is not None and event.version <= known.version:
                store._record(event)
            else:
                store._apply(event)
        store._check_gapless()
        logger.info(f"✅ Opened twin store {directory}: {len(store._models)} models, "
                    f"{len(store._twins)} twins, {len(events)} events")
        return store

    def _append_line(self, event: UpdateEvent):
        if self._directory is None:
            return
        if self._log is None:
            self._log = (self._directory / EVENTS_FILE).open("a", encoding="utf-8")
        self._log.write(event_line(event) + "\n")
        self._log.flush()
        os.fsync(self._log.fileno())

    def _save_models(self):
        if self._directory is None:
            return
        documents = {mid: model_document(m) for mid, m in sorted(self._models.items())}
        (self._directory / MODELS_FILE).write_text(json.dumps(documents, indent=2), encoding="utf-8")

    def write_snapshot(self) -> Optional[Path]:
        if self._directory is None:
            return None
        with self._lock:
            payload = {
                "event_count": len(self._events),
                "twins": [self._twins[tid].model_dump(mode="json") for tid in sorted(self._twins)],
            }
            path = self._directory / SNAPSHOT_FILE
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(payload, indent=2), encoding="utf-8")
            os.replace(tmp, path)
        logger.info(f"📸 Snapshot written with {len(payload['twins'])} twins")
        return path

    def close(self):
        with self._lock:
            if self._log is not None:
                self._log.flush()
                os.fsync(self._log.fileno())
                self._log.close()
                self._log = None

    # ── event application ───────────────────────────────────────────────
    def _record(self, event: UpdateEvent):
        self._events.append(event)
        self._history[event.twin_id].append(event)

    def _apply(self, event: UpdateEvent):
        """Apply an event read from a log; any inconsistency means the log is corrupt."""
        model = self._models.get(event.model_id)
        if model is None:
            raise CorruptLog(f"Event {event.twin_id} v{event.version} references unknown model {event.model_id}")
        current = self._twins.get(event.twin_id)
        expected = 1 if current is None else current.version + 1
        if event.version != expected:
            raise CorruptLog(f"Twin {event.twin_id}: expected version {expected}, found {event.version}")
        if current is not None and current.model_id != event.model_id:
            raise CorruptLog(f"Twin {event.twin_id} changes model at version {event.version}")
        try:
            changes = _validate_changes(model, event.changes)
        except PmiError as e:
            raise CorruptLog(f"Twin {event.twin_id} v{event.version}: {e.message}")
        properties = dict(current.properties) if current is not None else {}
        properties.update(changes)
        self._twins[event.twin_id] = TwinInstance(
            twin_id=event.twin_id, model_id=event.model_id, properties=properties, version=event.version
        )
        self._record(event)

    def _check_gapless(self):
        for twin_id, events in self._history.items():
            versions = [e.version for e in events]
            if versions != list(range(1, len(versions) + 1)):
                raise CorruptLog(f"Twin {twin_id}: version sequence {versions} is not gapless")
            twin = self._twins.get(twin_id)
            if twin is None or twin.version != len(versions):
                raise CorruptLog(f"Twin {twin_id}: state does not match its event history")

    # ── models ──────────────────────────────────────────────────────────
    def register_model(self, model: TwinModel):
        with self._lock:
            existing = self._models.get(model.model_id)
            if existing is not None:
                if existing == model:
                    return
                raise ModelConflict(f"Model {model.model_id} is already registered with a different schema")
            self._models[model.model_id] = model
            self._save_models()
        logger.info(f"✅ Registered model {model.model_id} ({len(model.properties)} properties)")

    def get_model(self, model_id: str) -> TwinModel:
        model = self._models.get(model_id)
        if model is None:
            raise UnknownModel(f"Model {model_id} is not registered")
        return model

    @property
    def models(self) -> Dict[str, TwinModel]:
        return dict(self._models)

    # ── twins ───────────────────────────────────────────────────────────
    def create_twin(self, twin_id: str, model_id: str, initial: Mapping[str, Any]) -> TwinInstance:
        with self._lock:
            model = self.get_model(model_id)
            if twin_id in self._twins:
                raise DuplicateTwin(f"Twin {twin_id} already exists")
            changes = _validate_changes(model, initial)
            event = UpdateEvent(twin_id=twin_id, model_id=model_id, version=1,
                                timestamp=self._clock(), changes=changes)
            self._append_line(event)
            twin = TwinInstance(twin_id=twin_id, model_id=model_id, properties=dict(changes), version=1)
            self._twins[twin_id] = twin
            self._record(event)
        logger.info(f"✅ Created twin {twin_id} from {model_id}")
        return twin.model_copy(deep=True)

    def patch_properties(self, twin_id: str, changes: Mapping[str, Any]) -> TwinInstance:
        """Apply all changes or none. An empty change set is a no-op without an event."""
        with self._lock:
            current = self._twins.get(twin_id)
            if current is None:
                raise UnknownTwin(f"Twin {twin_id} does not exist")
            if not changes:
                return current.model_copy(deep=True)
            validated = _validate_changes(self._models[current.model_id], changes)
            event = UpdateEvent(twin_id=twin_id, model_id=current.model_id, version=current.version + 1,
                                timestamp=self._clock(), changes=validated)
            self._append_line(event)
            properties = dict(current.properties)
            properties.update(validated)
            twin = TwinInstance(twin_id=twin_id, model_id=current.model_id,
                                properties=properties, version=event.version)
            self._twins[twin_id] = twin
            self._record(event)
        logger.info(f"🔄 {twin_id} → v{twin.version} ({', '.join(validated)})")
        return twin.model_copy(deep=True)

    def get_twin(self, twin_id: str) -> TwinInstance:
        twin = self._twins.get(twin_id)
        if twin is None:
            raise UnknownTwin(f"Twin {twin_id} does not exist")
        return twin.model_copy(deep=True)

    def history(self, twin_id: str) -> List[UpdateEvent]:
        with self._lock:
            if twin_id not in self._twins:
                raise UnknownTwin(f"Twin {twin_id} does not exist")
            return [e.model_copy(deep=True) for e in self._history[twin_id]]

    def list_twins(self) -> List[str]:
        with self._lock:
            return sorted(self._twins)

    def events(self) -> List[UpdateEvent]:
        """The whole log in commit order."""
        with self._lock:
            return [e.model_copy(deep=True) for e in self._events]

    def state(self) -> Dict[str, Any]:
        with self._lock:
            return {
                "models": {mid: model_document(m) for mid, m in sorted(self._models.items())},
                "twins": {tid: self._twins[tid].model_dump() for tid in sorted(self._twins)},
            }


def replay(log: Iterable[UpdateEvent], models: Iterable[TwinModel] = ()) -> TwinStore:
    """Rebuild an in-memory store from an event log (and the models it refers to)."""
    store = TwinStore()
    for model in models:
        store._models[model.model_id] = model
    for event in log:
        store._apply(event)
    store._check_gapless()
    return store
