# test_twin_store.py
import json

import pytest

from errors import (
    CorruptLog,
    DuplicateTwin,
    KindMismatch,
    ModelConflict,
    UnknownModel,
    UnknownProperty,
    UnknownTwin,
)
from twin_model import PropertyKind, PropertySpec, TwinModel
from twin_store import EVENTS_FILE, TwinStore, UpdateEvent, event_line, parse_event_line, read_log, replay


@pytest.fixture
def store(tmp_path, sensor_model, clock):
    s = TwinStore.open(tmp_path / "store", clock=clock)
    s.register_model(sensor_model)
    yield s
    s.close()


def test_create_and_patch(store, sensor_model):
    twin = store.create_twin("t1", sensor_model.model_id, {"reading": 1.5})
    assert twin.version == 1 and twin.properties == {"reading": 1.5}

    twin = store.patch_properties("t1", {"count": 3, "ok": True})
    assert twin.version == 2
    assert twin.properties == {"reading": 1.5, "count": 3, "ok": True}
    assert [e.version for e in store.history("t1")] == [1, 2]


def test_patch_is_atomic(store, sensor_model):
    store.create_twin("t1", sensor_model.model_id, {"reading": 1.0})
    with pytest.raises(KindMismatch):
        store.patch_properties("t1", {"reading": 2.0, "count": "three"})
    with pytest.raises(UnknownProperty):
        store.patch_properties("t1", {"reading": 2.0, "colour": "red"})
    twin = store.get_twin("t1")
    assert twin.version == 1 and twin.properties == {"reading": 1.0}
    assert len(store.events()) == 1


def test_empty_patch_is_a_no_op(store, sensor_model):
    store.create_twin("t1", sensor_model.model_id, {})
    assert store.patch_properties("t1", {}).version == 1
    assert len(store.history("t1")) == 1


def test_errors(store, sensor_model):
    store.create_twin("t1", sensor_model.model_id, {})
    with pytest.raises(DuplicateTwin):
        store.create_twin("t1", sensor_model.model_id, {})
    with pytest.raises(UnknownModel):
        store.create_twin("t2", "dtmi:test:Nope;1", {})
    with pytest.raises(UnknownTwin):
        store.patch_properties("t9", {"count": 1})
    with pytest.raises(UnknownTwin):
        store.history("t9")


def test_register_model_is_idempotent_but_rejects_conflicts(store, sensor_model):
    store.register_model(sensor_model)
    other = TwinModel(model_id=sensor_model.model_id,
                      properties=(PropertySpec(name="reading", kind=PropertyKind.INTEGER),))
    with pytest.raises(ModelConflict):
        store.register_model(other)


def test_returned_twins_are_copies(store, sensor_model):
    twin = store.create_twin("t1", sensor_model.model_id, {"count": 1})
    twin.properties["count"] = 99
    assert store.get_twin("t1").properties["count"] == 1


def test_replay_of_10_twins_by_12_updates_matches_live_state(store, sensor_model):
    for i in range(10):
        store.create_twin(f"t{i}", sensor_model.model_id, {"count": 0})
    for step in range(1, 13):
        for i in range(10):
            store.patch_properties(f"t{i}", {"count": step, "reading": step * 0.5 + i})

    rebuilt = replay(store.events(), [sensor_model])
    assert rebuilt.state() == store.state()
    assert all(store.get_twin(f"t{i}").version == 13 for i in range(10))


def test_reopen_restores_state(tmp_path, sensor_model, clock):
    directory = tmp_path / "store"
    store = TwinStore.open(directory, clock=clock)
    store.register_model(sensor_model)
    store.create_twin("t1", sensor_model.model_id, {"note": "first"})
    store.patch_properties("t1", {"note": "second"})
    store.close()

    reopened = TwinStore.open(directory)
    assert reopened.state() == store.state()
    assert [e.changes for e in reopened.history("t1")] == [{"note": "first"}, {"note": "second"}]


def test_reopen_from_snapshot_plus_tail(tmp_path, sensor_model, clock):
    directory = tmp_path / "store"
    store = TwinStore.open(directory, clock=clock)
    store.register_model(sensor_model)
    store.create_twin("t1", sensor_model.model_id, {"count": 1})
    store.write_snapshot()
    store.patch_properties("t1", {"count": 2})
    store.close()

    reopened = TwinStore.open(directory)
    assert reopened.get_twin("t1").properties == {"count": 2}
    assert reopened.get_twin("t1").version == 2


def test_event_line_checksum_roundtrip(clock):
    event = UpdateEvent(twin_id="t", model_id="m", version=1, timestamp=clock(), changes={"x": 1.0})
    assert parse_event_line(event_line(event)) == event


def test_tampered_line_is_rejected(clock):
    event = UpdateEvent(twin_id="t", model_id="m", version=1, timestamp=clock(), changes={"x": 1.0})
    tampered = event_line(event).replace('"x":1.0', '"x":2.0')
    with pytest.raises(CorruptLog):
        parse_event_line(tampered)
    with pytest.raises(CorruptLog):
        parse_event_line("not json")


def test_version_gap_is_corrupt(store, sensor_model, clock):
    store.create_twin("t1", sensor_model.model_id, {"count": 1})
    gap = UpdateEvent(twin_id="t1", model_id=sensor_model.model_id, version=3, timestamp=clock(),
                      changes={"count": 3})
    with pytest.raises(CorruptLog):
        replay(store.events() + [gap], [sensor_model])


def test_corrupt_log_file_fails_to_open(tmp_path, sensor_model, clock):
    directory = tmp_path / "store"
    store = TwinStore.open(directory, clock=clock)
    store.register_model(sensor_model)
    store.create_twin("t1", sensor_model.model_id, {"count": 1})
    store.close()

    path = directory / EVENTS_FILE
    assert len(read_log(path)) == 1
    payload = json.loads(path.read_text().strip())
    payload["version"] = 2
    path.write_text(json.dumps(payload) + "\n")
    with pytest.raises(CorruptLog):
        TwinStore.open(directory)
