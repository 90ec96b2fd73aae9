# test_twin_feed.py
import pytest

from pipeline import ingest
from twin_feed import BOLT_MODEL_ID, bolt_model, feed_dataset
from twin_model import PropertyKind, load_model_file
from twin_store import TwinStore, replay


@pytest.fixture
def tests_df(bolt_csv):
    return ingest(bolt_csv)


@pytest.fixture
def store(tmp_path, clock):
    s = TwinStore.open(tmp_path / "store", clock=clock)
    yield s
    s.close()


def test_model_matches_the_bundled_document(tests_df, data_dir):
    model = bolt_model(tests_df)
    assert model.model_id == BOLT_MODEL_ID
    assert model == load_model_file(data_dir / "bolt.twin.json")
    assert model.get_property("Test_Num").kind is PropertyKind.INTEGER
    assert model.get_property("Angle_Right_3_90").unit == "deg"


def test_one_twin_per_bolt_one_event_per_test(tests_df, store):
    versions = feed_dataset(tests_df, store)
    assert len(versions) == 10
    assert versions["Bolt_2"] == 4
    assert store.get_twin("Bolt_4").properties["Fracture"] is True
    bolt_3 = store.get_twin("Bolt_3").properties
    assert bolt_3["Fracture"] is False
    assert bolt_3["Test_Num"] == 11
    assert bolt_3["Max_Position"] == 0.08


def test_initial_event_holds_the_first_inspection(tests_df, store):
    feed_dataset(tests_df, store)
    first = store.history("Bolt_3")[0]
    assert first.version == 1
    assert first.changes["Fracture"] is False
    assert "Max_Load" not in first.changes
    row = tests_df[(tests_df["bolt_id"] == "Bolt_3") & (tests_df["test_num"] == 1)].iloc[0]
    assert first.changes["Overall_Length"] == row["Overall_Length"]


def test_blank_cells_are_not_sent(tests_df, store):
    feed_dataset(tests_df, store)
    fourth = store.history("Bolt_3")[4]
    assert fourth.changes["Test_Num"] == 4
    assert "Pitch_Left_1" not in fourth.changes
    assert "Pitch_Left_1_90" in fourth.changes


def test_feeding_twice_skips_existing_twins(tests_df, store):
    feed_dataset(tests_df, store)
    events = len(store.events())
    assert feed_dataset(tests_df, store) == {}
    assert len(store.events()) == events


def test_fed_store_replays(tests_df, store):
    model = bolt_model(tests_df)
    feed_dataset(tests_df, store, model)
    assert replay(store.events(), [model]).state() == store.state()
