# test_twin_dashboard.py
import math

import pytest

from pipeline import ingest
from twin_dashboard import TwinClient, history_figure, history_frame, importance_figure
from twin_feed import feed_dataset
from twin_store import TwinStore


@pytest.fixture
def bolt_1_history(tmp_path, bolt_csv, clock):
    store = TwinStore.open(tmp_path / "store", clock=clock)
    feed_dataset(ingest(bolt_csv), store)
    events = [e.model_dump(mode="json") for e in store.history("Bolt_1")]
    store.close()
    return events


def test_history_frame_carries_state_forward(bolt_1_history):
    frame = history_frame(bolt_1_history)
    assert frame["version"].tolist() == [1, 2, 3]
    assert math.isnan(frame["Test_Num"].iloc[0])
    assert frame["Test_Num"].tolist()[1:] == [1, 2]
    assert frame["Fracture"].tolist() == [False, False, True]
    assert frame["Max_Position"].iloc[2] == frame["Max_Position"].iloc[1] == 0.055


def test_history_figure_marks_the_fracture(bolt_1_history):
    fig = history_figure(history_frame(bolt_1_history))
    assert [trace.name for trace in fig.data] == ["Max_Position (in)", "Max_Load (lbf)", "Fracture"]
    assert list(fig.data[2].x) == [2]


def test_importance_figure_keeps_the_top_features():
    fig = importance_figure({"max_load": 0.5, "Pitch_Left_1": 0.1, "max_position": 0.4}, top=2)
    assert list(fig.data[0].y) == ["max_load", "max_position"]


def test_client_reads_host_and_port(monkeypatch):
    monkeypatch.setenv("PMI_DT_HOST", "twins.local")
    monkeypatch.setenv("PMI_DT_PORT", "9000")
    assert TwinClient().base_url == "http://twins.local:9000"
    assert TwinClient("http://other:1").base_url == "http://other:1"


def test_unreachable_server_reports_none():
    assert TwinClient("http://127.0.0.1:9").status() is None
