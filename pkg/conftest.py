# conftest.py - shared fixtures for the test suite
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from twin_model import PropertyKind, PropertySpec, TwinModel

ROOT = Path(__file__).parent
DATA = ROOT / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def bolt_csv() -> str:
    return (DATA / "bolt_tests.csv").read_text(encoding="utf-8")


@pytest.fixture
def sensor_model() -> TwinModel:
    return TwinModel(
        model_id="dtmi:test:Sensor;1",
        display_name="Sensor",
        properties=(
            PropertySpec(name="reading", kind=PropertyKind.FLOAT, unit="in"),
            PropertySpec(name="count", kind=PropertyKind.INTEGER),
            PropertySpec(name="ok", kind=PropertyKind.BOOLEAN),
            PropertySpec(name="note", kind=PropertyKind.STRING),
        ),
    )


class TickingClock:
    """Deterministic clock: one second per call."""

    def __init__(self):
        self.now = datetime(2024, 1, 1, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        self.now += timedelta(seconds=1)
        return self.now


@pytest.fixture
def clock() -> TickingClock:
    return TickingClock()
