# settings.py - configuration for the CLI and the twin server
import json
import os
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel, ValidationError

from errors import InvalidConfig
from ml import TrainConfig
from pipeline import PipelineConfig

DEFAULT_DATASET = "data/bolt_tests.csv"
DEFAULT_TWIN_MODEL = "data/bolt.twin.json"
DEFAULT_SCANNER = "data/scanner_default.json"
DEFAULT_OUT_DIR = "artifacts"
DEFAULT_STORE_DIR = "twin_store"


class ServerSettings(BaseModel):
    host: str = "localhost"
    port: int = 8004
    store_dir: str = DEFAULT_STORE_DIR
    model_file: Optional[str] = None

    @classmethod
    def from_env(cls) -> "ServerSettings":
        defaults = cls()
        return cls(
            host=os.environ.get("PMI_DT_HOST", defaults.host),
            port=int(os.environ.get("PMI_DT_PORT", defaults.port)),
            store_dir=os.environ.get("PMI_DT_STORE", defaults.store_dir),
            model_file=os.environ.get("PMI_DT_MODEL") or None,
        )


class Settings(BaseModel):
    pipeline: PipelineConfig = PipelineConfig()
    train: TrainConfig = TrainConfig()
    server: ServerSettings = ServerSettings()
    out_dir: str = DEFAULT_OUT_DIR
    include_derived: bool = False
    split_before_bootstrap: bool = False


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """Read a JSON settings file; missing sections keep their defaults."""
    if path is None:
        return Settings()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidConfig(f"Config file {path} not found")
    except json.JSONDecodeError as e:
        raise InvalidConfig(f"Config file {path} is not valid JSON: {e}")
    try:
        return Settings.model_validate(data)
    except ValidationError as e:
        raise InvalidConfig(f"Config file {path} is invalid: {e}")
