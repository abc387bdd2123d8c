import json
from pathlib import Path

import pytest

from asktmk.pipeline import Engine
from asktmk.tmk import parse_model

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURE_PATH = REPO_ROOT / "fixtures" / "vera.tmk.json"


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return FIXTURE_PATH


@pytest.fixture(scope="session")
def fixture_bytes() -> bytes:
    return FIXTURE_PATH.read_bytes()


@pytest.fixture()
def fixture_raw(fixture_bytes) -> dict:
    return json.loads(fixture_bytes)


@pytest.fixture(scope="session")
def model(fixture_bytes):
    return parse_model(fixture_bytes)


@pytest.fixture(scope="session")
def engine(model) -> Engine:
    return Engine(model)
