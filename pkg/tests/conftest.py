import json
from pathlib import Path

import pytest

from storyloom.ablation import bundled_definition_path, bundled_fixtures_path
from storyloom.errors import TransportError
from storyloom.gateway import ScriptedGateway
from storyloom.memory import MemoryConfig, MemoryStore
from storyloom.models import DesignerCriteria, GameDefinition
from storyloom.server import bundled_play_fixtures_path

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "storyloom" / "data"


class EchoGateway:
    """Returns the prompt text (minus the reply-format tail), so tests can
    assert what reached the model. Calls are recorded for prompt assertions."""

    def __init__(self):
        self.calls = []

    def complete(self, messages):
        self.calls.append(list(messages))
        text = "\n".join(m.content for m in messages)
        return text.split("Reply in this format:")[0]


class FailingGateway:
    """Always raises, for fallback and atomicity tests."""

    def __init__(self):
        self.calls = 0

    def complete(self, messages):
        self.calls += 1
        raise TransportError("scripted outage")


@pytest.fixture
def play_gateway():
    return ScriptedGateway.from_file(bundled_play_fixtures_path())


@pytest.fixture
def ablation_gateway():
    return ScriptedGateway.from_file(bundled_fixtures_path())


@pytest.fixture
def echo_gateway():
    return EchoGateway()


@pytest.fixture
def failing_gateway():
    return FailingGateway()


@pytest.fixture
def criteria():
    return DesignerCriteria.from_dict(json.loads((DATA_DIR / "halloran_house_criteria.json").read_text()))


@pytest.fixture
def definition():
    return GameDefinition.from_dict(json.loads(bundled_definition_path().read_text()))


@pytest.fixture
def memory():
    return MemoryStore(MemoryConfig())
