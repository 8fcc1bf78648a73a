import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from storyloom.gateway import ScriptedGateway
from storyloom.memory import MemoryConfig
from storyloom.server import ServerConfig, bundled_play_fixtures_path, create_app
from tests.conftest import DATA_DIR

CRITERIA = json.loads((DATA_DIR / "halloran_house_criteria.json").read_text())


class SlowScriptedGateway(ScriptedGateway):
    """Delays turn generation so two requests can overlap."""

    def complete(self, messages):
        text = "\n".join(m.content for m in messages)
        if "Generate" not in text and "Summarize" not in text:
            time.sleep(0.4)
        return super().complete(messages)


def play_gateway(cls=ScriptedGateway):
    base = ScriptedGateway.from_file(bundled_play_fixtures_path())
    return cls(rules=base.rules, default=base.default)


@pytest.fixture
def client():
    app = create_app(ServerConfig(), gateway=play_gateway())
    with TestClient(app, raise_server_exceptions=False) as test_client:
        yield test_client


def create_session(client, validation_enabled=True, criteria=None):
    response = client.post(
        "/api/v1/sessions",
        json={"criteria": criteria or CRITERIA, "validation_enabled": validation_enabled},
    )
    return response


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_create_session_returns_full_definition(client):
    response = create_session(client)
    assert response.status_code == 201
    body = response.json()
    assert body["session_id"]
    definition = body["definition"]
    assert len(definition["npcs"]) == CRITERIA["npc_count"]
    assert {m["label"] for m in definition["mechanics"]} == {
        "Interrogate Suspect",
        "Search Crime Scene",
        "Call Informant",
    }
    assert definition["setting"]["location"]


def test_create_session_missing_genre_is_422(client):
    bad = {k: v for k, v in CRITERIA.items() if k != "genre"}
    response = create_session(client, criteria=bad)
    assert response.status_code == 422
    body = response.json()
    assert body["code"] == "invalid_criteria"
    assert "message" in body


def test_create_session_upstream_failure_is_502_and_atomic():
    app = create_app(ServerConfig(), gateway=ScriptedGateway(rules=[], default="never json"))
    with TestClient(app, raise_server_exceptions=False) as client:
        response = create_session(client)
        assert response.status_code == 502
        assert response.json()["code"] == "stage_failed"
        # No half-created session is reachable.
        assert client.get("/api/v1/sessions/anything").status_code == 404


def test_capacity_limit_yields_503():
    app = create_app(ServerConfig(max_sessions=1), gateway=play_gateway())
    with TestClient(app, raise_server_exceptions=False) as client:
        assert create_session(client).status_code == 201
        response = create_session(client)
        assert response.status_code == 503
        assert response.json()["code"] == "session_capacity"


def test_turn_happy_path(client):
    session_id = create_session(client).json()["session_id"]
    response = client.post(
        f"/api/v1/sessions/{session_id}/turns",
        json={"input": {"kind": "free_text", "text": "Look around the study."}},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["text"]
    assert body["speaker"] == "narrator"
    assert body["was_corrected"] is False
    assert isinstance(body["suggested_actions"], list)
    assert isinstance(body["beat_transitions"], list)


def test_turn_against_unknown_session_is_404(client):
    response = client.post(
        "/api/v1/sessions/nope/turns", json={"input": {"kind": "free_text", "text": "x"}}
    )
    assert response.status_code == 404
    assert response.json()["code"] == "unknown_session"


def test_malformed_input_is_422(client):
    session_id = create_session(client).json()["session_id"]
    response = client.post(f"/api/v1/sessions/{session_id}/turns", json={"input": {"kind": "dance"}})
    assert response.status_code == 422
    assert response.json()["code"] == "invalid_input"
    response = client.post(
        f"/api/v1/sessions/{session_id}/turns",
        json={"input": {"kind": "action", "action_id": "no_such_mechanic"}},
    )
    assert response.status_code == 422


def test_corrected_turn_is_visible_on_the_wire(client):
    session_id = create_session(client, validation_enabled=True).json()["session_id"]
    response = client.post(
        f"/api/v1/sessions/{session_id}/turns",
        json={"input": {"kind": "free_text", "text": "I think a dragon just flew past the window."}},
    )
    assert response.status_code == 200
    assert response.json()["was_corrected"] is True


def test_turn_gateway_failure_is_502_without_state_change():
    class DyingGateway(ScriptedGateway):
        def complete(self, messages):
            text = "\n".join(m.content for m in messages)
            if "Generate" in text or "Summarize" in text:
                return super().complete(messages)
            raise RuntimeError("model down")

    app = create_app(ServerConfig(), gateway=play_gateway(DyingGateway))
    with TestClient(app, raise_server_exceptions=False) as client:
        session_id = create_session(client, validation_enabled=False).json()["session_id"]
        response = client.post(
            f"/api/v1/sessions/{session_id}/turns",
            json={"input": {"kind": "free_text", "text": "hello"}},
        )
        assert response.status_code == 502
        assert response.json()["code"] == "turn_failed"
        assert client.get(f"/api/v1/sessions/{session_id}").json()["turn_index"] == 0


def test_concurrent_turns_one_200_one_409():
    app = create_app(ServerConfig(), gateway=play_gateway(SlowScriptedGateway))
    with TestClient(app, raise_server_exceptions=False) as client:
        session_id = create_session(client, validation_enabled=False).json()["session_id"]
        statuses = []
        lock = threading.Lock()

        def submit(text):
            response = client.post(
                f"/api/v1/sessions/{session_id}/turns",
                json={"input": {"kind": "free_text", "text": text}},
            )
            with lock:
                statuses.append(response.status_code)

        first = threading.Thread(target=submit, args=("one",))
        second = threading.Thread(target=submit, args=("two",))
        first.start()
        time.sleep(0.15)  # let the first turn take the lock
        second.start()
        first.join()
        second.join()
        assert sorted(statuses) == [200, 409]


def test_get_session_state_and_idempotent_reads(client):
    session_id = create_session(client).json()["session_id"]
    client.post(
        f"/api/v1/sessions/{session_id}/turns",
        json={"input": {"kind": "action", "action_id": "search_crime_scene"}},
    )
    state_one = client.get(f"/api/v1/sessions/{session_id}").json()
    state_two = client.get(f"/api/v1/sessions/{session_id}").json()
    assert state_one == state_two
    assert state_one["turn_index"] == 1
    assert state_one["active_beat_id"] == "beat_1"
    assert state_one["validation"]["enabled"] is True
    transcript_one = client.get(f"/api/v1/sessions/{session_id}/transcript").json()
    transcript_two = client.get(f"/api/v1/sessions/{session_id}/transcript").json()
    assert transcript_one == transcript_two
    assert len(transcript_one["transcript"]) == 2


def test_validation_toggle_round_trip(client):
    session_id = create_session(client, validation_enabled=True).json()["session_id"]
    before = client.get(f"/api/v1/sessions/{session_id}").json()
    response = client.put(f"/api/v1/sessions/{session_id}/validation", json={"enabled": False})
    assert response.status_code == 200
    assert response.json() == {"session_id": session_id, "enabled": False}
    after = client.get(f"/api/v1/sessions/{session_id}").json()
    assert after["validation"]["enabled"] is False
    # Only the flag moved; definition and progress are untouched.
    assert after["definition"] == before["definition"]
    assert after["turn_index"] == before["turn_index"]
    response = client.put(f"/api/v1/sessions/{session_id}/validation", json={"enabled": "yes"})
    assert response.status_code == 422


def test_error_bodies_always_carry_code_and_message(client):
    for response in (
        client.get("/api/v1/sessions/missing"),
        client.post("/api/v1/sessions/missing/turns", json={"input": {"kind": "free_text", "text": "x"}}),
        client.put("/api/v1/sessions/missing/validation", json={"enabled": True}),
        client.post("/api/v1/sessions", content=b"not json at all", headers={"Content-Type": "application/json"}),
        client.post("/api/v1/sessions", json=["a", "list"]),
    ):
        assert response.status_code >= 400
        body = response.json()
        assert set(body) >= {"code", "message"}


def test_snapshots_written_on_shutdown(tmp_path):
    app = create_app(ServerConfig(snapshot_dir=str(tmp_path)), gateway=play_gateway())
    with TestClient(app, raise_server_exceptions=False) as client:
        session_id = create_session(client).json()["session_id"]
    snapshot_path = tmp_path / f"{session_id}.json"
    assert snapshot_path.exists()
    data = json.loads(snapshot_path.read_text())
    assert data["session"]["id"] == session_id
    assert data["memory"]["scopes"]


def test_cli_flags_assemble_config(tmp_path):
    from storyloom.server import config_from_cli

    config = config_from_cli(["--bind", "0.0.0.0:9001", "--scripted-llm"])
    assert (config.bind_host, config.bind_port) == ("0.0.0.0", 9001)
    assert config.scripted_fixtures and config.scripted_fixtures.endswith("halloran_play.json")

    custom = tmp_path / "rules.json"
    custom.write_text(json.dumps({"rules": [], "default": "ok"}))
    config = config_from_cli(["--scripted-llm", str(custom), "--templates-dir", str(tmp_path)])
    assert config.scripted_fixtures == str(custom)
    assert config.templates_dir == str(tmp_path)
    assert config_from_cli([]).scripted_fixtures is None


def test_server_config_from_file(tmp_path):
    config_path = tmp_path / "server.json"
    config_path.write_text(
        json.dumps(
            {
                "bind_port": 9123,
                "endpoint": {"base_url": "http://llm:8080", "model": "local"},
                "memory": MemoryConfig(short_term_capacity=5).to_dict(),
                "max_sessions": 2,
            }
        )
    )
    config = ServerConfig.from_file(config_path)
    assert config.bind_port == 9123
    assert config.endpoint.base_url == "http://llm:8080"
    assert config.memory.short_term_capacity == 5
    assert config.max_sessions == 2
