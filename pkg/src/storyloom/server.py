"""REST facade over the engine: session lifecycle, turns, state reads, and
the validation toggle.

Every response is JSON; every error body is {"code", "message"}. Turn
exclusivity is enforced here with 409 rather than queuing, so a client
that double-submits learns about it immediately.
"""

from __future__ import annotations

import argparse
import json
import logging
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import uvicorn
from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import (
    InvalidCriteria,
    InvariantViolation,
    StageFailed,
    StoryloomError,
    TurnFailed,
    TurnInFlight,
    UnknownAction,
    UnknownNpc,
)
from .gateway import EndpointConfig, Gateway, HttpGateway, ScriptedGateway
from .init_pipeline import run_initialization
from .memory import MemoryConfig, MemoryStore
from .models import DesignerCriteria
from .prompts import TemplateRegistry, default_templates
from .session import PlayerInput, Session, create_session, take_turn, write_snapshot
from .validation import ValidationConfig

logger = logging.getLogger(__name__)

API_PREFIX = "/api/v1"


class ApiError(StoryloomError):
    """Error carrying the HTTP status and machine code for the wire."""

    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class ServerConfig:
    bind_host: str = "127.0.0.1"
    bind_port: int = 8000
    templates_dir: str | None = None
    endpoint: EndpointConfig = field(
        default_factory=lambda: EndpointConfig(base_url="http://localhost:8080", model="default")
    )
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    snapshot_dir: str | None = None
    max_sessions: int = 64
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    scripted_fixtures: str | None = None

    @classmethod
    def from_file(cls, path: Path | str) -> "ServerConfig":
        data = json.loads(Path(path).read_text())
        endpoint_data = data.get("endpoint", {})
        config = cls(
            bind_host=data.get("bind_host", "127.0.0.1"),
            bind_port=int(data.get("bind_port", 8000)),
            templates_dir=data.get("templates_dir"),
            endpoint=EndpointConfig(
                base_url=endpoint_data.get("base_url", "http://localhost:8080"),
                model=endpoint_data.get("model", "default"),
                api_key=endpoint_data.get("api_key"),
                temperature=float(endpoint_data.get("temperature", 0.7)),
                max_tokens=int(endpoint_data.get("max_tokens", 1024)),
                timeout_ms=int(endpoint_data.get("timeout_ms", 60_000)),
                max_retries=int(endpoint_data.get("max_retries", 2)),
            ),
            memory=MemoryConfig.from_dict(data["memory"]) if "memory" in data else MemoryConfig(),
            snapshot_dir=data.get("snapshot_dir"),
            max_sessions=int(data.get("max_sessions", 64)),
            cors_origins=list(data.get("cors_origins", ["*"])),
            scripted_fixtures=data.get("scripted_fixtures"),
        )
        return config


@dataclass
class SessionRuntime:
    session: Session
    memory: MemoryStore


class SessionRegistry:
    def __init__(self, max_sessions: int):
        self.max_sessions = max_sessions
        self._sessions: dict[str, SessionRuntime] = {}
        self._lock = threading.Lock()

    def reserve(self) -> None:
        with self._lock:
            if len(self._sessions) >= self.max_sessions:
                raise ApiError(503, "session_capacity", "maximum concurrent sessions reached")

    def add(self, runtime: SessionRuntime) -> None:
        with self._lock:
            if len(self._sessions) >= self.max_sessions:
                raise ApiError(503, "session_capacity", "maximum concurrent sessions reached")
            self._sessions[runtime.session.id] = runtime

    def get(self, session_id: str) -> SessionRuntime:
        with self._lock:
            runtime = self._sessions.get(session_id)
        if runtime is None:
            raise ApiError(404, "unknown_session", f"no session with id {session_id!r}")
        return runtime

    def all(self) -> list[SessionRuntime]:
        with self._lock:
            return list(self._sessions.values())


def _session_state(runtime: SessionRuntime) -> dict:
    session = runtime.session
    active = session.definition.active_beat()
    return {
        "session_id": session.id,
        "definition": session.definition.to_dict(),
        "turn_index": session.turn_index,
        "validation": session.validation.to_dict(),
        "active_beat_id": active.id if active else None,
        "narrative_complete": session.narrative_complete,
        "suggested_actions": list(session.last_suggestions),
    }


def create_app(
    config: ServerConfig | None = None,
    gateway: Gateway | None = None,
    templates: TemplateRegistry | None = None,
) -> FastAPI:
    config = config or ServerConfig()
    if templates is None:
        templates = (
            TemplateRegistry.from_dir(Path(config.templates_dir))
            if config.templates_dir
            else default_templates()
        )
    if gateway is None:
        if config.scripted_fixtures:
            gateway = ScriptedGateway.from_file(config.scripted_fixtures)
        else:
            gateway = HttpGateway(config.endpoint.with_env_overrides())

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        # Graceful shutdown: persist every live session if so configured.
        if config.snapshot_dir:
            for runtime in app.state.registry.all():
                try:
                    write_snapshot(runtime.session, runtime.memory, Path(config.snapshot_dir))
                except OSError as exc:
                    logger.warning("could not snapshot session %s: %s", runtime.session.id, exc)

    app = FastAPI(title="storyloom", version="0.1.0", lifespan=lifespan)
    app.state.config = config
    app.state.gateway = gateway
    app.state.templates = templates
    app.state.registry = SessionRegistry(config.max_sessions)

    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def handle_api_error(_: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def handle_body_validation(_: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"code": "invalid_request", "message": str(exc)})

    @app.exception_handler(Exception)
    async def handle_unexpected(_: Request, exc: Exception):
        logger.exception("unhandled error: %s", exc)
        return JSONResponse(status_code=500, content={"code": "internal_error", "message": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post(f"{API_PREFIX}/sessions", status_code=201)
    def create_session_endpoint(body: dict = Body(...)):
        registry: SessionRegistry = app.state.registry
        registry.reserve()
        try:
            criteria = DesignerCriteria.from_dict(body.get("criteria"))
        except InvalidCriteria as exc:
            raise ApiError(422, "invalid_criteria", str(exc)) from exc
        validation_enabled = bool(body.get("validation_enabled", True))

        session_id = uuid.uuid4().hex
        memory = MemoryStore(config.memory)
        try:
            definition = run_initialization(
                criteria, app.state.gateway, memory, session_id, app.state.templates
            )
        except (StageFailed, InvariantViolation) as exc:
            raise ApiError(502, "stage_failed", str(exc)) from exc
        session = create_session(
            definition, ValidationConfig(enabled=validation_enabled), memory, session_id
        )
        registry.add(SessionRuntime(session=session, memory=memory))
        return {"session_id": session.id, "definition": session.definition.to_dict()}

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}")
    def get_session_endpoint(session_id: str):
        return _session_state(app.state.registry.get(session_id))

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/turns")
    def post_turn_endpoint(session_id: str, body: dict = Body(...)):
        runtime = app.state.registry.get(session_id)
        try:
            player_input = PlayerInput.from_dict(body.get("input"))
        except (ValueError, TypeError) as exc:
            raise ApiError(422, "invalid_input", str(exc)) from exc
        try:
            response = take_turn(
                runtime.session, player_input, app.state.gateway, runtime.memory, app.state.templates
            )
        except TurnInFlight as exc:
            raise ApiError(409, "turn_in_flight", str(exc)) from exc
        except (UnknownAction, UnknownNpc) as exc:
            raise ApiError(422, "invalid_input", str(exc)) from exc
        except TurnFailed as exc:
            raise ApiError(502, "turn_failed", str(exc)) from exc
        return response.to_dict()

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}/transcript")
    def get_transcript_endpoint(session_id: str):
        runtime = app.state.registry.get(session_id)
        return {
            "session_id": session_id,
            "transcript": [entry.to_dict() for entry in runtime.session.transcript],
        }

    @app.put(f"{API_PREFIX}/sessions/{{session_id}}/validation")
    def put_validation_endpoint(session_id: str, body: dict = Body(...)):
        runtime = app.state.registry.get(session_id)
        if not isinstance(body.get("enabled"), bool):
            raise ApiError(422, "invalid_input", "body must carry a boolean 'enabled'")
        runtime.session.validation.enabled = body["enabled"]
        return {"session_id": session_id, "enabled": runtime.session.validation.enabled}

    return app


def bundled_play_fixtures_path() -> Path:
    return Path(str(resources.files("storyloom") / "fixtures" / "halloran_play.json"))


def config_from_cli(argv: list[str] | None = None) -> ServerConfig:
    parser = argparse.ArgumentParser(prog="storyloom-server", description="Run the narrative engine server.")
    parser.add_argument("--config", default=None, help="server config JSON path")
    parser.add_argument("--bind", default=None, help="host:port to listen on")
    parser.add_argument("--templates-dir", default=None, help="prompt templates directory")
    parser.add_argument(
        "--scripted-llm",
        default=None,
        nargs="?",
        const="bundled",
        help="scripted fixtures path (no value: bundled play fixtures); runs fully offline",
    )
    args = parser.parse_args(argv)

    config = ServerConfig.from_file(args.config) if args.config else ServerConfig()
    if args.bind:
        host, _, port = args.bind.rpartition(":")
        config.bind_host = host or "127.0.0.1"
        config.bind_port = int(port)
    if args.templates_dir:
        config.templates_dir = args.templates_dir
    if args.scripted_llm:
        config.scripted_fixtures = (
            str(bundled_play_fixtures_path()) if args.scripted_llm == "bundled" else args.scripted_llm
        )
    return config


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    config = config_from_cli(argv)
    app = create_app(config)
    uvicorn.run(app, host=config.bind_host, port=config.bind_port, log_level="info")
    return 0


if __name__ == "__main__":
    main()
