"""Authoritative turn-based session state.

A turn flows: resolve the player's input to text, guard it against the
game-play rules, generate the narrator or NPC reply (personality-biased
for NPCs), write both sides of the exchange to memory, check beat
progression, and only then bump the turn counter. A failed turn leaves
session state and memory untouched.
"""

from __future__ import annotations

import copy
import json
import logging
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .errors import TurnFailed, TurnInFlight, UnknownAction, UnknownNpc
from .gateway import ChatMessage, Gateway, system_message, user_message
from .memory import MemoryScope, MemoryStore
from .models import BIG5_TRAITS, GameDefinition, GamePlayRules, NarrativeBeat, NpcProfile
from .prompts import TemplateRegistry, default_templates, render, text_reply
from .validation import GuardOutcome, ValidationConfig, guard

logger = logging.getLogger(__name__)

NARRATOR_TEMPLATE_ID = "narrator_turn"
NPC_TEMPLATE_ID = "npc_turn"
BEAT_JUDGE_TEMPLATE_ID = "beat_judge"

INPUT_KINDS = ("free_text", "action", "suggested")


@dataclass(frozen=True)
class PlayerInput:
    """One player move: free text, a designer mechanic, or a picked suggestion."""

    kind: str
    text: str | None = None
    action_id: str | None = None
    suggestion_index: int | None = None
    target_npc: str | None = None

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ValueError(f"input kind must be one of {INPUT_KINDS}, got {self.kind!r}")
        payloads = {
            "free_text": self.text is not None and self.action_id is None and self.suggestion_index is None,
            "action": self.action_id is not None and self.text is None and self.suggestion_index is None,
            "suggested": self.suggestion_index is not None and self.text is None and self.action_id is None,
        }
        if not payloads[self.kind]:
            raise ValueError(f"input of kind {self.kind!r} must carry exactly its own payload")

    @classmethod
    def from_dict(cls, data: dict) -> "PlayerInput":
        if not isinstance(data, dict) or "kind" not in data:
            raise ValueError("input must be an object with a kind")
        return cls(
            kind=str(data["kind"]),
            text=data.get("text"),
            action_id=data.get("action_id"),
            suggestion_index=data.get("suggestion_index"),
            target_npc=data.get("target_npc"),
        )


@dataclass
class TranscriptEntry:
    turn_index: int
    speaker: str
    text: str
    was_corrected: bool

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "speaker": self.speaker,
            "text": self.text,
            "was_corrected": self.was_corrected,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TranscriptEntry":
        return cls(
            turn_index=int(data["turn_index"]),
            speaker=str(data["speaker"]),
            text=str(data["text"]),
            was_corrected=bool(data["was_corrected"]),
        )


@dataclass(frozen=True)
class BeatTransition:
    beat_id: str
    old_status: str
    new_status: str

    def to_dict(self) -> dict:
        return {"beat_id": self.beat_id, "old_status": self.old_status, "new_status": self.new_status}


@dataclass
class TurnResponse:
    text: str
    speaker: str  # "narrator" or "npc:<id>"
    suggested_actions: list[str]
    was_corrected: bool
    beat_transitions: list[BeatTransition]

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "speaker": self.speaker,
            "suggested_actions": list(self.suggested_actions),
            "was_corrected": self.was_corrected,
            "beat_transitions": [t.to_dict() for t in self.beat_transitions],
        }


@dataclass
class Session:
    """Server-side game state; clients only ever read snapshots of it."""

    id: str
    definition: GameDefinition
    validation: ValidationConfig
    turn_index: int = 0
    transcript: list[TranscriptEntry] = field(default_factory=list)
    last_suggestions: list[str] = field(default_factory=list)
    narrative_complete: bool = False
    _turn_lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def scope(self) -> MemoryScope:
        return MemoryScope.session(self.id)

    def npc_scope(self, npc_id: str) -> MemoryScope:
        return MemoryScope.npc(self.id, npc_id)


def create_session(
    definition: GameDefinition,
    validation: ValidationConfig,
    memory: MemoryStore,
    session_id: str | None = None,
) -> Session:
    """Fresh session over a copy of the definition, first beat active.

    The definition is deep-copied because beat statuses mutate per
    session. Memory scopes for the session and every NPC are created up
    front.
    """
    session = Session(
        id=session_id or uuid.uuid4().hex,
        definition=copy.deepcopy(definition),
        validation=validation,
    )
    for beat in session.definition.beats:
        beat.status = "pending"
    session.definition.beats[0].status = "active"
    memory.ensure_scope(session.scope())
    for npc in session.definition.npcs:
        memory.ensure_scope(session.npc_scope(npc.id))
    return session


def build_npc_system_prompt(npc: NpcProfile, memory_summary: str, rules: GamePlayRules) -> str:
    """System prompt that biases replies toward the NPC's trait percentages."""
    traits = ", ".join(f"{trait}: {getattr(npc.big5, trait)}%" for trait in BIG5_TRAITS)
    parts = [
        f"You are {npc.name}, a {npc.role} in this story.",
        f"Background: {npc.background}" if npc.background else "",
        f"Occupation: {npc.occupation}" if npc.occupation else "",
        f"Your personality, as trait percentages, is {traits}. "
        "Express these traits in everything you say: let high percentages show strongly "
        "and low percentages show their opposite.",
    ]
    if memory_summary:
        parts.append(f"What you remember:\n{memory_summary}")
    parts.append("Never break these game play rules:\n" + "\n".join(f"- {t}" for t in rules.texts()))
    return "\n\n".join(p for p in parts if p)


def parse_suggested_actions(text: str) -> list[str]:
    """Numbered lines ("1. ...", "2) ...") become the suggestion menu.

    No numbering means no suggestions; never an error.
    """
    suggestions = []
    for line in text.splitlines():
        stripped = line.strip()
        i = 0
        while i < len(stripped) and stripped[i].isdigit():
            i += 1
        if i > 0 and i < len(stripped) and stripped[i] in ".)":
            body = stripped[i + 1 :].strip()
            if body:
                suggestions.append(body)
    return suggestions


def _resolve_input(session: Session, player_input: PlayerInput) -> tuple[str, NpcProfile | None]:
    """Map the input to the text that enters the pipeline, plus the addressed NPC."""
    target = None
    if player_input.target_npc is not None:
        target = session.definition.npc_by_id(player_input.target_npc)
        if target is None:
            raise UnknownNpc(f"no npc with id {player_input.target_npc!r}")
    if player_input.kind == "free_text":
        if not (player_input.text or "").strip():
            raise UnknownAction("free_text input must carry non-empty text")
        return player_input.text, target
    if player_input.kind == "action":
        mechanic = session.definition.mechanic_by_id(player_input.action_id)
        if mechanic is None:
            raise UnknownAction(f"no mechanic with id {player_input.action_id!r}")
        return mechanic.label, target
    index = player_input.suggestion_index
    if not 0 <= index < len(session.last_suggestions):
        raise UnknownAction(f"no suggestion at index {index}")
    return session.last_suggestions[index], target


def _generation_messages(
    session: Session,
    resolved_text: str,
    player_input: PlayerInput,
    target: NpcProfile | None,
    memory: MemoryStore,
    gateway: Gateway,
    registry: TemplateRegistry,
) -> list[ChatMessage]:
    definition = session.definition
    session_context = memory.context_pack(session.scope(), resolved_text, gateway, registry)
    active = definition.active_beat()
    criteria = {
        "player_input": resolved_text,
        "player": definition.player.to_dict(),
        "setting": definition.setting.to_dict(),
        "active_beat": active.description if active else None,
    }
    if target is not None:
        npc_context = memory.context_pack(session.npc_scope(target.id), resolved_text, gateway, registry)
        sys_prompt = build_npc_system_prompt(target, npc_context, definition.rules)
        criteria["npc_name"] = target.name
        prompt = render(registry.get(NPC_TEMPLATE_ID), criteria, session_context)
        return [system_message(sys_prompt), user_message(prompt.text)]
    # Mechanics may carry their own generation template.
    template_id = NARRATOR_TEMPLATE_ID
    if player_input.kind == "action":
        mechanic = definition.mechanic_by_id(player_input.action_id)
        if mechanic and registry.has(mechanic.template_id):
            template_id = mechanic.template_id
    prompt = render(registry.get(template_id), criteria, session_context)
    return [user_message(prompt.text)]


def take_turn(
    session: Session,
    player_input: PlayerInput,
    gateway: Gateway,
    memory: MemoryStore,
    templates: TemplateRegistry | None = None,
) -> TurnResponse:
    """Process one turn. Only one turn may be in flight per session."""
    if not session._turn_lock.acquire(blocking=False):
        raise TurnInFlight(f"session {session.id} already has a turn in flight")
    try:
        return _take_turn_locked(session, player_input, gateway, memory, templates)
    finally:
        session._turn_lock.release()


def _take_turn_locked(
    session: Session,
    player_input: PlayerInput,
    gateway: Gateway,
    memory: MemoryStore,
    templates: TemplateRegistry | None,
) -> TurnResponse:
    registry = templates or default_templates()
    definition = session.definition
    resolved_text, target = _resolve_input(session, player_input)
    speaker = f"npc:{target.id}" if target else "narrator"

    # All gateway work happens before any state mutation so a hard failure
    # leaves the session exactly as it was.
    try:
        session_context = memory.context_pack(session.scope(), resolved_text, gateway, registry)
        outcome: GuardOutcome = guard(
            resolved_text, definition.rules, session_context, session.validation, target, gateway, registry
        )
        if outcome.passed:
            messages = _generation_messages(
                session, resolved_text, player_input, target, memory, gateway, registry
            )
            response_text = text_reply(gateway.complete(messages), "response")
        else:
            response_text = outcome.text
    except Exception as exc:
        raise TurnFailed(f"turn generation failed: {exc}") from exc

    suggestions = parse_suggested_actions(response_text)
    was_corrected = not outcome.passed

    # Commit phase: memory, beat progression, transcript, counter.
    turn = session.turn_index
    player_kind = "action" if player_input.kind == "action" else "conversation"
    memory.record(session.scope(), player_kind, resolved_text, turn)
    memory.record(session.scope(), "conversation", response_text, turn)
    if target is not None:
        memory.record(session.npc_scope(target.id), player_kind, resolved_text, turn)
        memory.record(session.npc_scope(target.id), "conversation", response_text, turn)

    transitions: list[BeatTransition] = []
    if not was_corrected:
        transitions = check_beat_progress(session, (resolved_text, response_text), gateway, memory, registry)

    session.transcript.append(TranscriptEntry(turn, "player", resolved_text, False))
    session.transcript.append(TranscriptEntry(turn, speaker, response_text, was_corrected))
    session.last_suggestions = suggestions
    session.turn_index += 1

    return TurnResponse(
        text=response_text,
        speaker=speaker,
        suggested_actions=suggestions,
        was_corrected=was_corrected,
        beat_transitions=transitions,
    )


def check_beat_progress(
    session: Session,
    recent_exchange: tuple[str, str],
    gateway: Gateway,
    memory: MemoryStore,
    templates: TemplateRegistry | None = None,
) -> list[BeatTransition]:
    """Ask a yes/no judge whether the active beat's completion criteria are met.

    On yes, the beat completes and the next pending beat activates. Judge
    trouble is logged and produces no transition; it never blocks a turn.
    """
    registry = templates or default_templates()
    active = session.definition.active_beat()
    if active is None:
        return []
    player_text, response_text = recent_exchange
    try:
        context = memory.context_pack(session.scope(), active.completion_criteria, gateway, registry)
        prompt = render(
            registry.get(BEAT_JUDGE_TEMPLATE_ID),
            criteria={
                "beat_description": active.description,
                "completion_criteria": active.completion_criteria,
                "player_input": player_text,
                "response": response_text,
            },
            context=context,
        )
        answer = text_reply(gateway.complete([user_message(prompt.text)]), "answer")
    except Exception as exc:
        logger.warning("beat judge failed, beat %s stays active: %s", active.id, exc)
        return []
    if not answer.strip().lower().startswith("yes"):
        return []

    transitions = [BeatTransition(active.id, "active", "complete")]
    active.status = "complete"
    next_beat = _next_pending(session.definition.beats)
    if next_beat is not None:
        next_beat.status = "active"
        transitions.append(BeatTransition(next_beat.id, "pending", "active"))
    else:
        session.narrative_complete = True
    return transitions


def _next_pending(beats: list[NarrativeBeat]) -> NarrativeBeat | None:
    for beat in sorted(beats, key=lambda b: b.ordinal):
        if beat.status == "pending":
            return beat
    return None


# --- snapshots ---


def snapshot(session: Session, memory: MemoryStore) -> dict:
    """Full state of one session, JSON-safe, sufficient to resume it."""
    return {
        "session": {
            "id": session.id,
            "definition": session.definition.to_dict(),
            "validation": session.validation.to_dict(),
            "turn_index": session.turn_index,
            "transcript": [e.to_dict() for e in session.transcript],
            "last_suggestions": list(session.last_suggestions),
            "narrative_complete": session.narrative_complete,
        },
        "memory": memory.to_dict(),
    }


def restore(data: dict) -> tuple[Session, MemoryStore]:
    s = data["session"]
    session = Session(
        id=s["id"],
        definition=GameDefinition.from_dict(s["definition"]),
        validation=ValidationConfig(**s["validation"]),
        turn_index=int(s["turn_index"]),
        transcript=[TranscriptEntry.from_dict(e) for e in s["transcript"]],
        last_suggestions=list(s.get("last_suggestions", [])),
        narrative_complete=bool(s.get("narrative_complete", False)),
    )
    return session, MemoryStore.from_dict(data["memory"])


def write_snapshot(session: Session, memory: MemoryStore, directory: Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{session.id}.json"
    path.write_text(json.dumps(snapshot(session, memory), indent=2, sort_keys=True))
    return path
