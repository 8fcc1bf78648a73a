"""Procedural narrative engine for turn-based RPGs.

A staged prompting pipeline turns a designer's high-level criteria into a
playable game definition; a two-tier memory system and a self-reflective
validation layer keep free-form play inside the generated rules.
"""

__version__ = "0.1.0"

from .gateway import ChatMessage, EndpointConfig, HttpGateway, ScriptedGateway, ScriptedRule
from .init_pipeline import run_initialization, run_stage
from .memory import MemoryConfig, MemoryRecord, MemoryScope, MemoryStore
from .models import (
    Big5Profile,
    DesignerCriteria,
    DesignerMechanic,
    GameDefinition,
    GamePlayRules,
    NarrativeBeat,
    NarrativeSetting,
    NpcProfile,
    PlayerPersona,
)
from .prompts import OutputSchema, PromptTemplate, RenderedPrompt, TemplateRegistry, extract_structured, render
from .session import PlayerInput, Session, TurnResponse, create_session, take_turn
from .validation import GuardOutcome, ValidationConfig, ValidationVerdict, guard

__all__ = [
    "Big5Profile",
    "ChatMessage",
    "DesignerCriteria",
    "DesignerMechanic",
    "EndpointConfig",
    "GameDefinition",
    "GamePlayRules",
    "GuardOutcome",
    "HttpGateway",
    "MemoryConfig",
    "MemoryRecord",
    "MemoryScope",
    "MemoryStore",
    "NarrativeBeat",
    "NarrativeSetting",
    "NpcProfile",
    "OutputSchema",
    "PlayerInput",
    "PlayerPersona",
    "PromptTemplate",
    "RenderedPrompt",
    "ScriptedGateway",
    "ScriptedRule",
    "Session",
    "TemplateRegistry",
    "TurnResponse",
    "ValidationConfig",
    "ValidationVerdict",
    "create_session",
    "extract_structured",
    "guard",
    "render",
    "run_initialization",
    "run_stage",
    "take_turn",
]
