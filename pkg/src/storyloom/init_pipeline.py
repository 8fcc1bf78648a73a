"""Five-stage game initialization: rules, setting, player, NPCs, beats.

Stages run in that fixed order. Each stage renders its template with the
designer criteria plus a summary of everything generated so far, extracts
the stage's JSON shape from the completion, stores the product in
session-persistent memory, and feeds the growing summary into the next
stage. Extraction failures are retried with the parse error appended to
the prompt; broken domain values (a trait score of 140) abort instead.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Callable

from .errors import InvariantViolation, NoJsonFound, SchemaMismatch, StageFailed
from .gateway import Gateway, user_message
from .memory import MemoryScope, MemoryStore, summarize
from .models import (
    Big5Profile,
    DesignerCriteria,
    GameDefinition,
    GamePlayRules,
    NarrativeBeat,
    NarrativeSetting,
    NpcProfile,
    PlayerPersona,
    Rule,
    slugify,
)
from .prompts import OutputSchema, TemplateRegistry, default_templates, extract_structured, render

logger = logging.getLogger(__name__)

STAGE_ORDER = ("rules", "setting", "player", "npcs", "beats")

# Extraction failures get the error echoed back to the model this many
# times before the stage gives up (3 gateway calls total per stage).
MAX_EXTRACTION_RETRIES = 2


def _parse_rules(obj: dict, criteria: DesignerCriteria) -> GamePlayRules:
    rules = []
    for i, item in enumerate(obj["rules"], start=1):
        if isinstance(item, str):
            rules.append(Rule(id=f"rule_{i}", text=item))
        elif isinstance(item, dict) and "text" in item:
            rules.append(Rule(id=str(item.get("id") or f"rule_{i}"), text=str(item["text"])))
        else:
            raise InvariantViolation(f"rule entry {i} is neither a string nor an object with text")
    return GamePlayRules(rules=rules)


def _parse_setting(obj: dict, criteria: DesignerCriteria) -> NarrativeSetting:
    return NarrativeSetting.from_dict(obj)


def _parse_player(obj: dict, criteria: DesignerCriteria) -> PlayerPersona:
    return PlayerPersona.from_dict(obj)


def _parse_npcs(obj: dict, criteria: DesignerCriteria) -> list[NpcProfile]:
    npcs: list[NpcProfile] = []
    seen_ids: set[str] = set()
    for entry in obj["npcs"]:
        if not isinstance(entry, dict):
            raise InvariantViolation("npc entry must be an object")
        npc_id = str(entry.get("id") or slugify(str(entry.get("name", ""))))
        while npc_id in seen_ids:
            npc_id += "_2"
        seen_ids.add(npc_id)
        role = str(entry.get("role", "other")).lower()
        npcs.append(
            NpcProfile(
                id=npc_id,
                name=str(entry["name"]),
                background=str(entry.get("background", "")),
                big5=Big5Profile.from_dict(entry["big5"]),
                role=role if role in ("protagonist", "antagonist", "suspect", "ally") else "other",
                occupation=entry.get("occupation"),
                reason_for_suspicion=entry.get("reason_for_suspicion"),
            )
        )
    if len(npcs) != criteria.npc_count:
        raise InvariantViolation(
            f"requested {criteria.npc_count} npcs but the model produced {len(npcs)}"
        )
    return npcs


def _parse_beats(obj: dict, criteria: DesignerCriteria) -> list[NarrativeBeat]:
    beats = []
    for i, entry in enumerate(obj["beats"], start=1):
        if not isinstance(entry, dict):
            raise InvariantViolation("beat entry must be an object")
        beats.append(
            NarrativeBeat(
                id=str(entry.get("id") or f"beat_{i}"),
                ordinal=i,
                description=str(entry["description"]),
                completion_criteria=str(entry.get("completion_criteria", "")),
                status="pending",
            )
        )
    if not beats:
        raise InvariantViolation("the model produced zero narrative beats")
    return beats


@dataclass(frozen=True)
class StageSpec:
    name: str
    template_id: str
    schema: OutputSchema
    parse: Callable[[dict, DesignerCriteria], object]


STAGES: dict[str, StageSpec] = {
    "rules": StageSpec("rules", "init_rules", OutputSchema.of(rules="array"), _parse_rules),
    "setting": StageSpec(
        "setting",
        "init_setting",
        OutputSchema.of(location="string", time_period="string", setting_description="string"),
        _parse_setting,
    ),
    "player": StageSpec(
        "player",
        "init_player",
        OutputSchema.of(name="string", role="string", background="string", attributes="array"),
        _parse_player,
    ),
    "npcs": StageSpec("npcs", "init_npcs", OutputSchema.of(npcs="array"), _parse_npcs),
    "beats": StageSpec("beats", "init_beats", OutputSchema.of(beats="array"), _parse_beats),
}


def run_stage(
    stage: str,
    criteria: DesignerCriteria,
    prior_context: str,
    gateway: Gateway,
    memory: MemoryStore,
    scope: MemoryScope,
    templates: TemplateRegistry | None = None,
):
    """Run one stage and return its typed product.

    The product is also stored as a ``generated_asset`` record under the
    session scope so later prompts can retrieve it.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    spec = STAGES[stage]
    registry = templates or default_templates()
    rendered = render(registry.get(spec.template_id), criteria.to_prompt_dict(), prior_context)

    prompt_text = rendered.text
    last_error: Exception | None = None
    for attempt in range(MAX_EXTRACTION_RETRIES + 1):
        completion = gateway.complete([user_message(prompt_text)])
        try:
            obj = extract_structured(completion, spec.schema)
        except (NoJsonFound, SchemaMismatch) as exc:
            last_error = exc
            logger.warning("stage %s extraction failed (attempt %d): %s", stage, attempt + 1, exc)
            prompt_text = (
                f"{rendered.text}\n\nYour previous reply could not be used: {exc}. "
                "Reply again, strictly in the requested JSON format."
            )
            continue
        product = spec.parse(obj, criteria)
        memory.record(scope, "generated_asset", json.dumps(obj, sort_keys=True), turn_index=0)
        return product
    raise StageFailed(stage, last_error)


def run_initialization(
    criteria: DesignerCriteria,
    gateway: Gateway,
    memory: MemoryStore,
    session_id: str,
    templates: TemplateRegistry | None = None,
) -> GameDefinition:
    """Run all five stages in order and assemble the game definition.

    Stage n sees a summary of the products of stages 1..n-1. Any stage
    failure propagates; no partial definition is ever returned.
    """
    scope = MemoryScope.session(session_id)
    memory.ensure_scope(scope)
    products: dict[str, object] = {}
    stage_records = []
    context = ""
    for stage in STAGE_ORDER:
        products[stage] = run_stage(stage, criteria, context, gateway, memory, scope, templates)
        stage_records.append(memory.recall_short(scope, limit=1)[0])
        if stage != STAGE_ORDER[-1]:
            context = summarize(stage_records, memory.config.summary_max_chars, gateway, templates)
    return GameDefinition(
        rules=products["rules"],
        setting=products["setting"],
        player=products["player"],
        npcs=products["npcs"],
        beats=products["beats"],
        mechanics=list(criteria.mechanics),
    )
