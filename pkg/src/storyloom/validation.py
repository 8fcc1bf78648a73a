"""Self-reflective input validation: judge text against the generated
game-play rules, derive corrective logic on a violation, and speak the
correction back in character.

Two separate completions mirror the two reflection steps: first the
judgment, then (only for violations) the corrective logic that guides the
player-facing reply. A broken judge never bricks the game; the configured
failure policy decides between waving the input through and a canned
corrective line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import InvariantViolation, JudgeUnavailable
from .gateway import Gateway, user_message
from .models import GamePlayRules, NpcProfile
from .prompts import OutputSchema, TemplateRegistry, default_templates, extract_structured, render, text_reply

logger = logging.getLogger(__name__)

JUDGE_TEMPLATE_ID = "validation_judge"
CORRECTIVE_LOGIC_TEMPLATE_ID = "corrective_logic"
CORRECTION_TEMPLATE_ID = "correction"

FAILURE_POLICIES = ("fail_open", "fail_corrective")

# Player-facing line used when the judge is down and policy says correct.
FALLBACK_CORRECTION_LINE = (
    "Let's stay with the story before us. What would you like to do next?"
)

_JUDGE_SCHEMA = OutputSchema.of(violated_rule_ids="array", rationale="string")


@dataclass(frozen=True)
class ValidationVerdict:
    """Judgment over one piece of input text.

    Constructor enforces the consistency triangle: compliant exactly when
    there are no violated rules, exactly when there is no corrective logic.
    """

    compliant: bool
    violated_rule_ids: tuple[str, ...]
    rationale: str
    corrective_logic: str | None = None

    def __post_init__(self):
        if self.compliant != (len(self.violated_rule_ids) == 0):
            raise InvariantViolation("verdict compliance must match emptiness of violated_rule_ids")
        if self.compliant != (self.corrective_logic is None):
            raise InvariantViolation("corrective_logic must be present exactly for violations")

    def to_dict(self) -> dict:
        return {
            "compliant": self.compliant,
            "violated_rule_ids": list(self.violated_rule_ids),
            "rationale": self.rationale,
            "corrective_logic": self.corrective_logic,
        }


@dataclass
class ValidationConfig:
    enabled: bool = True
    judge_retries: int = 2
    on_judge_failure: str = "fail_open"

    def __post_init__(self):
        if self.judge_retries < 0:
            raise ValueError("judge_retries must be non-negative")
        if self.on_judge_failure not in FAILURE_POLICIES:
            raise ValueError(f"on_judge_failure must be one of {FAILURE_POLICIES}")

    def to_dict(self) -> dict:
        return {
            "enabled": self.enabled,
            "judge_retries": self.judge_retries,
            "on_judge_failure": self.on_judge_failure,
        }


@dataclass(frozen=True)
class GuardOutcome:
    """Either the input passes, or it is replaced by a corrective reply."""

    passed: bool
    text: str | None = None
    verdict: ValidationVerdict | None = None

    @classmethod
    def passing(cls) -> "GuardOutcome":
        return cls(passed=True)

    @classmethod
    def corrected(cls, text: str, verdict: ValidationVerdict) -> "GuardOutcome":
        return cls(passed=False, text=text, verdict=verdict)


def _speaker_block(speaker: NpcProfile | None) -> dict:
    if speaker is None:
        return {"voice": "narrator"}
    return {
        "voice": "npc",
        "speaker": {
            "name": speaker.name,
            "background": speaker.background,
            "role": speaker.role,
            "occupation": speaker.occupation,
            "big5_percentages": speaker.big5.as_percentages(),
        },
    }


def judge_input(
    input_text: str,
    rules: GamePlayRules,
    context: str,
    gateway: Gateway,
    judge_retries: int = 2,
    templates: TemplateRegistry | None = None,
) -> ValidationVerdict:
    """Step one of the reflection: does the input break a game-play rule?

    The full rule list is injected verbatim (rule counts are bounded, no
    retrieval needed). A malformed or failed judgment is retried up to
    ``judge_retries`` times before raising JudgeUnavailable. For
    violations, a second prompt produces the corrective logic.
    """
    registry = templates or default_templates()
    judge_prompt = render(
        registry.get(JUDGE_TEMPLATE_ID),
        criteria={"game_play_rules": rules.to_dict(), "player_input": input_text},
        context=context,
    )

    verdict_obj: dict | None = None
    last_error: Exception | None = None
    for _ in range(judge_retries + 1):
        try:
            completion = gateway.complete([user_message(judge_prompt.text)])
            obj = extract_structured(completion, _JUDGE_SCHEMA)
        except Exception as exc:  # malformed output and gateway failures alike
            last_error = exc
            logger.warning("judge attempt failed: %s", exc)
            continue
        compliant = obj.get("compliant")
        ids = tuple(str(r) for r in obj["violated_rule_ids"])
        if not isinstance(compliant, bool) or compliant != (len(ids) == 0):
            last_error = InvariantViolation(f"inconsistent judgment: compliant={compliant!r}, ids={ids}")
            logger.warning("judge produced inconsistent verdict, retrying")
            continue
        verdict_obj = {"compliant": compliant, "ids": ids, "rationale": str(obj["rationale"])}
        break
    if verdict_obj is None:
        raise JudgeUnavailable(f"judge failed after {judge_retries + 1} attempts: {last_error}")

    if verdict_obj["compliant"]:
        return ValidationVerdict(compliant=True, violated_rule_ids=(), rationale=verdict_obj["rationale"])

    violated_texts = [r.text for r in rules.rules if r.id in verdict_obj["ids"]]
    logic_prompt = render(
        registry.get(CORRECTIVE_LOGIC_TEMPLATE_ID),
        criteria={
            "player_input": input_text,
            "violated_rules": violated_texts or list(verdict_obj["ids"]),
            "rationale": verdict_obj["rationale"],
        },
        context=context,
    )
    logic_text: str | None = None
    for _ in range(judge_retries + 1):
        try:
            logic_text = text_reply(gateway.complete([user_message(logic_prompt.text)]), "corrective_logic")
            break
        except Exception as exc:
            last_error = exc
            logger.warning("corrective-logic attempt failed: %s", exc)
    if logic_text is None:
        raise JudgeUnavailable(f"corrective logic failed after {judge_retries + 1} attempts: {last_error}")

    return ValidationVerdict(
        compliant=False,
        violated_rule_ids=verdict_obj["ids"],
        rationale=verdict_obj["rationale"],
        corrective_logic=logic_text,
    )


def corrective_response(
    verdict: ValidationVerdict,
    speaker: NpcProfile | None,
    context: str,
    gateway: Gateway,
    templates: TemplateRegistry | None = None,
) -> str:
    """Step two: the in-character reply the player actually sees.

    With a speaker, the prompt carries the full persona including all five
    trait percentages; without one it uses narrator framing. Gateway
    errors propagate to the caller.
    """
    if verdict.compliant:
        raise ValueError("corrective_response requires a non-compliant verdict")
    registry = templates or default_templates()
    criteria = {
        "corrective_logic": verdict.corrective_logic,
        "rationale": verdict.rationale,
        **_speaker_block(speaker),
    }
    prompt = render(registry.get(CORRECTION_TEMPLATE_ID), criteria=criteria, context=context)
    return text_reply(gateway.complete([user_message(prompt.text)]), "response")


def guard(
    input_text: str,
    rules: GamePlayRules,
    context: str,
    config: ValidationConfig,
    speaker: NpcProfile | None,
    gateway: Gateway,
    templates: TemplateRegistry | None = None,
) -> GuardOutcome:
    """Full reflection pipeline with the ablation switch.

    Disabled means zero gateway calls. Judge failure resolves by policy:
    fail_open waves the input through, fail_corrective answers with a
    fixed corrective line.
    """
    if not config.enabled:
        return GuardOutcome.passing()
    try:
        verdict = judge_input(
            input_text, rules, context, gateway, judge_retries=config.judge_retries, templates=templates
        )
    except JudgeUnavailable as exc:
        logger.warning("judge unavailable (%s), applying policy %s", exc, config.on_judge_failure)
        if config.on_judge_failure == "fail_open":
            return GuardOutcome.passing()
        fallback = ValidationVerdict(
            compliant=False,
            violated_rule_ids=("unavailable_judge",),
            rationale="The rule judge was unavailable; answering cautiously.",
            corrective_logic=FALLBACK_CORRECTION_LINE,
        )
        return GuardOutcome.corrected(FALLBACK_CORRECTION_LINE, fallback)
    if verdict.compliant:
        return GuardOutcome.passing()
    return GuardOutcome.corrected(
        corrective_response(verdict, speaker, context, gateway, templates), verdict
    )
