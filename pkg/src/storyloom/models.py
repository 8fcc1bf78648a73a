"""Domain model for the generated game: criteria in, game definition out.

Everything here is a plain dataclass with dict round-tripping so presets,
API payloads, and session snapshots all share one wire shape (snake_case
keys, exactly the field names below).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import InvalidCriteria, InvariantViolation

BIG5_TRAITS = ("openness", "conscientiousness", "extroversion", "agreeableness", "neuroticism")

NPC_ROLES = ("protagonist", "antagonist", "suspect", "ally", "other")

BEAT_STATUSES = ("pending", "active", "complete")


def slugify(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")
    return slug or "unnamed"


@dataclass(frozen=True)
class DesignerMechanic:
    """A designer-authored player action button, e.g. "Interrogate Suspect"."""

    id: str
    label: str
    template_id: str

    def to_dict(self) -> dict:
        return {"id": self.id, "label": self.label, "template_id": self.template_id}

    @classmethod
    def from_dict(cls, data: dict) -> "DesignerMechanic":
        try:
            return cls(id=str(data["id"]), label=str(data["label"]), template_id=str(data["template_id"]))
        except KeyError as exc:
            raise InvalidCriteria(f"mechanic missing field {exc}") from exc


@dataclass
class DesignerCriteria:
    """High-level narrative criteria supplied by the game designer."""

    genre: str
    location_hint: str = ""
    time_period_hint: str = ""
    tone: str = ""
    player_role_hint: str = ""
    npc_count: int = 1
    mechanics: list[DesignerMechanic] = field(default_factory=list)
    notes: str = ""

    def __post_init__(self):
        if not str(self.genre).strip():
            raise InvalidCriteria("criteria must declare a genre")
        if int(self.npc_count) < 1:
            raise InvalidCriteria("npc_count must be >= 1")
        labels = [m.label for m in self.mechanics]
        if len(labels) != len(set(labels)):
            raise InvalidCriteria("mechanic labels must be unique")

    def to_prompt_dict(self) -> dict:
        """Shape injected verbatim into the criteria segment of prompts."""
        return {
            "genre": self.genre,
            "location_hint": self.location_hint,
            "time_period_hint": self.time_period_hint,
            "tone": self.tone,
            "player_role_hint": self.player_role_hint,
            "npc_count": self.npc_count,
            "mechanics": [m.label for m in self.mechanics],
            "notes": self.notes,
        }

    def to_dict(self) -> dict:
        d = self.to_prompt_dict()
        d["mechanics"] = [m.to_dict() for m in self.mechanics]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "DesignerCriteria":
        if not isinstance(data, dict):
            raise InvalidCriteria("criteria must be a JSON object")
        if "genre" not in data:
            raise InvalidCriteria("criteria must declare a genre")
        try:
            npc_count = int(data.get("npc_count", 1))
        except (TypeError, ValueError):
            raise InvalidCriteria("npc_count must be an integer") from None
        mechanics_raw = data.get("mechanics", [])
        if not isinstance(mechanics_raw, list):
            raise InvalidCriteria("mechanics must be a list")
        return cls(
            genre=str(data["genre"]),
            location_hint=str(data.get("location_hint", "")),
            time_period_hint=str(data.get("time_period_hint", "")),
            tone=str(data.get("tone", "")),
            player_role_hint=str(data.get("player_role_hint", "")),
            npc_count=npc_count,
            mechanics=[DesignerMechanic.from_dict(m) for m in mechanics_raw],
            notes=str(data.get("notes", "")),
        )


@dataclass(frozen=True)
class Rule:
    id: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise InvariantViolation(f"rule {self.id!r} has empty text")


@dataclass
class GamePlayRules:
    rules: list[Rule]

    def __post_init__(self):
        if not self.rules:
            raise InvariantViolation("game play rules must be non-empty")
        ids = [r.id for r in self.rules]
        if len(ids) != len(set(ids)):
            raise InvariantViolation("rule ids must be unique")

    def texts(self) -> list[str]:
        return [r.text for r in self.rules]

    def to_dict(self) -> list[dict]:
        return [{"id": r.id, "text": r.text} for r in self.rules]

    @classmethod
    def from_dict(cls, data: list) -> "GamePlayRules":
        return cls(rules=[Rule(id=str(r["id"]), text=str(r["text"])) for r in data])


@dataclass(frozen=True)
class NarrativeSetting:
    location: str
    time_period: str
    setting_description: str

    def __post_init__(self):
        for name in ("location", "time_period", "setting_description"):
            if not getattr(self, name).strip():
                raise InvariantViolation(f"setting field {name!r} must be non-empty")

    def to_dict(self) -> dict:
        return {
            "location": self.location,
            "time_period": self.time_period,
            "setting_description": self.setting_description,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NarrativeSetting":
        return cls(
            location=str(data["location"]),
            time_period=str(data["time_period"]),
            setting_description=str(data["setting_description"]),
        )


@dataclass(frozen=True)
class PlayerPersona:
    name: str
    role: str
    background: str = ""
    attributes: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.role.strip():
            raise InvariantViolation("player persona must have a non-empty role")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "role": self.role,
            "background": self.background,
            "attributes": list(self.attributes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlayerPersona":
        return cls(
            name=str(data.get("name", "")),
            role=str(data["role"]),
            background=str(data.get("background", "")),
            attributes=tuple(str(a) for a in data.get("attributes", [])),
        )


@dataclass(frozen=True)
class Big5Profile:
    """Per-trait percentages in [0, 100] used to bias NPC responses."""

    openness: int
    conscientiousness: int
    extroversion: int
    agreeableness: int
    neuroticism: int

    def __post_init__(self):
        for trait in BIG5_TRAITS:
            value = getattr(self, trait)
            if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= 100:
                raise InvariantViolation(f"trait {trait!r} must be an integer in [0, 100], got {value!r}")

    def as_percentages(self) -> dict[str, int]:
        return {trait: getattr(self, trait) for trait in BIG5_TRAITS}

    def to_dict(self) -> dict:
        return self.as_percentages()

    @classmethod
    def from_dict(cls, data: dict) -> "Big5Profile":
        values = {}
        for trait in BIG5_TRAITS:
            if trait not in data:
                raise InvariantViolation(f"personality profile missing trait {trait!r}")
            raw = data[trait]
            if isinstance(raw, float) and raw.is_integer():
                raw = int(raw)
            values[trait] = raw
        return cls(**values)


@dataclass(frozen=True)
class NpcProfile:
    id: str
    name: str
    background: str
    big5: Big5Profile
    role: str
    occupation: str | None = None
    reason_for_suspicion: str | None = None

    def __post_init__(self):
        if self.role not in NPC_ROLES:
            raise InvariantViolation(f"npc role must be one of {NPC_ROLES}, got {self.role!r}")
        if not self.name.strip():
            raise InvariantViolation("npc name must be non-empty")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "background": self.background,
            "big5": self.big5.to_dict(),
            "role": self.role,
            "occupation": self.occupation,
            "reason_for_suspicion": self.reason_for_suspicion,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NpcProfile":
        return cls(
            id=str(data.get("id") or slugify(str(data["name"]))),
            name=str(data["name"]),
            background=str(data.get("background", "")),
            big5=Big5Profile.from_dict(data["big5"]),
            role=str(data["role"]),
            occupation=data.get("occupation"),
            reason_for_suspicion=data.get("reason_for_suspicion"),
        )


@dataclass
class NarrativeBeat:
    id: str
    ordinal: int
    description: str
    completion_criteria: str
    status: str = "pending"

    def __post_init__(self):
        if self.status not in BEAT_STATUSES:
            raise InvariantViolation(f"beat status must be one of {BEAT_STATUSES}, got {self.status!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "ordinal": self.ordinal,
            "description": self.description,
            "completion_criteria": self.completion_criteria,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NarrativeBeat":
        return cls(
            id=str(data["id"]),
            ordinal=int(data["ordinal"]),
            description=str(data["description"]),
            completion_criteria=str(data["completion_criteria"]),
            status=str(data.get("status", "pending")),
        )


@dataclass
class GameDefinition:
    """Product of the five-stage init pipeline; the authoritative narrative baseline."""

    rules: GamePlayRules
    setting: NarrativeSetting
    player: PlayerPersona
    npcs: list[NpcProfile]
    beats: list[NarrativeBeat]
    mechanics: list[DesignerMechanic] = field(default_factory=list)

    def __post_init__(self):
        if not self.npcs:
            raise InvariantViolation("definition must contain at least one npc")
        names = [n.name for n in self.npcs]
        if len(names) != len(set(names)):
            raise InvariantViolation("npc names must be unique within a definition")
        ids = [n.id for n in self.npcs]
        if len(ids) != len(set(ids)):
            raise InvariantViolation("npc ids must be unique within a definition")
        if not self.beats:
            raise InvariantViolation("definition must contain at least one narrative beat")
        ordinals = [b.ordinal for b in self.beats]
        if sorted(ordinals) != ordinals or len(set(ordinals)) != len(ordinals):
            raise InvariantViolation("beat ordinals must be strictly increasing")

    def npc_by_id(self, npc_id: str) -> NpcProfile | None:
        for npc in self.npcs:
            if npc.id == npc_id:
                return npc
        return None

    def mechanic_by_id(self, mechanic_id: str) -> DesignerMechanic | None:
        for mech in self.mechanics:
            if mech.id == mechanic_id:
                return mech
        return None

    def active_beat(self) -> NarrativeBeat | None:
        for beat in self.beats:
            if beat.status == "active":
                return beat
        return None

    def to_dict(self) -> dict:
        return {
            "rules": self.rules.to_dict(),
            "setting": self.setting.to_dict(),
            "player": self.player.to_dict(),
            "npcs": [n.to_dict() for n in self.npcs],
            "beats": [b.to_dict() for b in self.beats],
            "mechanics": [m.to_dict() for m in self.mechanics],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GameDefinition":
        return cls(
            rules=GamePlayRules.from_dict(data["rules"]),
            setting=NarrativeSetting.from_dict(data["setting"]),
            player=PlayerPersona.from_dict(data["player"]),
            npcs=[NpcProfile.from_dict(n) for n in data["npcs"]],
            beats=[NarrativeBeat.from_dict(b) for b in data["beats"]],
            mechanics=[DesignerMechanic.from_dict(m) for m in data.get("mechanics", [])],
        )
