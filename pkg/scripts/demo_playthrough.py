#!/usr/bin/env python3
"""Play a short scripted game offline and print the transcript.

Exercises the full loop without any model endpoint: five-stage
initialization from the bundled criteria, a mechanic turn, an NPC
interrogation, and one rule-violating input that the validation layer
turns into a corrective reply.

    python scripts/demo_playthrough.py
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from storyloom.gateway import ScriptedGateway
from storyloom.init_pipeline import run_initialization
from storyloom.memory import MemoryStore
from storyloom.models import DesignerCriteria
from storyloom.server import bundled_play_fixtures_path
from storyloom.session import PlayerInput, create_session, take_turn
from storyloom.validation import ValidationConfig

DATA = Path(__file__).resolve().parent.parent / "src" / "storyloom" / "data"


def main() -> None:
    gateway = ScriptedGateway.from_file(bundled_play_fixtures_path())
    criteria = DesignerCriteria.from_dict(json.loads((DATA / "halloran_house_criteria.json").read_text()))
    memory = MemoryStore()

    print("== initializing game ==")
    definition = run_initialization(criteria, gateway, memory, "demo")
    print(f"setting: {definition.setting.location}, {definition.setting.time_period}")
    print(f"player:  {definition.player.name} ({definition.player.role})")
    for npc in definition.npcs:
        traits = ", ".join(f"{k[:4]}={v}" for k, v in npc.big5.as_percentages().items())
        print(f"npc:     {npc.name} [{npc.role}] {traits}")
    print(f"rules:   {len(definition.rules.rules)}, beats: {len(definition.beats)}")

    session = create_session(definition, ValidationConfig(enabled=True), memory, "demo")
    moves = [
        PlayerInput(kind="action", action_id="search_crime_scene"),
        PlayerInput(kind="free_text", text="Who found her, and when?", target_npc="thomas_oreilly"),
        PlayerInput(kind="free_text", text="I think a dragon just flew past the window."),
    ]
    for move in moves:
        take_turn(session, move, gateway, memory)

    print("\n== transcript ==")
    for entry in session.transcript:
        badge = "  [corrected]" if entry.was_corrected else ""
        print(f"[turn {entry.turn_index}] {entry.speaker}{badge}:")
        for line in entry.text.splitlines():
            print(f"    {line}")
    print("\n== beats ==")
    for beat in session.definition.beats:
        print(f"  {beat.id} ({beat.status}): {beat.description}")


if __name__ == "__main__":
    main()
