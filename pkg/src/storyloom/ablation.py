"""Validation on/off ablation harness.

Replays a categorized corpus of irrelevant inputs against fresh sessions,
once with the validation system enabled and once without, judges whether
each generated response stayed aligned with the narrative, and tallies the
results into a table with one row per category and On/Off columns.

Judges are pluggable: a marker-based scripted judge for CI, an LLM judge
for live runs, or a CSV export/import loop for human evaluation.

Usage:
    ablate run --judge scripted --out report.md
    ablate run --corpus probes.jsonl --definition game.json --judge llm --out report.md
    ablate run --judge human --responses responses.csv          # export
    ablate run --judge human --verdicts verdicts.csv --out report.md
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import NoJsonFound, SchemaMismatch, StoryloomError
from .gateway import JUDGE_TEMPERATURE, EndpointConfig, Gateway, HttpGateway, ScriptedGateway, user_message
from .memory import MemoryConfig, MemoryStore
from .models import GameDefinition
from .prompts import OutputSchema, TemplateRegistry, default_templates, extract_structured, render
from .session import PlayerInput, create_session, take_turn
from .validation import ValidationConfig

logger = logging.getLogger(__name__)

CATEGORY_SUBCATEGORIES = {
    "off_topic": ("temporal", "regional", "generic"),
    "out_of_character": ("openness", "conscientiousness", "extroversion", "agreeableness", "neuroticism"),
    "cheating": ("future_sight", "world_hacking", "npc_hacking"),
}

CATEGORY_LABELS = {
    "off_topic": "Off Topic",
    "out_of_character": "Out of Character",
    "cheating": "Cheating",
}

CONFIGS = ("validation_on", "validation_off")

# Emitted by the bundled scripted fixtures; the scripted judge keys on them.
OUT_OF_SCOPE_MARKER = "[out-of-scope]"
CORRECTION_MARKER = "[narrative-correction]"

ABLATION_JUDGE_TEMPLATE_ID = "ablation_judge"

JUDGE_KINDS = ("scripted", "llm", "human")


@dataclass(frozen=True)
class AblationItem:
    id: str
    category: str
    subcategory: str
    text: str
    target_npc: str | None = None

    def __post_init__(self):
        if self.category not in CATEGORY_SUBCATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.subcategory not in CATEGORY_SUBCATEGORIES[self.category]:
            raise ValueError(f"subcategory {self.subcategory!r} is not legal for {self.category!r}")
        if self.category == "out_of_character" and not self.target_npc:
            raise ValueError(f"item {self.id!r}: out_of_character probes must target an npc")
        if not self.text.strip():
            raise ValueError(f"item {self.id!r} has empty text")

    @classmethod
    def from_dict(cls, data: dict) -> "AblationItem":
        return cls(
            id=str(data["id"]),
            category=str(data["category"]),
            subcategory=str(data["subcategory"]),
            text=str(data["text"]),
            target_npc=data.get("target_npc"),
        )


@dataclass
class ProbeResponse:
    """What one (item, config) run produced before judging."""

    item: AblationItem
    config: str  # validation_on | validation_off
    response_text: str
    was_corrected: bool
    error_note: str = ""


@dataclass(frozen=True)
class JudgeVerdict:
    item_id: str
    config: str
    aligned: bool
    response_text: str
    notes: str = ""


@dataclass
class AblationReport:
    """Aligned/total tallies per category and per validation arm."""

    counts: dict[str, dict[str, tuple[int, int]]]  # category -> config -> (aligned, total)
    totals: dict[str, tuple[int, int]]  # config -> (aligned, total)

    def __post_init__(self):
        for config in CONFIGS:
            aligned = sum(self.counts[c][config][0] for c in self.counts)
            total = sum(self.counts[c][config][1] for c in self.counts)
            if (aligned, total) != self.totals[config]:
                raise ValueError(f"totals for {config} do not match category sums")


def load_corpus(path: Path | str) -> list[AblationItem]:
    items = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            items.append(AblationItem.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"corpus line {line_no} is invalid: {exc}") from exc
    return items


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("storyloom") / "data" / "ablation_corpus.jsonl"))


def bundled_definition_path() -> Path:
    return Path(str(resources.files("storyloom") / "data" / "halloran_house_definition.json"))


def bundled_fixtures_path() -> Path:
    return Path(str(resources.files("storyloom") / "fixtures" / "halloran_ablation.json"))


def _resolve_target(item: AblationItem, definition: GameDefinition) -> str | None:
    if item.target_npc is None:
        return None
    if definition.npc_by_id(item.target_npc) is not None:
        return item.target_npc
    # Corpus and definition may come from different sources; fall back to
    # the first npc rather than dropping the probe.
    fallback = definition.npcs[0].id
    logger.warning("item %s targets unknown npc %r, using %r", item.id, item.target_npc, fallback)
    return fallback


def run_probe(
    item: AblationItem,
    config: str,
    definition: GameDefinition,
    gateway: Gateway,
    templates: TemplateRegistry | None = None,
    memory_config: MemoryConfig | None = None,
) -> ProbeResponse:
    """One probe in one fresh session: no memory carries over between items."""
    memory = MemoryStore(memory_config or MemoryConfig())
    session = create_session(
        definition,
        ValidationConfig(enabled=(config == "validation_on")),
        memory,
    )
    player_input = PlayerInput(
        kind="free_text", text=item.text, target_npc=_resolve_target(item, definition)
    )
    try:
        turn = take_turn(session, player_input, gateway, memory, templates)
    except StoryloomError as exc:
        logger.warning("probe %s (%s) failed: %s", item.id, config, exc)
        return ProbeResponse(item, config, response_text="", was_corrected=False, error_note=str(exc))
    return ProbeResponse(item, config, response_text=turn.text, was_corrected=turn.was_corrected)


def collect_responses(
    corpus: list[AblationItem],
    definition: GameDefinition,
    gateway: Gateway,
    templates: TemplateRegistry | None = None,
    parallel: int = 1,
) -> list[ProbeResponse]:
    """Run every (item, on/off) pair; order of results is fixed regardless of parallelism."""
    jobs = [(item, config) for item in corpus for config in CONFIGS]
    if parallel <= 1:
        return [run_probe(item, config, definition, gateway, templates) for item, config in jobs]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(lambda job: run_probe(job[0], job[1], definition, gateway, templates), jobs))


def judge_scripted(responses: list[ProbeResponse]) -> list[JudgeVerdict]:
    """Marker-based judge for scripted runs.

    Aligned when the response carries the correction marker, or carries no
    out-of-scope marker at all. Probe errors are never aligned.
    """
    verdicts = []
    for probe in responses:
        if probe.error_note:
            aligned, notes = False, f"probe error: {probe.error_note}"
        else:
            aligned = CORRECTION_MARKER in probe.response_text or OUT_OF_SCOPE_MARKER not in probe.response_text
            notes = "corrected" if probe.was_corrected else ""
        verdicts.append(JudgeVerdict(probe.item.id, probe.config, aligned, probe.response_text, notes))
    return verdicts


def judge_llm(
    responses: list[ProbeResponse],
    definition: GameDefinition,
    judge_gateway: Gateway,
    templates: TemplateRegistry | None = None,
) -> list[JudgeVerdict]:
    """Binary alignment question per response, meant to run at temperature 0."""
    registry = templates or default_templates()
    # The reply's interesting key is a bool, which key schemas cannot
    # require; accept any object and read it by hand.
    schema = OutputSchema(required_keys=())
    verdicts = []
    for probe in responses:
        if probe.error_note:
            verdicts.append(JudgeVerdict(probe.item.id, probe.config, False, "", f"probe error: {probe.error_note}"))
            continue
        prompt = render(
            registry.get(ABLATION_JUDGE_TEMPLATE_ID),
            criteria={
                "game_play_rules": definition.rules.to_dict(),
                "setting": definition.setting.to_dict(),
                "player_input": probe.item.text,
                "generated_response": probe.response_text,
            },
        )
        aligned, notes = False, ""
        try:
            completion = judge_gateway.complete([user_message(prompt.text)])
            obj = extract_structured(completion, schema)
            aligned = bool(obj.get("aligned") is True)
            notes = str(obj.get("notes", ""))
        except (NoJsonFound, SchemaMismatch, StoryloomError) as exc:
            notes = f"judge error: {exc}"
        verdicts.append(JudgeVerdict(probe.item.id, probe.config, aligned, probe.response_text, notes))
    return verdicts


def write_responses_csv(responses: list[ProbeResponse], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "config", "category", "subcategory", "input_text", "response_text", "error_note", "aligned"])
        for probe in responses:
            writer.writerow(
                [
                    probe.item.id,
                    probe.config,
                    probe.item.category,
                    probe.item.subcategory,
                    probe.item.text,
                    probe.response_text,
                    probe.error_note,
                    "",  # filled in by the human evaluator
                ]
            )


def read_verdicts_csv(path: Path | str, responses: list[ProbeResponse]) -> list[JudgeVerdict]:
    by_key = {(p.item.id, p.config): p for p in responses}
    verdicts = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["item_id"], row["config"])
            probe = by_key.get(key)
            raw = row.get("aligned", "").strip().lower()
            aligned = raw in ("1", "true", "yes", "y")
            verdicts.append(
                JudgeVerdict(
                    item_id=row["item_id"],
                    config=row["config"],
                    aligned=aligned,
                    response_text=probe.response_text if probe else row.get("response_text", ""),
                    notes=row.get("notes", ""),
                )
            )
    return verdicts


def aggregate(verdicts: list[JudgeVerdict], corpus: list[AblationItem]) -> AblationReport:
    category_of = {item.id: item.category for item in corpus}
    counts = {
        category: {config: [0, 0] for config in CONFIGS} for category in CATEGORY_SUBCATEGORIES
    }
    seen: set[tuple[str, str]] = set()
    for verdict in verdicts:
        key = (verdict.item_id, verdict.config)
        if key in seen:
            raise ValueError(f"duplicate verdict for {key}")
        seen.add(key)
        category = category_of[verdict.item_id]
        counts[category][verdict.config][1] += 1
        if verdict.aligned:
            counts[category][verdict.config][0] += 1
    frozen = {
        category: {config: tuple(cells) for config, cells in per_config.items()}
        for category, per_config in counts.items()
    }
    totals = {
        config: (
            sum(frozen[c][config][0] for c in frozen),
            sum(frozen[c][config][1] for c in frozen),
        )
        for config in CONFIGS
    }
    return AblationReport(counts=frozen, totals=totals)


def run_ablation(
    corpus: list[AblationItem],
    definition: GameDefinition,
    gateway: Gateway,
    judge: str = "scripted",
    templates: TemplateRegistry | None = None,
    parallel: int = 1,
    responses_csv: Path | str | None = None,
    verdicts_csv: Path | str | None = None,
    judge_gateway: Gateway | None = None,
) -> AblationReport | None:
    """Full experiment. Returns None for a human-judge export run
    (responses written, verdicts not yet available)."""
    if judge not in JUDGE_KINDS:
        raise ValueError(f"judge must be one of {JUDGE_KINDS}")
    responses = collect_responses(corpus, definition, gateway, templates, parallel)
    if responses_csv:
        write_responses_csv(responses, responses_csv)
    if judge == "scripted":
        verdicts = judge_scripted(responses)
    elif judge == "llm":
        verdicts = judge_llm(responses, definition, judge_gateway or gateway, templates)
    else:
        if not verdicts_csv:
            return None
        verdicts = read_verdicts_csv(verdicts_csv, responses)
    return aggregate(verdicts, corpus)


def render_report(report: AblationReport) -> str:
    """Markdown table, one category per row, On/Off columns, cells "k/n"."""
    lines = [
        "| Category | On | Off |",
        "| --- | --- | --- |",
    ]
    for category in CATEGORY_SUBCATEGORIES:
        on = report.counts[category]["validation_on"]
        off = report.counts[category]["validation_off"]
        lines.append(f"| {CATEGORY_LABELS[category]} | {on[0]}/{on[1]} | {off[0]}/{off[1]} |")
    on_total = report.totals["validation_on"]
    off_total = report.totals["validation_off"]
    lines.append(f"| Total Correct | {on_total[0]}/{on_total[1]} | {off_total[0]}/{off_total[1]} |")
    return "\n".join(lines)


def _load_definition(spec: str) -> GameDefinition:
    if spec == "preset":
        path = bundled_definition_path()
    else:
        path = Path(spec)
    return GameDefinition.from_dict(json.loads(path.read_text()))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ablate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="replay the corpus against validation on/off sessions")
    run.add_argument("--corpus", default=None, help="JSONL corpus path (default: bundled 90-item corpus)")
    run.add_argument("--definition", default="preset", help="game definition JSON path, or 'preset' for the bundled mystery")
    run.add_argument("--judge", choices=JUDGE_KINDS, default="scripted")
    run.add_argument("--out", default=None, help="write the rendered report here")
    run.add_argument("--responses", default=None, help="write per-probe responses CSV here")
    run.add_argument("--verdicts", default=None, help="read human verdicts CSV from here (judge=human)")
    run.add_argument("--parallel", type=int, default=1)
    run.add_argument("--fixtures", default=None, help="scripted gateway fixtures path (default: bundled ablation fixtures)")
    run.add_argument("--live", action="store_true", help="use the LLM_* env endpoint instead of scripted fixtures")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    corpus = load_corpus(args.corpus or bundled_corpus_path())
    definition = _load_definition(args.definition)

    if args.live:
        play_config = EndpointConfig(base_url="http://localhost:8080", model="default").with_env_overrides()
        gateway: Gateway = HttpGateway(play_config)
        judge_gateway: Gateway = HttpGateway(
            EndpointConfig(
                base_url=play_config.base_url,
                model=play_config.model,
                api_key=play_config.api_key,
                temperature=JUDGE_TEMPERATURE,
            )
        )
    else:
        gateway = ScriptedGateway.from_file(args.fixtures or bundled_fixtures_path())
        judge_gateway = gateway

    report = run_ablation(
        corpus,
        definition,
        gateway,
        judge=args.judge,
        parallel=args.parallel,
        responses_csv=args.responses,
        verdicts_csv=args.verdicts,
        judge_gateway=judge_gateway,
    )
    if report is None:
        print("responses exported; fill in the 'aligned' column and re-run with --verdicts", file=sys.stderr)
        return 2
    table = render_report(report)
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
