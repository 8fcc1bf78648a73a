// DOM rendering. The whole app re-renders from the view model on every
// update; the model's narrative half comes straight from server snapshots,
// so a reload that re-fetches the same snapshot paints the same screen.

import type { ViewModel } from "./state.js";
import { BIG5_TRAITS, type NpcProfile } from "./types.js";

export interface Handlers {
  onStartPreset(validationEnabled: boolean): void;
  onStartForm(form: { genre: string; npc_count: number; notes: string }, validationEnabled: boolean): void;
  onMechanic(actionId: string): void;
  onSuggestion(index: number): void;
  onFreeText(text: string): void;
  onSelectNpc(npcId: string | null): void;
  onToggleValidation(enabled: boolean): void;
  onTogglePersonalities(show: boolean): void;
  onDismissBanner(): void;
  onRetry(): void;
  onLeaveSession(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function bannerView(vm: ViewModel, handlers: Handlers): HTMLElement | null {
  if (!vm.banner) return null;
  const children: (Node | string)[] = [el("span", {}, [vm.banner.message])];
  if (vm.banner.retryable) {
    const retry = el("button", { "data-testid": "retry-button" }, ["Retry"]);
    retry.addEventListener("click", () => handlers.onRetry());
    children.push(retry);
  }
  const dismiss = el("button", { "data-testid": "dismiss-banner", class: "dismiss" }, ["x"]);
  dismiss.addEventListener("click", () => handlers.onDismissBanner());
  children.push(dismiss);
  return el("div", { class: `banner ${vm.banner.kind}`, "data-testid": "banner" }, children);
}

function startView(handlers: Handlers): HTMLElement {
  const validation = el("input", { type: "checkbox", id: "validation-box", "data-testid": "validation-checkbox" });
  (validation as HTMLInputElement).checked = true;

  const presetButton = el("button", { "data-testid": "start-preset", class: "primary" }, [
    "Start the bundled mystery",
  ]);
  presetButton.addEventListener("click", () =>
    handlers.onStartPreset((validation as HTMLInputElement).checked),
  );

  const genre = el("input", { "data-testid": "criteria-genre", placeholder: "genre (required)" });
  const npcCount = el("input", { "data-testid": "criteria-npc-count", type: "number", value: "3" });
  const notes = el("textarea", { "data-testid": "criteria-notes", placeholder: "notes for the story" });
  const formButton = el("button", { "data-testid": "start-custom" }, ["Start from criteria"]);
  formButton.addEventListener("click", () =>
    handlers.onStartForm(
      {
        genre: (genre as HTMLInputElement).value,
        npc_count: Number((npcCount as HTMLInputElement).value || "1"),
        notes: (notes as HTMLTextAreaElement).value,
      },
      (validation as HTMLInputElement).checked,
    ),
  );

  return el("section", { class: "start", "data-testid": "start-view" }, [
    el("h1", {}, ["storyloom"]),
    el("p", {}, ["Generate a turn-based narrative and play it, or resume where you left off."]),
    el("div", { class: "row" }, [validation, el("label", { for: "validation-box" }, ["validation system on"])]),
    presetButton,
    el("details", {}, [
      el("summary", {}, ["Or design your own criteria"]),
      genre,
      npcCount,
      notes,
      formButton,
    ]),
  ]);
}

function npcCard(npc: NpcProfile, vm: ViewModel, handlers: Handlers): HTMLElement {
  const pieces: (Node | string)[] = [
    el("h3", {}, [npc.name]),
    el("p", { class: "npc-role" }, [npc.occupation ? `${npc.occupation} (${npc.role})` : npc.role]),
  ];
  if (npc.reason_for_suspicion) {
    pieces.push(el("p", { class: "suspicion" }, [`Reason for suspicion: ${npc.reason_for_suspicion}`]));
  }
  if (vm.showPersonalities) {
    const traits = BIG5_TRAITS.map((trait) => {
      const label = trait.charAt(0).toUpperCase() + trait.slice(1);
      return el("li", { "data-testid": "trait-line" }, [`${label}: ${npc.big5[trait]}%`]);
    });
    pieces.push(el("ul", { class: "traits" }, traits));
  }
  const talk = el("button", { "data-testid": `talk-${npc.id}` }, [
    vm.selectedNpc === npc.id ? "Talking to them" : `Talk to ${npc.name}`,
  ]);
  talk.addEventListener("click", () => handlers.onSelectNpc(vm.selectedNpc === npc.id ? null : npc.id));
  pieces.push(talk);
  const selected = vm.selectedNpc === npc.id ? " selected" : "";
  return el("article", { class: `npc-card${selected}`, "data-testid": "npc-card", "data-npc": npc.id }, pieces);
}

function gameView(vm: ViewModel, handlers: Handlers): HTMLElement {
  const session = vm.session!;
  const definition = session.definition;

  const validationToggle = el("input", { type: "checkbox", "data-testid": "validation-toggle" });
  (validationToggle as HTMLInputElement).checked = session.validation.enabled;
  validationToggle.addEventListener("change", () =>
    handlers.onToggleValidation((validationToggle as HTMLInputElement).checked),
  );

  const personalityToggle = el("input", { type: "checkbox", "data-testid": "personality-toggle" });
  (personalityToggle as HTMLInputElement).checked = vm.showPersonalities;
  personalityToggle.addEventListener("change", () =>
    handlers.onTogglePersonalities((personalityToggle as HTMLInputElement).checked),
  );

  const leave = el("button", { "data-testid": "leave-session", class: "dismiss" }, ["New game"]);
  leave.addEventListener("click", () => handlers.onLeaveSession());

  const header = el("header", {}, [
    el("div", {}, [
      el("h1", {}, [definition.setting.location]),
      el("p", { class: "subtitle" }, [definition.setting.time_period]),
    ]),
    el("div", { class: "toggles" }, [
      el("label", {}, [validationToggle, " validation"]),
      el("label", {}, [personalityToggle, " show personalities"]),
      leave,
    ]),
  ]);

  const briefing = el("section", { class: "briefing", "data-testid": "briefing" }, [
    el("h2", {}, ["Case Briefing"]),
    el("p", {}, [definition.setting.setting_description]),
    el("p", { class: "persona" }, [
      `You are ${definition.player.name}, ${definition.player.role}. ${definition.player.background}`,
    ]),
  ]);

  const beats = el(
    "ol",
    { class: "beats", "data-testid": "beats" },
    definition.beats.map((beat) =>
      el("li", { class: `beat ${beat.status}`, "data-testid": `beat-${beat.id}` }, [
        `${beat.description} [${beat.status}]`,
      ]),
    ),
  );

  const suspects = el("section", { class: "suspects" }, [
    el("h2", {}, ["Suspects"]),
    el(
      "div",
      { class: "cards" },
      definition.npcs.map((npc) => npcCard(npc, vm, handlers)),
    ),
  ]);

  const log = el(
    "section",
    { class: "log", "data-testid": "log" },
    vm.transcript.map((entry) => {
      const who = entry.speaker === "player" ? "You" : entry.speaker.replace("npc:", "");
      const line = el("div", { class: `entry ${entry.speaker === "player" ? "player" : "response"}` }, [
        el("span", { class: "who" }, [who]),
      ]);
      if (entry.was_corrected) {
        line.append(el("span", { class: "badge corrected", "data-testid": "correction-badge" }, ["corrected"]));
      }
      line.append(el("p", {}, [entry.text]));
      return line;
    }),
  );
  for (const notice of vm.noticedTransitions) {
    log.append(el("div", { class: "entry notice", "data-testid": "beat-notice" }, [notice]));
  }
  if (session.narrative_complete) {
    log.append(el("div", { class: "entry notice" }, ["The narrative is complete."]));
  }

  const mechanics = el(
    "div",
    { class: "mechanics" },
    definition.mechanics.map((mechanic) => {
      const button = el("button", { "data-testid": "mechanic-button", "data-action": mechanic.id }, [
        mechanic.label,
      ]);
      (button as HTMLButtonElement).disabled = vm.turnInFlight;
      button.addEventListener("click", () => handlers.onMechanic(mechanic.id));
      return button;
    }),
  );

  const suggestions = el(
    "div",
    { class: "suggestions" },
    session.suggested_actions.map((text, index) => {
      const button = el("button", { "data-testid": "suggestion-button" }, [`${index + 1}. ${text}`]);
      (button as HTMLButtonElement).disabled = vm.turnInFlight;
      button.addEventListener("click", () => handlers.onSuggestion(index));
      return button;
    }),
  );

  // The free-form box is present on every playable screen, no exceptions.
  const textInput = el("input", {
    "data-testid": "free-text-input",
    placeholder: vm.selectedNpc ? `Say something to ${vm.selectedNpc}...` : "Or type your own action...",
  }) as HTMLInputElement;
  textInput.value = vm.draftText;
  textInput.disabled = vm.turnInFlight;
  textInput.addEventListener("input", () => {
    vm.draftText = textInput.value;
  });
  const send = el("button", { "data-testid": "send-button", class: "primary" }, [
    vm.turnInFlight ? "Waiting..." : "Send",
  ]) as HTMLButtonElement;
  send.disabled = vm.turnInFlight;
  const submit = () => {
    if (textInput.value.trim()) handlers.onFreeText(textInput.value.trim());
  };
  send.addEventListener("click", submit);
  textInput.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") submit();
  });

  const controls = el("section", { class: "controls" }, [
    mechanics,
    suggestions,
    el("div", { class: "freeform" }, [textInput, send]),
  ]);

  return el("main", { "data-testid": "game-view" }, [header, briefing, beats, suspects, log, controls]);
}

export function render(root: HTMLElement, vm: ViewModel, handlers: Handlers): void {
  root.textContent = "";
  const banner = bannerView(vm, handlers);
  if (banner) root.append(banner);
  root.append(vm.session ? gameView(vm, handlers) : startView(handlers));
}
