// Controller: wires user intents to the API and re-renders from the
// resulting server snapshots. One request in flight at a time; inputs are
// disabled while a turn is pending.

import { ApiError, GameApi } from "./api.js";
import { PRESET_CRITERIA } from "./preset.js";
import { applySnapshot, describeTransitions, initialViewModel, type ViewModel } from "./state.js";
import type { DesignerCriteria, PlayerInput } from "./types.js";
import { render, type Handlers } from "./ui.js";

const SESSION_KEY = "storyloom.session_id";

export function resolveBaseUrl(win: Window): string {
  const fromQuery = new URLSearchParams(win.location.search).get("server");
  if (fromQuery) return fromQuery.replace(/\/$/, "");
  if (win.location.origin && win.location.origin !== "null" && !win.location.origin.startsWith("file:")) {
    return win.location.origin;
  }
  return "http://127.0.0.1:8000";
}

export class App {
  vm: ViewModel = initialViewModel();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: GameApi,
    private readonly storage: Storage,
  ) {}

  paint(): void {
    render(this.root, this.vm, this.handlers());
  }

  private setBanner(kind: "error" | "info", message: string, retryable = false): void {
    this.vm = { ...this.vm, banner: { kind, message, retryable } };
    this.paint();
  }

  async boot(): Promise<void> {
    this.paint();
    const saved = this.storage.getItem(SESSION_KEY);
    if (saved) {
      try {
        await this.refresh(saved);
        return;
      } catch {
        this.storage.removeItem(SESSION_KEY); // stale session id
      }
    }
    this.vm = { ...this.vm, connection: "ready" };
    this.paint();
  }

  /** Re-fetch the authoritative state; the view derives from nothing else. */
  async refresh(sessionId: string, notices: string[] = []): Promise<void> {
    const [session, transcript] = await Promise.all([
      this.api.getSession(sessionId),
      this.api.getTranscript(sessionId),
    ]);
    this.vm = { ...applySnapshot(this.vm, session, transcript.transcript), noticedTransitions: notices };
    this.paint();
  }

  private async createSession(criteria: DesignerCriteria, validationEnabled: boolean): Promise<void> {
    this.vm = { ...this.vm, banner: null, turnInFlight: true };
    this.paint();
    try {
      const created = await this.api.createSession(criteria, validationEnabled);
      this.storage.setItem(SESSION_KEY, created.session_id);
      this.vm = { ...this.vm, turnInFlight: false };
      await this.refresh(created.session_id);
    } catch (err) {
      this.vm = { ...this.vm, turnInFlight: false, session: null };
      if (err instanceof ApiError && err.status === 422) {
        this.setBanner("error", `The criteria were rejected: ${err.message}`);
      } else if (err instanceof ApiError && err.status === 0) {
        this.setBanner("error", "The server is unreachable.");
      } else {
        this.setBanner("error", `Could not start the game: ${(err as Error).message}`);
      }
    }
  }

  private async submitTurn(input: PlayerInput): Promise<void> {
    const session = this.vm.session;
    if (!session || this.vm.turnInFlight) return;
    this.vm = { ...this.vm, turnInFlight: true, banner: null, failedInput: null };
    this.paint();
    try {
      const turn = await this.api.postTurn(session.session_id, input);
      this.vm = { ...this.vm, turnInFlight: false, draftText: "" };
      await this.refresh(session.session_id, describeTransitions(turn.beat_transitions));
    } catch (err) {
      this.vm = { ...this.vm, turnInFlight: false };
      if (err instanceof ApiError && err.status === 409) {
        // Keep the draft; the other turn will finish.
        this.setBanner("info", "A turn is already in progress; hold on.");
      } else if (err instanceof ApiError && err.status === 502) {
        this.vm = { ...this.vm, failedInput: input };
        this.setBanner("error", "The storyteller is unavailable; try the same move again.", true);
      } else {
        this.setBanner("error", (err as Error).message);
      }
    }
  }

  private handlers(): Handlers {
    return {
      onStartPreset: (validationEnabled) => void this.createSession(PRESET_CRITERIA, validationEnabled),
      onStartForm: (form, validationEnabled) =>
        void this.createSession(
          { genre: form.genre, npc_count: form.npc_count, notes: form.notes, mechanics: [] },
          validationEnabled,
        ),
      onMechanic: (actionId) =>
        void this.submitTurn({ kind: "action", action_id: actionId, target_npc: this.vm.selectedNpc }),
      onSuggestion: (index) =>
        void this.submitTurn({ kind: "suggested", suggestion_index: index, target_npc: this.vm.selectedNpc }),
      onFreeText: (text) =>
        void this.submitTurn({ kind: "free_text", text, target_npc: this.vm.selectedNpc }),
      onSelectNpc: (npcId) => {
        this.vm = { ...this.vm, selectedNpc: npcId };
        this.paint();
      },
      onToggleValidation: (enabled) => void this.toggleValidation(enabled),
      onTogglePersonalities: (show) => {
        this.vm = { ...this.vm, showPersonalities: show };
        this.paint();
      },
      onDismissBanner: () => {
        this.vm = { ...this.vm, banner: null };
        this.paint();
      },
      onRetry: () => {
        const failed = this.vm.failedInput;
        if (failed) void this.submitTurn(failed);
      },
      onLeaveSession: () => {
        this.storage.removeItem(SESSION_KEY);
        this.vm = { ...initialViewModel(), connection: "ready" };
        this.paint();
      },
    };
  }

  private async toggleValidation(enabled: boolean): Promise<void> {
    const session = this.vm.session;
    if (!session) return;
    try {
      await this.api.setValidation(session.session_id, enabled);
    } catch (err) {
      this.setBanner("error", (err as Error).message);
    }
    // Round-trip: the toggle's displayed state is whatever the server says.
    await this.refresh(session.session_id);
  }
}

export function mount(win: Window, root: HTMLElement): App {
  const api = new GameApi(resolveBaseUrl(win));
  const app = new App(root, api, win.localStorage);
  void app.boot();
  return app;
}

declare const window: Window & { __storyloomTest?: boolean };
if (typeof window !== "undefined" && typeof document !== "undefined" && !window.__storyloomTest) {
  const root = document.getElementById("app");
  if (root) mount(window, root);
}
