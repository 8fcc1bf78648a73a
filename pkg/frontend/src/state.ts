// Client view model. Everything narrative is a verbatim copy of the last
// server snapshot; the only client-owned state is UI chrome (banner,
// in-flight flag, toggles, the retry slot).

import type { PlayerInput, SessionState, TranscriptEntry } from "./types.js";

export interface Banner {
  kind: "error" | "info";
  message: string;
  retryable: boolean;
}

export interface ViewModel {
  connection: "idle" | "ready" | "down";
  session: SessionState | null;
  transcript: TranscriptEntry[];
  turnInFlight: boolean;
  banner: Banner | null;
  showPersonalities: boolean;
  selectedNpc: string | null;
  draftText: string;
  failedInput: PlayerInput | null;
  noticedTransitions: string[];
}

export function initialViewModel(): ViewModel {
  return {
    connection: "idle",
    session: null,
    transcript: [],
    turnInFlight: false,
    banner: null,
    showPersonalities: true,
    selectedNpc: null,
    draftText: "",
    failedInput: null,
    noticedTransitions: [],
  };
}

export function applySnapshot(
  vm: ViewModel,
  session: SessionState,
  transcript: TranscriptEntry[],
): ViewModel {
  return { ...vm, connection: "ready", session, transcript };
}

export function describeTransitions(transitions: { beat_id: string; new_status: string }[]): string[] {
  return transitions.map((t) =>
    t.new_status === "complete" ? `Beat ${t.beat_id} completed` : `Beat ${t.beat_id} is now active`,
  );
}
