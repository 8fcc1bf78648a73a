// Wire types mirroring the server's JSON (snake_case, field-for-field).

export interface Big5 {
  openness: number;
  conscientiousness: number;
  extroversion: number;
  agreeableness: number;
  neuroticism: number;
}

export const BIG5_TRAITS = [
  "openness",
  "conscientiousness",
  "extroversion",
  "agreeableness",
  "neuroticism",
] as const;

export interface Rule {
  id: string;
  text: string;
}

export interface NarrativeSetting {
  location: string;
  time_period: string;
  setting_description: string;
}

export interface PlayerPersona {
  name: string;
  role: string;
  background: string;
  attributes: string[];
}

export interface NpcProfile {
  id: string;
  name: string;
  background: string;
  big5: Big5;
  role: string;
  occupation: string | null;
  reason_for_suspicion: string | null;
}

export interface NarrativeBeat {
  id: string;
  ordinal: number;
  description: string;
  completion_criteria: string;
  status: "pending" | "active" | "complete";
}

export interface DesignerMechanic {
  id: string;
  label: string;
  template_id: string;
}

export interface GameDefinition {
  rules: Rule[];
  setting: NarrativeSetting;
  player: PlayerPersona;
  npcs: NpcProfile[];
  beats: NarrativeBeat[];
  mechanics: DesignerMechanic[];
}

export interface ValidationState {
  enabled: boolean;
  judge_retries: number;
  on_judge_failure: string;
}

export interface SessionState {
  session_id: string;
  definition: GameDefinition;
  turn_index: number;
  validation: ValidationState;
  active_beat_id: string | null;
  narrative_complete: boolean;
  suggested_actions: string[];
}

export interface TranscriptEntry {
  turn_index: number;
  speaker: string;
  text: string;
  was_corrected: boolean;
}

export interface BeatTransition {
  beat_id: string;
  old_status: string;
  new_status: string;
}

export interface TurnResponse {
  text: string;
  speaker: string;
  suggested_actions: string[];
  was_corrected: boolean;
  beat_transitions: BeatTransition[];
}

export type PlayerInput =
  | { kind: "free_text"; text: string; target_npc?: string | null }
  | { kind: "action"; action_id: string; target_npc?: string | null }
  | { kind: "suggested"; suggestion_index: number; target_npc?: string | null };

export interface DesignerCriteria {
  genre: string;
  location_hint?: string;
  time_period_hint?: string;
  tone?: string;
  player_role_hint?: string;
  npc_count: number;
  mechanics?: DesignerMechanic[];
  notes?: string;
}
