// Wire types for the telesim gateway (see docs/protocol.md in the repo root).

export interface PersonaSummary {
  id: string;
  display_name: string;
  scenario_teaser: string;
}

export interface SessionDescriptor {
  session_id: string;
  persona: PersonaSummary;
  state: "idle" | "processing" | "closed";
  created_at: string;
  turn_count: number;
  text_only: boolean;
  idle_video_url?: string;
}

export type Stage =
  | "received"
  | "transcribing"
  | "thinking"
  | "synthesizing"
  | "rendering"
  | "ready"
  | "failed";

export interface EventFrame {
  session_id: string;
  seq: number;
  job_id: string;
  turn_index: number;
  stage: Stage;
  at_monotonic: number;
  at_wall: string;
  detail: string | null;
  clip_url?: string;
}

export interface TurnTimings {
  transcribe_ms: number | null;
  dialogue_ms: number;
  synthesize_ms: number;
  render_ms: number;
  render_skipped: boolean;
  total_ms: number;
  overhead_ms: number;
}

export interface TranscriptTurn {
  index: number;
  status: "ok" | "failed";
  user_text: string;
  patient_text: string | null;
  clip_id: string | null;
  clip_url?: string;
  timings: TurnTimings | null;
  cause: string | null;
}

export interface Transcript {
  session_id: string;
  turns: TranscriptTurn[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
