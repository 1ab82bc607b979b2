// Console state chart.
//
//   choosing_persona -> idle_loop -> (recording | awaiting) -> playing_clip -> idle_loop
//                                      any -> error -> idle_loop (dismiss)
//
// The reducer is pure so every transition is unit-testable; the view
// only ever renders a UiState.

import type { EventFrame, Stage } from "./protocol.js";

export type Phase =
  | { kind: "choosing_persona" }
  | { kind: "idle_loop" }
  | { kind: "recording"; startedAt: number }
  | { kind: "awaiting"; stage: Stage }
  | { kind: "playing_clip"; clipUrl: string }
  | { kind: "error"; code: string };

export interface UiState {
  phase: Phase;
  sessionId: string | null;
  lastSeq: number;
  textOnly: boolean;
  micAvailable: boolean;
}

export type UiEvent =
  | { type: "session_created"; sessionId: string; textOnly: boolean }
  | { type: "record_start"; at: number }
  | { type: "record_cancel" }
  | { type: "submitted" }
  | { type: "frame"; frame: EventFrame }
  | { type: "clip_ended" }
  | { type: "submit_rejected"; code: string }
  | { type: "mic_unavailable" }
  | { type: "dismiss_error" }
  | { type: "session_closed" };

// Human phrasing of pipeline stages; part of the UI contract.
export const STAGE_LABELS: Record<Stage, string> = {
  received: "Sending…",
  transcribing: "Listening…",
  thinking: "Thinking…",
  synthesizing: "Responding…",
  rendering: "Responding…",
  ready: "",
  failed: "",
};

export function initialState(): UiState {
  return {
    phase: { kind: "choosing_persona" },
    sessionId: null,
    lastSeq: 0,
    textOnly: false,
    micAvailable: true,
  };
}

export function transition(state: UiState, event: UiEvent): UiState {
  switch (event.type) {
    case "session_created":
      return {
        ...state,
        phase: { kind: "idle_loop" },
        sessionId: event.sessionId,
        lastSeq: 0,
        textOnly: event.textOnly,
      };

    case "record_start":
      if (state.phase.kind !== "idle_loop" || state.textOnly || !state.micAvailable)
        return state;
      return { ...state, phase: { kind: "recording", startedAt: event.at } };

    case "record_cancel":
      if (state.phase.kind !== "recording") return state;
      return { ...state, phase: { kind: "idle_loop" } };

    case "submitted":
      if (state.phase.kind !== "idle_loop" && state.phase.kind !== "recording")
        return state;
      return { ...state, phase: { kind: "awaiting", stage: "received" } };

    case "frame": {
      const frame = event.frame;
      const next = { ...state, lastSeq: Math.max(state.lastSeq, frame.seq) };
      if (frame.stage === "ready") {
        return { ...next, phase: { kind: "playing_clip", clipUrl: frame.clip_url ?? "" } };
      }
      if (frame.stage === "failed") {
        return { ...next, phase: { kind: "error", code: frame.detail ?? "internal" } };
      }
      if (state.phase.kind === "awaiting" || state.phase.kind === "idle_loop") {
        return { ...next, phase: { kind: "awaiting", stage: frame.stage } };
      }
      return next;
    }

    case "clip_ended":
      if (state.phase.kind !== "playing_clip") return state;
      return { ...state, phase: { kind: "idle_loop" } };

    case "submit_rejected":
      // 409 means the patient is still responding: stay in the awaiting view
      if (event.code === "session_busy" && state.phase.kind === "awaiting") return state;
      return { ...state, phase: { kind: "error", code: event.code } };

    case "mic_unavailable":
      return {
        ...state,
        micAvailable: false,
        phase: state.phase.kind === "recording" ? { kind: "idle_loop" } : state.phase,
      };

    case "dismiss_error":
      if (state.phase.kind !== "error") return state;
      return { ...state, phase: { kind: "idle_loop" } };

    case "session_closed":
      return { ...initialState(), micAvailable: state.micAvailable };
  }
}

// Affordance helpers: the record button and the "responding" chip must
// never show at the same time.
export function canRecord(state: UiState): boolean {
  return (
    state.phase.kind === "idle_loop" && !state.textOnly && state.micAvailable
  );
}

export function canTypeQuestion(state: UiState): boolean {
  return state.phase.kind === "idle_loop";
}

export function statusChip(state: UiState): string {
  switch (state.phase.kind) {
    case "recording":
      return "Recording… release to send";
    case "awaiting":
      return STAGE_LABELS[state.phase.stage] || "Working…";
    case "playing_clip":
      return "";
    default:
      return "";
  }
}
