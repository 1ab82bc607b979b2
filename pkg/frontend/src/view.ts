// DOM wiring: renders UiState, routes user input to the gateway, and
// follows the event stream. No framework; every element the tests need
// carries a stable data-testid.

import { ApiError, GatewayApi } from "./api.js";
import { EventStream, WebSocketFactory } from "./events.js";
import { MicUnavailableError, PushToTalkRecorder, RecordingHandle } from "./recorder.js";
import {
  UiState,
  UiEvent,
  canRecord,
  canTypeQuestion,
  initialState,
  statusChip,
  transition,
} from "./stateMachine.js";
import type { EventFrame, PersonaSummary, TranscriptTurn } from "./protocol.js";

export interface ConsoleDeps {
  api: GatewayApi;
  wsBaseUrl: string;
  makeSocket: WebSocketFactory;
  recorder?: PushToTalkRecorder | null;
}

const CROSSFADE_MS = 250;

export class ConsoleApp {
  state: UiState = initialState();
  transcript: TranscriptTurn[] = [];
  personas: PersonaSummary[] = [];

  private stream: EventStream | null = null;
  private recording: RecordingHandle | null = null;
  private idleVideoUrl = "";
  private doc: Document;

  constructor(private root: HTMLElement, private deps: ConsoleDeps) {
    this.doc = root.ownerDocument;
    this.buildSkeleton();
  }

  // -- bootstrap -------------------------------------------------------------

  async start(): Promise<void> {
    this.personas = await this.deps.api.listPersonas();
    this.render();
  }

  dispatch(event: UiEvent): void {
    this.state = transition(this.state, event);
    this.render();
  }

  private $(testId: string): HTMLElement {
    const el = this.root.querySelector(`[data-testid="${testId}"]`);
    if (!el) throw new Error(`missing element ${testId}`);
    return el as HTMLElement;
  }

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <section data-testid="chooser" class="chooser">
        <h1>Choose a patient</h1>
        <div data-testid="persona-list" class="persona-list"></div>
      </section>
      <section data-testid="encounter" class="encounter hidden">
        <div class="stage-area">
          <div data-testid="idle-media" class="idle-media"></div>
          <div data-testid="clip-slot" class="clip-slot"></div>
          <div data-testid="status-chip" class="status-chip hidden"></div>
          <div data-testid="error-banner" class="error-banner hidden"></div>
          <div data-testid="text-only-banner" class="notice hidden">
            Text-only deployment: type your question below.
          </div>
          <div data-testid="mic-fallback-notice" class="notice hidden">
            Microphone unavailable: type your question instead.
          </div>
        </div>
        <div class="controls">
          <button data-testid="ptt-button" class="ptt">Hold to talk</button>
          <form data-testid="text-form" class="text-form">
            <input data-testid="text-input" type="text"
                   placeholder="Type your question" autocomplete="off" />
            <button data-testid="text-send" type="submit">Send</button>
          </form>
        </div>
        <aside data-testid="transcript" class="transcript"></aside>
      </section>
    `;
    this.wireControls();
  }

  private wireControls(): void {
    const ptt = this.$("ptt-button") as HTMLButtonElement;
    ptt.addEventListener("pointerdown", () => void this.startRecording());
    ptt.addEventListener("pointerup", () => this.finishRecording());
    ptt.addEventListener("pointerleave", () => this.cancelRecording());

    const form = this.$("text-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const input = this.$("text-input") as HTMLInputElement;
      const text = input.value.trim();
      if (!text || !canTypeQuestion(this.state)) return;
      input.value = "";
      void this.submitText(text);
    });

    this.$("error-banner").addEventListener("click", () =>
      this.dispatch({ type: "dismiss_error" }),
    );
  }

  // -- persona selection ----------------------------------------------------------

  async selectPersona(personaId: string): Promise<void> {
    const session = await this.deps.api.createSession(personaId);
    this.idleVideoUrl = session.idle_video_url
      ? this.deps.api.mediaUrl(session.idle_video_url)
      : "";
    this.transcript = [];
    this.dispatch({
      type: "session_created",
      sessionId: session.session_id,
      textOnly: session.text_only,
    });
    this.mountIdleMedia();
    this.renderTranscript();
    this.stream = new EventStream({
      wsBaseUrl: this.deps.wsBaseUrl,
      sessionId: session.session_id,
      makeSocket: this.deps.makeSocket,
      onFrame: (frame) => void this.handleFrame(frame),
    });
    this.stream.connect();
  }

  // -- turns -------------------------------------------------------------------------

  async submitText(text: string): Promise<void> {
    if (!this.state.sessionId) return;
    this.dispatch({ type: "submitted" });
    try {
      await this.deps.api.submitTextTurn(this.state.sessionId, text);
    } catch (err) {
      this.dispatch({
        type: "submit_rejected",
        code: err instanceof ApiError ? err.code : "internal",
      });
    }
  }

  private async submitAudio(wav: Blob): Promise<void> {
    if (!this.state.sessionId) return;
    this.dispatch({ type: "submitted" });
    try {
      await this.deps.api.submitAudioTurn(this.state.sessionId, wav);
    } catch (err) {
      this.dispatch({
        type: "submit_rejected",
        code: err instanceof ApiError ? err.code : "internal",
      });
    }
  }

  /** Recorder auto-stop path: a 60 s hold submits on its own. */
  autoSubmitAudio(wav: Blob): void {
    this.recording = null;
    void this.submitAudio(wav);
  }

  private async startRecording(): Promise<void> {
    if (!canRecord(this.state) || !this.deps.recorder) {
      if (!this.deps.recorder) this.dispatch({ type: "mic_unavailable" });
      return;
    }
    this.dispatch({ type: "record_start", at: Date.now() });
    try {
      this.recording = await this.deps.recorder.start();
    } catch (err) {
      this.recording = null;
      if (err instanceof MicUnavailableError) {
        this.dispatch({ type: "mic_unavailable" });
      } else {
        this.dispatch({ type: "submit_rejected", code: "internal" });
      }
    }
  }

  private finishRecording(): void {
    if (this.state.phase.kind !== "recording" || !this.recording) return;
    const wav = this.recording.stop();
    this.recording = null;
    void this.submitAudio(wav);
  }

  private cancelRecording(): void {
    if (this.state.phase.kind !== "recording") return;
    this.recording?.cancel();
    this.recording = null;
    this.dispatch({ type: "record_cancel" });
  }

  // -- events ------------------------------------------------------------------------

  async handleFrame(frame: EventFrame): Promise<void> {
    this.dispatch({ type: "frame", frame });
    if (frame.stage === "ready" || frame.stage === "failed") {
      await this.refreshTranscript();
    }
    if (frame.stage === "ready" && frame.clip_url) {
      this.playClip(this.deps.api.mediaUrl(frame.clip_url));
    }
  }

  async refreshTranscript(): Promise<void> {
    if (!this.state.sessionId) return;
    const transcript = await this.deps.api.getTranscript(this.state.sessionId);
    this.transcript = transcript.turns;
    this.renderTranscript();
  }

  // -- media ------------------------------------------------------------------------

  private mountIdleMedia(): void {
    const slot = this.$("idle-media");
    slot.innerHTML = "";
    if (!this.idleVideoUrl) {
      slot.appendChild(this.posterCard());
      return;
    }
    const video = this.doc.createElement("video");
    video.src = this.idleVideoUrl;
    video.muted = true;
    video.loop = true;
    video.autoplay = true;
    video.setAttribute("playsinline", "");
    video.dataset.testid = "idle-video";
    // placeholder fixture assets are not decodable video: show a poster card
    video.addEventListener("error", () => {
      slot.innerHTML = "";
      slot.appendChild(this.posterCard());
    });
    slot.appendChild(video);
    void (video.play?.() as Promise<void> | undefined)?.catch(() => {});
  }

  private posterCard(): HTMLElement {
    const poster = this.doc.createElement("div");
    poster.className = "poster";
    poster.dataset.testid = "poster";
    poster.textContent = "Patient is waiting…";
    return poster;
  }

  private playClip(url: string): void {
    const slot = this.$("clip-slot");
    slot.innerHTML = "";
    const clip = this.doc.createElement("video");
    clip.src = url;
    clip.autoplay = true;
    clip.dataset.testid = "clip-player";
    clip.className = "clip";
    clip.addEventListener("ended", () => {
      this.dispatch({ type: "clip_ended" });
      setTimeout(() => {
        if (this.state.phase.kind !== "playing_clip") slot.innerHTML = "";
      }, CROSSFADE_MS);
    });
    clip.addEventListener("error", () => {
      // undecodable media: surface the turn as done rather than freezing
      this.dispatch({ type: "clip_ended" });
      slot.innerHTML = "";
    });
    slot.appendChild(clip);
    void (clip.play?.() as Promise<void> | undefined)?.catch(() => {});
  }

  // -- rendering ------------------------------------------------------------------------

  render(): void {
    const choosing = this.state.phase.kind === "choosing_persona";
    this.$("chooser").classList.toggle("hidden", !choosing);
    this.$("encounter").classList.toggle("hidden", choosing);
    if (choosing) this.renderPersonaList();

    const chip = this.$("status-chip");
    const label = statusChip(this.state);
    chip.textContent = label;
    chip.classList.toggle("hidden", label === "");

    const banner = this.$("error-banner");
    if (this.state.phase.kind === "error") {
      banner.textContent = `Something went wrong: ${this.state.phase.code} (tap to dismiss)`;
      banner.classList.remove("hidden");
    } else {
      banner.classList.add("hidden");
    }

    this.$("text-only-banner").classList.toggle("hidden", !this.state.textOnly);
    this.$("mic-fallback-notice").classList.toggle(
      "hidden",
      this.state.micAvailable || this.state.textOnly,
    );

    const ptt = this.$("ptt-button") as HTMLButtonElement;
    const showPtt = !this.state.textOnly && this.state.micAvailable;
    ptt.classList.toggle("hidden", !showPtt);
    ptt.disabled = !canRecord(this.state) && this.state.phase.kind !== "recording";

    const input = this.$("text-input") as HTMLInputElement;
    const send = this.$("text-send") as HTMLButtonElement;
    input.disabled = send.disabled = !canTypeQuestion(this.state);

    const clipSlot = this.$("clip-slot");
    clipSlot.classList.toggle("playing", this.state.phase.kind === "playing_clip");
  }

  private renderPersonaList(): void {
    const list = this.$("persona-list");
    list.innerHTML = "";
    for (const persona of this.personas) {
      const card = this.doc.createElement("button");
      card.className = "persona-card";
      card.dataset.personaId = persona.id;
      card.innerHTML = `<strong></strong><span></span>`;
      (card.querySelector("strong") as HTMLElement).textContent = persona.display_name;
      (card.querySelector("span") as HTMLElement).textContent = persona.scenario_teaser;
      card.addEventListener("click", () => void this.selectPersona(persona.id));
      list.appendChild(card);
    }
  }

  renderTranscript(): void {
    const panel = this.$("transcript");
    panel.innerHTML = "";
    for (const turn of this.transcript) {
      const row = this.doc.createElement("div");
      row.className = "turn-row";
      row.dataset.turnIndex = String(turn.index);
      const learner = this.doc.createElement("p");
      learner.className = "learner-text";
      learner.textContent = turn.user_text;
      row.appendChild(learner);
      if (turn.status === "ok") {
        const patient = this.doc.createElement("p");
        patient.className = "patient-text";
        patient.textContent = turn.patient_text ?? "";
        row.appendChild(patient);
      } else {
        const failed = this.doc.createElement("p");
        failed.className = "turn-failed";
        failed.textContent = `(no response: ${turn.cause})`;
        row.appendChild(failed);
      }
      panel.appendChild(row);
    }
  }
}
