// Push-to-talk capture: hold to record, release to upload.
//
// Captures Float32 PCM through an AudioContext (MediaRecorder would give
// us opus/webm, but the gateway wants bit-exact 16 kHz PCM16 WAV), then
// downsamples and encodes locally. Recordings longer than MAX_RECORD_MS
// auto-stop and submit.

import { captureToWav } from "./wav.js";

export const MAX_RECORD_MS = 60_000;

export class MicUnavailableError extends Error {}

export interface RecordingHandle {
  stop(): Blob; // finish and encode
  cancel(): void; // discard
}

interface AudioEnvironment {
  getUserMedia(constraints: MediaStreamConstraints): Promise<MediaStream>;
  createContext(): AudioContext;
}

function defaultEnvironment(): AudioEnvironment {
  return {
    getUserMedia: (constraints) => {
      if (!navigator.mediaDevices?.getUserMedia) {
        return Promise.reject(new MicUnavailableError("no microphone API"));
      }
      return navigator.mediaDevices.getUserMedia(constraints);
    },
    createContext: () => new AudioContext(),
  };
}

export class PushToTalkRecorder {
  constructor(
    private onAutoStop: (wav: Blob) => void,
    private env: AudioEnvironment = defaultEnvironment(),
    private maxMs: number = MAX_RECORD_MS,
  ) {}

  async start(): Promise<RecordingHandle> {
    let stream: MediaStream;
    try {
      stream = await this.env.getUserMedia({ audio: true });
    } catch (err) {
      throw err instanceof MicUnavailableError
        ? err
        : new MicUnavailableError(String(err));
    }
    const context = this.env.createContext();
    const source = context.createMediaStreamSource(stream);
    const processor = context.createScriptProcessor(4096, 1, 1);
    const chunks: Float32Array[] = [];
    processor.onaudioprocess = (ev) => {
      chunks.push(new Float32Array(ev.inputBuffer.getChannelData(0)));
    };
    source.connect(processor);
    processor.connect(context.destination);

    let finished = false;
    const cleanup = () => {
      processor.disconnect();
      source.disconnect();
      stream.getTracks().forEach((track) => track.stop());
      void context.close();
    };
    const finish = (): Blob => {
      finished = true;
      clearTimeout(timer);
      cleanup();
      return captureToWav(chunks, context.sampleRate);
    };
    const timer = setTimeout(() => {
      if (!finished) this.onAutoStop(finish());
    }, this.maxMs);

    return {
      stop: () => finish(),
      cancel: () => {
        finished = true;
        clearTimeout(timer);
        cleanup();
      },
    };
  }
}
