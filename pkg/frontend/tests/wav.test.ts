import { describe, expect, it } from "vitest";

import {
  TARGET_SAMPLE_RATE,
  captureToWav,
  encodeWavPcm16,
  floatToPcm16,
  resampleLinear,
} from "../src/wav.js";

// Independent header reader: pulls the fields straight off the RIFF spec
// offsets instead of reusing the encoder's layout code.
function readWavHeader(buffer: ArrayBuffer) {
  const view = new DataView(buffer);
  const ascii = (offset: number, n: number) =>
    String.fromCharCode(...new Uint8Array(buffer, offset, n));
  return {
    riff: ascii(0, 4),
    wave: ascii(8, 4),
    fmt: ascii(12, 4),
    audioFormat: view.getUint16(20, true),
    channels: view.getUint16(22, true),
    sampleRate: view.getUint32(24, true),
    byteRate: view.getUint32(28, true),
    blockAlign: view.getUint16(32, true),
    bitsPerSample: view.getUint16(34, true),
    dataTag: ascii(36, 4),
    dataBytes: view.getUint32(40, true),
  };
}

describe("encodeWavPcm16", () => {
  it("writes a canonical 16kHz mono PCM16 header", () => {
    const wav = encodeWavPcm16(new Float32Array(1600));
    const header = readWavHeader(wav);
    expect(header.riff).toBe("RIFF");
    expect(header.wave).toBe("WAVE");
    expect(header.fmt).toBe("fmt ");
    expect(header.audioFormat).toBe(1);
    expect(header.channels).toBe(1);
    expect(header.sampleRate).toBe(16000);
    expect(header.byteRate).toBe(32000);
    expect(header.blockAlign).toBe(2);
    expect(header.bitsPerSample).toBe(16);
    expect(header.dataTag).toBe("data");
    expect(header.dataBytes).toBe(3200);
    expect(wav.byteLength).toBe(44 + 3200);
  });

  it("encodes samples little-endian in order", () => {
    const wav = encodeWavPcm16(new Float32Array([0, 0.5, -0.5, 1, -1]));
    const view = new DataView(wav);
    const samples = [0, 1, 2, 3, 4].map((i) => view.getInt16(44 + i * 2, true));
    expect(samples).toEqual([0, 16384, -16384, 32767, -32768]);
  });
});

describe("floatToPcm16", () => {
  it.each([
    [0, 0],
    [1, 32767],
    [-1, -32768],
    [0.5, 16384],
    [-0.5, -16384],
    [2, 32767], // clamps
    [-2, -32768],
  ])("maps %f to %i", (input, expected) => {
    expect(floatToPcm16(input)).toBe(expected);
  });
});

describe("resampleLinear", () => {
  it("halves sample count with interpolation", () => {
    // classic 8 -> 4 halving: every other interpolated value
    const input = new Float32Array([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
    const out = resampleLinear(input, 8, 4);
    expect(Array.from(out).map((v) => Math.round(v * 10) / 10)).toEqual([
      0.0, 0.2, 0.4, 0.6,
    ]);
  });

  it("matches an independent interpolation oracle", () => {
    const input = new Float32Array(480);
    for (let i = 0; i < input.length; i++) input[i] = Math.sin(i / 7);
    const out = resampleLinear(input, 48000, 16000);
    const step = 48000 / 16000;
    for (let i = 0; i < out.length; i++) {
      const pos = i * step;
      const idx = Math.floor(pos);
      const frac = pos - idx;
      const a = input[Math.min(idx, input.length - 1)];
      const b = input[Math.min(idx + 1, input.length - 1)];
      expect(out[i]).toBeCloseTo(a + (b - a) * frac, 6);
    }
  });

  it("passes through when rates match", () => {
    const input = new Float32Array([0.1, 0.2]);
    expect(resampleLinear(input, 16000, 16000)).toBe(input);
  });
});

describe("captureToWav", () => {
  it("joins chunks, resamples to 16k, and wraps in WAV", () => {
    const chunkA = new Float32Array(48000).fill(0.25); // 1 s at 48 kHz
    const chunkB = new Float32Array(24000).fill(-0.25); // 0.5 s
    const blob = captureToWav([chunkA, chunkB], 48000);
    expect(blob.type).toBe("audio/wav");
    // 1.5 s at 16 kHz -> 24000 samples -> 48000 data bytes + 44 header
    expect(blob.size).toBe(44 + 1.5 * TARGET_SAMPLE_RATE * 2);
  });
});
