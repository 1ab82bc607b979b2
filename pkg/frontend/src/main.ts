// Browser entry point: same-origin gateway, native WebSocket/mic APIs.

import { GatewayClient } from "./api.js";
import { PushToTalkRecorder } from "./recorder.js";
import { ConsoleApp } from "./view.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app root");

let app: ConsoleApp;

const micSupported =
  "mediaDevices" in navigator &&
  typeof navigator.mediaDevices?.getUserMedia === "function";
const recorder = micSupported
  ? new PushToTalkRecorder((wav) => app.autoSubmitAudio(wav))
  : null;

const wsScheme = location.protocol === "https:" ? "wss:" : "ws:";
app = new ConsoleApp(root, {
  api: new GatewayClient(""),
  wsBaseUrl: `${wsScheme}//${location.host}`,
  makeSocket: (url) => new WebSocket(url),
  recorder,
});

void app.start();
