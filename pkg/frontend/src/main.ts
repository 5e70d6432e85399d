/**
 * Bootstrap: pick a session (from ?session=, or a picker over GET /sessions),
 * wire up the controller/view, and keep flushing staged judgments in the
 * background so reconnects converge.
 */

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { OfflineQueue } from "./queue.js";
import { SessionView } from "./view.js";

const FLUSH_INTERVAL_MS = 5000;

function serviceBaseUrl(): string {
  // served from the service itself at /ui/, so the API lives at the origin
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? window.location.origin;
}

async function pickSession(api: ApiClient, root: HTMLElement): Promise<string> {
  const params = new URLSearchParams(window.location.search);
  const fromUrl = params.get("session");
  if (fromUrl) return fromUrl;
  const sessions = await api.listSessions();
  if (sessions.length === 1) return sessions[0].session_id;
  return new Promise((resolve) => {
    root.innerHTML = "";
    const box = document.createElement("section");
    box.className = "picker";
    const heading = document.createElement("h1");
    heading.textContent = "Pick a review session";
    box.append(heading);
    for (const session of sessions) {
      const button = document.createElement("button");
      button.textContent = `${session.session_id} (${session.system}, ${session.size} candidates)`;
      button.addEventListener("click", () => resolve(session.session_id));
      box.append(button);
    }
    if (sessions.length === 0) {
      const note = document.createElement("p");
      note.textContent = "No sessions yet — create one via POST /sessions or `awekws serve --awe-session`.";
      box.append(note);
    }
    root.append(box);
  });
}

async function start(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const api = new ApiClient(serviceBaseUrl());
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator") ?? "moderator";
  const controller = new SessionController(api, new OfflineQueue(window.localStorage), annotator);
  const sessionId = await pickSession(api, root);
  await controller.load(sessionId);
  new SessionView(root, controller, api).mount();
  window.addEventListener("online", () => void controller.flush());
  setInterval(() => {
    if (controller.stagedCount() > 0) void controller.flush();
  }, FLUSH_INTERVAL_MS);
}

void start().catch((error) => {
  const root = document.getElementById("app");
  if (root) {
    root.innerHTML = `<p class="error">Failed to start: ${String(error)}</p>`;
  }
});
