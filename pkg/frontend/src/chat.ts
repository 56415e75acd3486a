/** Chat panel: every rendered message originates from the server.
 *
 * After each turn the controller re-fetches the session transcript and
 * renders that verbatim, so the view is a pure mirror of server state
 * (no client-side message synthesis).
 */

import { ApiClient, ApiError } from "./api";
import type { TranscriptEntry, TurnResult } from "./types";

export interface ChatState {
  sessionId: string | null;
  transcript: TranscriptEntry[];
  closed: boolean;
  lastFallback: boolean;
  error: string | null;
  pendingText: string | null;
}

export class ChatController {
  state: ChatState = {
    sessionId: null,
    transcript: [],
    closed: false,
    lastFallback: false,
    error: null,
    pendingText: null,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: ChatState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  async start(): Promise<void> {
    const opened = await this.api.openSession();
    this.state = {
      sessionId: opened.session_id,
      transcript: [],
      closed: false,
      lastFallback: false,
      error: null,
      pendingText: null,
    };
    this.emit();
  }

  /** Restore an existing session (page reload): transcript comes from GET. */
  async resume(sessionId: string): Promise<void> {
    const view = await this.api.getSession(sessionId);
    this.state = {
      sessionId: view.session_id,
      transcript: view.transcript,
      closed: view.closed,
      lastFallback: false,
      error: null,
      pendingText: null,
    };
    this.emit();
  }

  async send(text: string): Promise<TurnResult | null> {
    if (!this.state.sessionId || this.state.closed) return null;
    this.state.pendingText = text;
    this.state.error = null;
    this.emit();
    let result: TurnResult;
    try {
      result = await this.api.sendMessage(this.state.sessionId, text);
    } catch (err) {
      // network/server failure: keep the text around for retry, lose nothing
      this.state.error = err instanceof ApiError ? err.message : "network failure";
      this.emit();
      return null;
    }
    const view = await this.api.getSession(this.state.sessionId);
    this.state.transcript = view.transcript;
    this.state.closed = view.closed;
    this.state.lastFallback = result.fallback;
    this.state.pendingText = null;
    this.emit();
    return result;
  }
}

export function renderChat(root: HTMLElement, controller: ChatController): void {
  const state = controller.state;
  root.innerHTML = "";

  const log = document.createElement("div");
  log.className = "chat-log";
  for (const entry of state.transcript) {
    const line = document.createElement("div");
    line.className = `msg msg-${entry.speaker}`;
    line.textContent = entry.text;
    if (entry.node) line.dataset.node = entry.node;
    log.appendChild(line);
  }
  root.appendChild(log);

  if (state.lastFallback) {
    const banner = document.createElement("div");
    banner.className = "fallback-banner";
    banner.textContent = "The bot could not follow that turn.";
    root.appendChild(banner);
  }
  if (state.error) {
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.textContent = `${state.error} — press send to retry`;
    root.appendChild(banner);
  }
  if (state.closed) {
    const note = document.createElement("div");
    note.className = "closed-note";
    note.textContent = "Conversation closed.";
    root.appendChild(note);
  }

  const form = document.createElement("form");
  form.className = "chat-input";
  const input = document.createElement("input");
  input.type = "text";
  input.placeholder = "Say something…";
  if (state.pendingText !== null) input.value = state.pendingText;
  input.disabled = state.closed;
  const button = document.createElement("button");
  button.type = "submit";
  button.textContent = "Send";
  button.disabled = state.closed;
  form.append(input, button);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = input.value.trim();
    if (text) void controller.send(text);
  });
  root.appendChild(form);
}
