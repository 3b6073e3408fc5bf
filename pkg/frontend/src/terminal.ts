// Terminal client over /terminal WebSocket plus the run-button state.
// Frames are JSON: {"t":"stdin"|"stdout"|"stderr","data":base64},
// {"t":"resize","cols":N,"rows":N}, {"t":"exit","code":N}, {"t":"run"}.

import { decodeBase64, encodeBase64 } from "./base64.js";
import type { SocketFactory, SocketLike } from "./lsp.js";

export type ParsedFrame =
  | { t: "stdout" | "stderr"; text: string }
  | { t: "exit"; code: number | null }
  | { t: "unknown" };

export function encodeStdinFrame(text: string): string {
  return JSON.stringify({ t: "stdin", data: encodeBase64(text) });
}

export function encodeRunFrame(): string {
  return JSON.stringify({ t: "run" });
}

export function encodeResizeFrame(cols: number, rows: number): string {
  return JSON.stringify({ t: "resize", cols, rows });
}

export function parseFrame(raw: string, decoder: TextDecoder): ParsedFrame {
  let frame: any;
  try {
    frame = JSON.parse(raw);
  } catch {
    return { t: "unknown" };
  }
  if (frame.t === "stdout" || frame.t === "stderr") {
    // stream:true keeps multi-byte characters split across frames intact
    const text = decoder.decode(decodeBase64(frame.data ?? ""), { stream: true });
    return { t: frame.t, text };
  }
  if (frame.t === "exit") {
    return { t: "exit", code: frame.code ?? null };
  }
  return { t: "unknown" };
}

/**
 * Run-button state: at most one "running" indicator no matter how fast
 * the button is clicked. Re-clicking while running restarts the run on
 * the backend (terminate-first), so each click eventually produces one
 * exit event; outstanding runs are counted and the indicator clears only
 * when the last one settles.
 */
export class RunState {
  private pendingRuns = 0;
  private listeners: Array<(running: boolean, exitCode: number | null) => void> = [];
  lastExitCode: number | null = null;

  onChange(listener: (running: boolean, exitCode: number | null) => void): void {
    this.listeners.push(listener);
  }

  isRunning(): boolean {
    return this.pendingRuns > 0;
  }

  started(): void {
    this.lastExitCode = null;
    this.pendingRuns += 1;
    if (this.pendingRuns === 1) {
      this.emit();
    }
  }

  exited(code: number | null): void {
    this.lastExitCode = code;
    this.pendingRuns = Math.max(0, this.pendingRuns - 1);
    if (this.pendingRuns === 0) {
      this.emit();
    }
  }

  /** Connection gone: no further exit events will arrive. */
  reset(): void {
    if (this.pendingRuns > 0) {
      this.pendingRuns = 0;
      this.emit();
    }
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.isRunning(), this.lastExitCode);
    }
  }
}

export type TerminalState = "idle" | "connecting" | "open" | "closed";

export class TerminalClient {
  private socket: SocketLike | null = null;
  private state: TerminalState = "idle";
  private decoder = new TextDecoder();
  private outputListeners: Array<(stream: "stdout" | "stderr", text: string) => void> = [];
  private exitListeners: Array<(code: number | null) => void> = [];
  private stateListeners: Array<(state: TerminalState) => void> = [];
  private readonly socketFactory: SocketFactory;

  constructor(readonly url: string, socketFactory?: SocketFactory) {
    this.socketFactory = socketFactory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
  }

  onOutput(listener: (stream: "stdout" | "stderr", text: string) => void): void {
    this.outputListeners.push(listener);
  }

  onExit(listener: (code: number | null) => void): void {
    this.exitListeners.push(listener);
  }

  onStateChange(listener: (state: TerminalState) => void): void {
    this.stateListeners.push(listener);
  }

  currentState(): TerminalState {
    return this.state;
  }

  /** Opens the socket (and therefore the sandbox) on first use only. */
  connect(): Promise<void> {
    if (this.state === "open") {
      return Promise.resolve();
    }
    if (this.state === "connecting") {
      return new Promise((resolve) => {
        const listener = (state: TerminalState) => {
          if (state === "open" || state === "closed") resolve();
        };
        this.stateListeners.push(listener);
      });
    }
    this.setState("connecting");
    return new Promise((resolve, reject) => {
      const socket = this.socketFactory(this.url);
      this.socket = socket;
      socket.addEventListener("open", () => {
        this.setState("open");
        resolve();
      });
      socket.addEventListener("message", (event: any) => this.handleFrame(String(event.data)));
      socket.addEventListener("close", () => {
        this.socket = null;
        const wasConnecting = this.state === "connecting";
        this.setState("closed");
        if (wasConnecting) {
          reject(new Error("terminal connection refused"));
        }
      });
      socket.addEventListener("error", () => {
        // close follows
      });
    });
  }

  disconnect(): void {
    this.socket?.close();
    this.socket = null;
    this.setState("closed");
  }

  sendInput(text: string): void {
    this.socket?.send(encodeStdinFrame(text));
  }

  requestRun(): void {
    this.socket?.send(encodeRunFrame());
  }

  resize(cols: number, rows: number): void {
    this.socket?.send(encodeResizeFrame(cols, rows));
  }

  private handleFrame(raw: string): void {
    const frame = parseFrame(raw, this.decoder);
    if (frame.t === "stdout" || frame.t === "stderr") {
      for (const listener of this.outputListeners) {
        listener(frame.t, frame.text);
      }
    } else if (frame.t === "exit") {
      for (const listener of this.exitListeners) {
        listener(frame.code);
      }
    }
  }

  private setState(state: TerminalState): void {
    if (state === this.state) {
      return;
    }
    this.state = state;
    for (const listener of this.stateListeners) {
      listener(state);
    }
  }
}
