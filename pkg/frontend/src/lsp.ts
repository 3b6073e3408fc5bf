// LSP client over the gateway's /lsp WebSocket. One JSON-RPC document
// per text frame. Paths are workspace-relative on this side; the wire
// carries file:///workspace URIs and the gateway does the rest.
//
// Every request either resolves with a result or resolves as cancelled
// (the gateway answers superseded requests with error -32800), so UI
// spinners always settle. Reconnects re-run initialize and re-open all
// documents.

export const WORKSPACE_ROOT = "file:///workspace";
export const REQUEST_CANCELLED = -32800;

export interface Position {
  line: number;
  character: number;
}

export interface Diagnostic {
  range: { start: Position; end: Position };
  message: string;
  severity?: number;
  source?: string;
}

export interface CompletionItem {
  label: string;
  kind?: number;
}

export type CompletionOutcome =
  | { kind: "items"; items: CompletionItem[] }
  | { kind: "cancelled" }
  | { kind: "error"; message: string };

export type LspState = "idle" | "connecting" | "connected" | "closed";

// Minimal socket surface implemented by browser WebSocket, jsdom, and ws.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
}

export type SocketFactory = (url: string) => SocketLike;

interface LspClientOptions {
  socketFactory?: SocketFactory;
  reconnectDelayMs?: number;
  maxReconnectDelayMs?: number;
}

export function pathToUri(path: string): string {
  return `${WORKSPACE_ROOT}/${path}`;
}

export function uriToPath(uri: string): string | null {
  if (uri === WORKSPACE_ROOT) {
    return "";
  }
  if (uri.startsWith(`${WORKSPACE_ROOT}/`)) {
    return uri.slice(WORKSPACE_ROOT.length + 1);
  }
  return null;
}

export function languageIdFor(path: string): string {
  if (path.endsWith(".java")) return "java";
  if (path.endsWith(".py")) return "python";
  if (path.endsWith(".c") || path.endsWith(".h")) return "c";
  if (path.endsWith(".md")) return "markdown";
  return "plaintext";
}

interface OpenDocument {
  languageId: string;
  version: number;
  text: string;
}

export class LspClient {
  private socket: SocketLike | null = null;
  private state: LspState = "idle";
  private nextId = 0;
  private pending = new Map<number, (outcome: CompletionOutcome | any) => void>();
  private documents = new Map<string, OpenDocument>();
  private diagnosticsListeners: Array<(path: string, diagnostics: Diagnostic[]) => void> = [];
  private stateListeners: Array<(state: LspState) => void> = [];
  private reconnectDelay: number;
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  private readonly socketFactory: SocketFactory;
  private readonly baseReconnectDelay: number;
  private readonly maxReconnectDelay: number;

  constructor(readonly url: string, options: LspClientOptions = {}) {
    this.socketFactory = options.socketFactory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.baseReconnectDelay = options.reconnectDelayMs ?? 500;
    this.maxReconnectDelay = options.maxReconnectDelayMs ?? 10_000;
    this.reconnectDelay = this.baseReconnectDelay;
  }

  onDiagnostics(listener: (path: string, diagnostics: Diagnostic[]) => void): void {
    this.diagnosticsListeners.push(listener);
  }

  onStateChange(listener: (state: LspState) => void): void {
    this.stateListeners.push(listener);
  }

  currentState(): LspState {
    return this.state;
  }

  connect(): void {
    if (this.state === "connecting" || this.state === "connected") {
      return;
    }
    this.closedByUser = false;
    this.setState("connecting");
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.addEventListener("open", () => {
      this.reconnectDelay = this.baseReconnectDelay;
      this.handshake();
    });
    socket.addEventListener("message", (event: any) => this.handleFrame(String(event.data)));
    socket.addEventListener("close", () => this.handleClosed());
    socket.addEventListener("error", () => {
      // close always follows; nothing to do here
    });
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.setState("closed");
  }

  didOpen(path: string, text: string): void {
    const languageId = languageIdFor(path);
    this.documents.set(path, { languageId, version: 1, text });
    this.notify("textDocument/didOpen", {
      textDocument: { uri: pathToUri(path), languageId, version: 1, text },
    });
  }

  didChange(path: string, text: string): void {
    const doc = this.documents.get(path);
    if (!doc) {
      this.didOpen(path, text);
      return;
    }
    doc.version += 1;
    doc.text = text;
    this.notify("textDocument/didChange", {
      textDocument: { uri: pathToUri(path), version: doc.version },
      contentChanges: [{ text }],
    });
  }

  didClose(path: string): void {
    if (this.documents.delete(path)) {
      this.notify("textDocument/didClose", { textDocument: { uri: pathToUri(path) } });
    }
  }

  didSave(path: string): void {
    this.notify("textDocument/didSave", { textDocument: { uri: pathToUri(path) } });
  }

  completion(path: string, position: Position): Promise<CompletionOutcome> {
    return new Promise((resolve) => {
      const id = this.request("textDocument/completion", {
        textDocument: { uri: pathToUri(path) },
        position,
      });
      if (id === null) {
        resolve({ kind: "error", message: "not connected" });
        return;
      }
      this.pending.set(id, (message: any) => {
        if (message.error) {
          if (message.error.code === REQUEST_CANCELLED) {
            resolve({ kind: "cancelled" });
          } else {
            resolve({ kind: "error", message: String(message.error.message ?? "request failed") });
          }
          return;
        }
        const result = message.result;
        const items = Array.isArray(result) ? result : result?.items ?? [];
        resolve({ kind: "items", items });
      });
    });
  }

  hover(path: string, position: Position): Promise<any> {
    return new Promise((resolve) => {
      const id = this.request("textDocument/hover", {
        textDocument: { uri: pathToUri(path) },
        position,
      });
      if (id === null) {
        resolve(null);
        return;
      }
      this.pending.set(id, (message: any) => resolve(message.error ? null : message.result));
    });
  }

  openDocumentCount(): number {
    return this.documents.size;
  }

  // -- internals ----------------------------------------------------------

  private handshake(): void {
    const id = this.sendRequest("initialize", {
      rootUri: WORKSPACE_ROOT,
      capabilities: {},
    });
    this.pending.set(id, () => {
      this.notify("initialized", {});
      this.setState("connected");
      // Recover editor state after a network blip: reopen every document
      // (fresh didOpen also refreshes diagnostics), keeping tabs intact.
      for (const [path, doc] of this.documents) {
        doc.version += 1;
        this.sendRaw({
          jsonrpc: "2.0",
          method: "textDocument/didOpen",
          params: {
            textDocument: {
              uri: pathToUri(path),
              languageId: doc.languageId,
              version: doc.version,
              text: doc.text,
            },
          },
        });
      }
    });
  }

  private handleFrame(raw: string): void {
    let message: any;
    try {
      message = JSON.parse(raw);
    } catch {
      return;
    }
    if (message.method === "textDocument/publishDiagnostics") {
      const path = uriToPath(message.params?.uri ?? "");
      if (path !== null) {
        for (const listener of this.diagnosticsListeners) {
          listener(path, message.params.diagnostics ?? []);
        }
      }
      return;
    }
    if (message.id !== undefined && message.method === undefined) {
      const resolver = this.pending.get(message.id);
      if (resolver) {
        this.pending.delete(message.id);
        resolver(message);
      }
    }
  }

  private handleClosed(): void {
    this.socket = null;
    // Requests that will never be answered resolve as cancelled.
    for (const resolver of this.pending.values()) {
      resolver({ error: { code: REQUEST_CANCELLED, message: "connection closed" } });
    }
    this.pending.clear();
    if (this.closedByUser) {
      this.setState("closed");
      return;
    }
    this.setState("connecting");
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.setState("idle");
      this.connect();
    }, this.reconnectDelay);
    this.reconnectDelay = Math.min(this.reconnectDelay * 2, this.maxReconnectDelay);
  }

  private setState(state: LspState): void {
    if (state === this.state) {
      return;
    }
    this.state = state;
    for (const listener of this.stateListeners) {
      listener(state);
    }
  }

  private notify(method: string, params: unknown): void {
    this.sendRaw({ jsonrpc: "2.0", method, params });
  }

  private request(method: string, params: unknown): number | null {
    if (!this.socket) {
      return null;
    }
    return this.sendRequest(method, params);
  }

  private sendRequest(method: string, params: unknown): number {
    const id = ++this.nextId;
    this.sendRaw({ jsonrpc: "2.0", id, method, params });
    return id;
  }

  private sendRaw(message: unknown): void {
    try {
      this.socket?.send(JSON.stringify(message));
    } catch {
      // Socket raced shut; the close handler cleans up.
    }
  }
}
