// REST client for the gateway service. Only the documented endpoints;
// no direct VCS or sandbox access.

export interface SessionInfo {
  sessionId: string;
  userId: string;
  exerciseId: string;
  language: string;
  nodeId: string;
  state: string;
  wsUrls: { lsp: string; terminal: string };
}

export interface FileEntry {
  path: string;
  size: number;
}

export interface CreateSessionRequest {
  userId: string;
  exerciseId: string;
  language: string;
  repoUrl: string;
  branch?: string;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly token: string | null = null,
  ) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.token) {
      headers["authorization"] = `Bearer ${this.token}`;
    }
    return headers;
  }

  private async request(method: string, path: string, body?: unknown): Promise<any> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        detail = (await response.json()).error ?? detail;
      } catch {
        // non-JSON error body
      }
      throw new ApiError(`${method} ${path}: ${detail}`, response.status);
    }
    if (response.status === 204) {
      return null;
    }
    return response.json();
  }

  createSession(request: CreateSessionRequest): Promise<SessionInfo> {
    return this.request("POST", "/sessions", request);
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  closeSession(sessionId: string): Promise<unknown> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }

  async listFiles(sessionId: string): Promise<FileEntry[]> {
    const body = await this.request("GET", `/sessions/${sessionId}/files`);
    return body.files;
  }

  async readFile(sessionId: string, path: string): Promise<string> {
    const body = await this.request("GET", `/sessions/${sessionId}/files/${path}`);
    return body.content;
  }

  async writeFile(sessionId: string, path: string, content: string): Promise<void> {
    await this.request("PUT", `/sessions/${sessionId}/files/${path}`, { content });
  }

  async persist(sessionId: string): Promise<string | null> {
    const body = await this.request("POST", `/sessions/${sessionId}/persist`);
    return body.headCommit;
  }

  status(): Promise<any> {
    return this.request("GET", "/status");
  }

  websocketUrl(path: string): string {
    const http = new URL(this.baseUrl);
    const scheme = http.protocol === "https:" ? "wss:" : "ws:";
    const suffix = this.token ? `?token=${encodeURIComponent(this.token)}` : "";
    return `${scheme}//${http.host}${path}${suffix}`;
  }
}
