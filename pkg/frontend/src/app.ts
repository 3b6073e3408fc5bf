// Application shell: the four panes (file browser, editor, problem
// statement, terminal) wired to the gateway's REST and WebSocket
// surface. The LSP socket opens with the session; the terminal socket
// (and therefore the sandbox) opens only on first terminal use.

import { ApiClient, type SessionInfo } from "./api.js";
import { EditorPane } from "./editor.js";
import { FileTreePane } from "./filetree.js";
import { LayoutState } from "./layout.js";
import { LspClient, type Position, type SocketFactory } from "./lsp.js";
import { ProblemPane } from "./problem.js";
import { RunState, TerminalClient } from "./terminal.js";

const PROBLEM_CANDIDATES = ["problem.md", "README.md"];
const LOCAL_CHANGE_THROTTLE_MS = 150;

// Clear-screen sequence the run path emits before each run.
const CLEAR_PATTERN = /\x1b\[2J(\x1b\[H)?/;
const ANSI_PATTERN = /\x1b\[[0-9;?]*[A-Za-z]/g;

export interface IdeOptions {
  baseUrl: string;
  session: SessionInfo;
  token?: string | null;
  socketFactory?: SocketFactory;
  changeThrottleMs?: number;
}

function debounceTrailing<T extends unknown[]>(
  delayMs: number,
  fn: (...args: T) => void,
): (...args: T) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: T) => {
    if (timer !== null) {
      clearTimeout(timer);
    }
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, delayMs);
  };
}

export class IdeApp {
  readonly api: ApiClient;
  readonly lsp: LspClient;
  readonly terminal: TerminalClient;
  readonly layout = new LayoutState();
  readonly runState = new RunState();

  editor!: EditorPane;
  private fileTree!: FileTreePane;
  private problem!: ProblemPane;
  private terminalOutputEl!: HTMLElement;
  private runButtonEl!: HTMLButtonElement;
  private bannerEl!: HTMLElement;
  private statusEl!: HTMLElement;
  private gridEl!: HTMLElement;

  private terminalBuffer = "";
  private pushChange: (path: string, content: string) => void;

  constructor(
    private root: HTMLElement,
    private options: IdeOptions,
  ) {
    this.api = new ApiClient(options.baseUrl, options.token ?? null);
    this.lsp = new LspClient(this.api.websocketUrl(options.session.wsUrls.lsp), {
      socketFactory: options.socketFactory,
    });
    this.terminal = new TerminalClient(
      this.api.websocketUrl(options.session.wsUrls.terminal),
      options.socketFactory,
    );
    this.pushChange = debounceTrailing(
      options.changeThrottleMs ?? LOCAL_CHANGE_THROTTLE_MS,
      (path: string, content: string) => this.lsp.didChange(path, content),
    );
  }

  get session(): SessionInfo {
    return this.options.session;
  }

  async start(): Promise<void> {
    this.renderShell();
    this.wireLsp();
    this.wireTerminal();
    this.lsp.connect();
    await this.refreshFiles();
    await this.loadProblemStatement();
  }

  // -- shell -----------------------------------------------------------------

  private renderShell(): void {
    this.root.classList.add("ide-root");
    this.root.innerHTML = `
      <div class="ide-toolbar">
        <span class="ide-title">${this.options.session.exerciseId}</span>
        <button class="run-button" title="Terminate, clear, and run the exercise command">▶ Run</button>
        <button class="save-button" title="Save and push (Ctrl-S)">Save</button>
        <button class="terminal-toggle">Terminal</button>
        <span class="run-indicator" hidden>running…</span>
        <span class="exit-badge" hidden></span>
        <span class="connection-banner"></span>
      </div>
      <div class="ide-grid">
        <div class="pane pane-files"></div>
        <div class="divider divider-col" data-left="0"></div>
        <div class="pane pane-editor"></div>
        <div class="divider divider-col" data-left="1"></div>
        <div class="pane pane-problem"></div>
        <div class="divider divider-row"></div>
        <div class="pane pane-terminal">
          <div class="pane-title">Terminal</div>
          <pre class="terminal-output"></pre>
          <input class="terminal-input" placeholder="shell command…" />
        </div>
      </div>
      <div class="ide-statusbar"></div>`;

    this.gridEl = this.root.querySelector(".ide-grid") as HTMLElement;
    this.bannerEl = this.root.querySelector(".connection-banner") as HTMLElement;
    this.statusEl = this.root.querySelector(".ide-statusbar") as HTMLElement;
    this.terminalOutputEl = this.root.querySelector(".terminal-output") as HTMLElement;
    this.runButtonEl = this.root.querySelector(".run-button") as HTMLButtonElement;

    this.fileTree = new FileTreePane(
      this.root.querySelector(".pane-files") as HTMLElement,
      (path) => void this.openFile(path),
    );
    this.problem = new ProblemPane(this.root.querySelector(".pane-problem") as HTMLElement);
    this.editor = new EditorPane(this.root.querySelector(".pane-editor") as HTMLElement, {
      onChange: (path, content) => this.pushChange(path, content),
      onSave: (path, content) => void this.saveFile(path, content),
      onCompletionRequest: (path, position) => void this.requestCompletion(path, position),
    });

    this.runButtonEl.addEventListener("click", () => void this.runClicked());
    (this.root.querySelector(".save-button") as HTMLElement).addEventListener("click", () => {
      const path = this.editor.activePath();
      if (path !== null) {
        void this.saveFile(path, this.editor.content(path));
      }
    });
    (this.root.querySelector(".terminal-toggle") as HTMLElement).addEventListener("click", () =>
      void this.toggleTerminal(),
    );

    const terminalInput = this.root.querySelector(".terminal-input") as HTMLInputElement;
    terminalInput.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        void this.terminalCommand(terminalInput.value + "\n");
        terminalInput.value = "";
      }
    });

    this.layout.onChange(() => this.applyLayout());
    for (const divider of this.root.querySelectorAll(".divider-col")) {
      this.wireColumnDivider(divider as HTMLElement);
    }
    this.wireRowDivider(this.root.querySelector(".divider-row") as HTMLElement);
    this.runState.onChange((running, exitCode) => this.renderRunState(running, exitCode));
    this.applyLayout();
  }

  private applyLayout(): void {
    this.gridEl.style.gridTemplateColumns = this.layout.columnTemplate();
    this.gridEl.style.gridTemplateRows = this.layout.rowTemplate();
    this.gridEl.classList.toggle("terminal-hidden", !this.layout.terminalVisible);
  }

  private wireColumnDivider(divider: HTMLElement): void {
    const left = Number(divider.dataset.left) as 0 | 1;
    divider.addEventListener("pointerdown", (down: PointerEvent) => {
      const width = this.gridEl.clientWidth || 1;
      let lastX = down.clientX;
      const move = (event: PointerEvent) => {
        this.layout.resizeColumns(left, (event.clientX - lastX) / width);
        lastX = event.clientX;
      };
      const up = () => {
        window.removeEventListener("pointermove", move);
        window.removeEventListener("pointerup", up);
      };
      window.addEventListener("pointermove", move);
      window.addEventListener("pointerup", up);
    });
  }

  private wireRowDivider(divider: HTMLElement): void {
    divider.addEventListener("pointerdown", (down: PointerEvent) => {
      const height = this.gridEl.clientHeight || 1;
      let lastY = down.clientY;
      const move = (event: PointerEvent) => {
        this.layout.resizeTerminal((lastY - event.clientY) / height);
        lastY = event.clientY;
      };
      const up = () => {
        window.removeEventListener("pointermove", move);
        window.removeEventListener("pointerup", up);
      };
      window.addEventListener("pointermove", move);
      window.addEventListener("pointerup", up);
    });
  }

  // -- files -------------------------------------------------------------------

  async refreshFiles(): Promise<void> {
    const entries = await this.api.listFiles(this.session.sessionId);
    this.fileTree.render(entries);
    this.setStatus(`${entries.length} files`);
  }

  async openFile(path: string): Promise<void> {
    if (!this.editor.openPaths().includes(path)) {
      const content = await this.api.readFile(this.session.sessionId, path);
      this.editor.open(path, content);
      this.lsp.didOpen(path, content);
    } else {
      this.editor.activate(path);
    }
  }

  async saveFile(path: string, content: string): Promise<void> {
    await this.api.writeFile(this.session.sessionId, path, content);
    this.lsp.didSave(path);
    await this.api.persist(this.session.sessionId);
    this.editor.markSaved(path);
    this.setStatus(`saved ${path}`);
  }

  private async loadProblemStatement(): Promise<void> {
    for (const candidate of PROBLEM_CANDIDATES) {
      try {
        const text = await this.api.readFile(this.session.sessionId, candidate);
        this.problem.render(text);
        return;
      } catch {
        // try the next candidate
      }
    }
    this.problem.render(null);
  }

  // -- LSP ---------------------------------------------------------------------

  private wireLsp(): void {
    this.lsp.onDiagnostics((path, diagnostics) => {
      this.editor.setDiagnostics(path, diagnostics);
    });
    this.lsp.onStateChange((state) => {
      this.bannerEl.textContent =
        state === "connected" ? "" : state === "connecting" ? "reconnecting…" : "offline";
      this.bannerEl.classList.toggle("visible", state !== "connected");
    });
  }

  private async requestCompletion(path: string, position: Position): Promise<void> {
    const outcome = await this.lsp.completion(path, position);
    // A cancelled request means a newer one superseded it; never leave a
    // stale popup or spinner behind.
    if (outcome.kind === "items") {
      this.editor.showCompletions(outcome.items);
    } else {
      this.editor.hideCompletions();
    }
  }

  // -- terminal and run -----------------------------------------------------------

  private wireTerminal(): void {
    this.terminal.onOutput((_stream, text) => this.appendTerminal(text));
    this.terminal.onExit((code) => this.runState.exited(code));
    this.terminal.onStateChange((state) => {
      if (state === "closed") {
        this.runState.reset();
        this.appendTerminal("\n[terminal disconnected]\n");
      }
    });
  }

  async toggleTerminal(): Promise<void> {
    this.layout.showTerminal(!this.layout.terminalVisible);
    if (this.layout.terminalVisible) {
      await this.ensureTerminal();
    }
  }

  private async ensureTerminal(): Promise<void> {
    if (this.terminal.currentState() !== "open") {
      await this.terminal.connect();
    }
  }

  private async terminalCommand(text: string): Promise<void> {
    await this.ensureTerminal();
    this.terminal.sendInput(text);
  }

  /** Run button: open the terminal pane if needed and fire the sequence. */
  async runClicked(): Promise<void> {
    this.layout.showTerminal(true);
    try {
      await this.ensureTerminal();
    } catch (error) {
      this.appendTerminal(`[run failed: ${String(error)}]\n`);
      return;
    }
    this.runState.started();
    this.terminal.requestRun();
  }

  private appendTerminal(text: string): void {
    this.terminalBuffer += text;
    const clearAt = this.terminalBuffer.search(CLEAR_PATTERN);
    if (clearAt >= 0) {
      this.terminalBuffer = this.terminalBuffer
        .slice(clearAt)
        .replace(CLEAR_PATTERN, "");
    }
    this.terminalOutputEl.textContent = this.terminalBuffer.replace(ANSI_PATTERN, "");
    this.terminalOutputEl.scrollTop = this.terminalOutputEl.scrollHeight;
  }

  private renderRunState(running: boolean, exitCode: number | null): void {
    const indicator = this.root.querySelector(".run-indicator") as HTMLElement;
    const badge = this.root.querySelector(".exit-badge") as HTMLElement;
    indicator.hidden = !running;
    if (!running && exitCode !== null) {
      badge.hidden = false;
      badge.textContent = exitCode === 0 ? "exit 0 ✓" : `exit ${exitCode} ✗`;
      badge.classList.toggle("ok", exitCode === 0);
    } else if (running) {
      badge.hidden = true;
    }
  }

  private setStatus(text: string): void {
    this.statusEl.textContent = `${this.session.sessionId.slice(0, 8)} · ${this.session.language} · ${text}`;
  }
}

/** Boots the IDE against an existing session, or creates one first. */
export async function createIde(
  root: HTMLElement,
  options: {
    baseUrl: string;
    sessionId?: string;
    create?: { userId: string; exerciseId: string; language: string; repoUrl: string };
    token?: string | null;
    socketFactory?: SocketFactory;
    changeThrottleMs?: number;
  },
): Promise<IdeApp> {
  const api = new ApiClient(options.baseUrl, options.token ?? null);
  let session: SessionInfo;
  if (options.sessionId) {
    session = await api.getSession(options.sessionId);
  } else if (options.create) {
    session = await api.createSession(options.create);
  } else {
    throw new Error("need sessionId or create parameters");
  }
  const app = new IdeApp(root, {
    baseUrl: options.baseUrl,
    session,
    token: options.token,
    socketFactory: options.socketFactory,
    changeThrottleMs: options.changeThrottleMs,
  });
  await app.start();
  return app;
}
