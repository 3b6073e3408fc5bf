// Tabbed code editor: a textarea for input with a highlighted underlay
// behind it (tokens, diagnostic lines, brace match). Multiple files stay
// open at once; tab and content state survive layout changes because the
// DOM is never rebuilt on resize.

import { escapeHtml, findMatchingBrace, tokenizeLine } from "./highlight.js";
import { languageIdFor, type CompletionItem, type Diagnostic, type Position } from "./lsp.js";

export interface EditorCallbacks {
  onChange?: (path: string, content: string) => void;
  onSave?: (path: string, content: string) => void;
  onCompletionRequest?: (path: string, position: Position) => void;
  onActivate?: (path: string) => void;
}

interface OpenFile {
  content: string;
  dirty: boolean;
  diagnostics: Diagnostic[];
}

export function offsetToPosition(text: string, offset: number): Position {
  const before = text.slice(0, offset);
  const line = (before.match(/\n/g) ?? []).length;
  const lastBreak = before.lastIndexOf("\n");
  return { line, character: offset - lastBreak - 1 };
}

function renderLineWithMarks(language: string, line: string, marks: number[]): string {
  const tokens = tokenizeLine(language, line);
  let html = "";
  let column = 0;
  for (const token of tokens) {
    let text = token.text;
    while (text.length > 0) {
      const mark = marks.find((m) => m >= column && m < column + text.length);
      if (mark === undefined) {
        html += wrap(text, token.cls);
        column += text.length;
        break;
      }
      const before = text.slice(0, mark - column);
      if (before) {
        html += wrap(before, token.cls);
      }
      html += `<span class="brace-match">${escapeHtml(text[mark - column])}</span>`;
      text = text.slice(mark - column + 1);
      column = mark + 1;
    }
  }
  return html;

  function wrap(text: string, cls: string | null): string {
    return cls ? `<span class="tok-${cls}">${escapeHtml(text)}</span>` : escapeHtml(text);
  }
}

export class EditorPane {
  private files = new Map<string, OpenFile>();
  private active: string | null = null;

  private tabsEl: HTMLElement;
  private underlayEl: HTMLElement;
  private textareaEl: HTMLTextAreaElement;
  private diagnosticsEl: HTMLElement;
  private completionEl: HTMLElement;
  private placeholderEl: HTMLElement;

  constructor(private root: HTMLElement, private callbacks: EditorCallbacks = {}) {
    root.classList.add("editor-pane");
    root.innerHTML = `
      <div class="tabs"></div>
      <div class="editor-body">
        <div class="editor-placeholder">Open a file from the browser on the left.</div>
        <pre class="editor-underlay" aria-hidden="true"></pre>
        <textarea class="editor-input" spellcheck="false" autocomplete="off" hidden></textarea>
        <div class="completion-popup" hidden></div>
      </div>
      <div class="diagnostics-strip"></div>`;
    this.tabsEl = root.querySelector(".tabs") as HTMLElement;
    this.underlayEl = root.querySelector(".editor-underlay") as HTMLElement;
    this.textareaEl = root.querySelector(".editor-input") as HTMLTextAreaElement;
    this.diagnosticsEl = root.querySelector(".diagnostics-strip") as HTMLElement;
    this.completionEl = root.querySelector(".completion-popup") as HTMLElement;
    this.placeholderEl = root.querySelector(".editor-placeholder") as HTMLElement;

    this.textareaEl.addEventListener("input", () => this.handleInput());
    this.textareaEl.addEventListener("scroll", () => this.syncScroll());
    this.textareaEl.addEventListener("keyup", () => this.renderUnderlay());
    this.textareaEl.addEventListener("click", () => this.renderUnderlay());
    this.textareaEl.addEventListener("keydown", (event) => this.handleKeydown(event));
  }

  // -- file management ------------------------------------------------------

  open(path: string, content: string): void {
    if (!this.files.has(path)) {
      this.files.set(path, { content, dirty: false, diagnostics: [] });
      this.renderTabs();
    }
    this.activate(path);
  }

  activate(path: string): void {
    if (!this.files.has(path) || this.active === path) {
      if (this.active !== path) return;
    }
    this.active = path;
    const file = this.files.get(path)!;
    this.placeholderEl.hidden = true;
    this.textareaEl.hidden = false;
    this.textareaEl.value = file.content;
    this.renderTabs();
    this.renderUnderlay();
    this.renderDiagnosticsStrip();
    this.callbacks.onActivate?.(path);
  }

  closeTab(path: string): void {
    this.files.delete(path);
    if (this.active === path) {
      this.active = this.files.size > 0 ? [...this.files.keys()][0] : null;
      if (this.active) {
        this.activate(this.active);
      } else {
        this.textareaEl.hidden = true;
        this.placeholderEl.hidden = false;
        this.underlayEl.innerHTML = "";
        this.renderDiagnosticsStrip();
      }
    }
    this.renderTabs();
  }

  openPaths(): string[] {
    return [...this.files.keys()];
  }

  activePath(): string | null {
    return this.active;
  }

  content(path: string): string {
    return this.files.get(path)?.content ?? "";
  }

  /** Programmatic edit (tests, external refresh); fires onChange. */
  setContent(path: string, content: string): void {
    const file = this.files.get(path);
    if (!file) {
      return;
    }
    file.content = content;
    file.dirty = true;
    if (this.active === path) {
      this.textareaEl.value = content;
      this.renderUnderlay();
    }
    this.renderTabs();
    this.callbacks.onChange?.(path, content);
  }

  markSaved(path: string): void {
    const file = this.files.get(path);
    if (file) {
      file.dirty = false;
      this.renderTabs();
    }
  }

  // -- diagnostics ----------------------------------------------------------

  /** Replaces the file's markers; an empty list clears them. */
  setDiagnostics(path: string, diagnostics: Diagnostic[]): void {
    const file = this.files.get(path);
    if (!file) {
      return;
    }
    file.diagnostics = diagnostics;
    if (this.active === path) {
      this.renderUnderlay();
      this.renderDiagnosticsStrip();
    }
  }

  diagnostics(path: string): Diagnostic[] {
    return this.files.get(path)?.diagnostics ?? [];
  }

  // -- completion popup -------------------------------------------------------

  showCompletions(items: CompletionItem[]): void {
    if (items.length === 0) {
      this.hideCompletions();
      return;
    }
    this.completionEl.innerHTML = items
      .map((item) => `<div class="completion-item">${escapeHtml(item.label)}</div>`)
      .join("");
    this.completionEl.hidden = false;
    for (const element of this.completionEl.querySelectorAll(".completion-item")) {
      element.addEventListener("click", () => {
        this.insertAtCursor((element as HTMLElement).textContent ?? "");
        this.hideCompletions();
      });
    }
  }

  hideCompletions(): void {
    this.completionEl.hidden = true;
    this.completionEl.innerHTML = "";
  }

  completionsVisible(): boolean {
    return !this.completionEl.hidden;
  }

  cursorPosition(): Position {
    return offsetToPosition(this.textareaEl.value, this.textareaEl.selectionStart ?? 0);
  }

  private insertAtCursor(text: string): void {
    const at = this.textareaEl.selectionStart ?? this.textareaEl.value.length;
    const value = this.textareaEl.value;
    this.textareaEl.value = value.slice(0, at) + text + value.slice(at);
    this.textareaEl.selectionStart = this.textareaEl.selectionEnd = at + text.length;
    this.handleInput();
  }

  // -- rendering ----------------------------------------------------------------

  private handleInput(): void {
    if (this.active === null) {
      return;
    }
    const file = this.files.get(this.active)!;
    file.content = this.textareaEl.value;
    file.dirty = true;
    this.renderTabs();
    this.renderUnderlay();
    this.callbacks.onChange?.(this.active, file.content);
  }

  private handleKeydown(event: KeyboardEvent): void {
    if ((event.ctrlKey || event.metaKey) && event.key.toLowerCase() === "s") {
      event.preventDefault();
      if (this.active !== null) {
        this.callbacks.onSave?.(this.active, this.content(this.active));
      }
      return;
    }
    if (event.ctrlKey && event.key === " ") {
      event.preventDefault();
      if (this.active !== null) {
        this.callbacks.onCompletionRequest?.(this.active, this.cursorPosition());
      }
      return;
    }
    if (event.key === "Escape") {
      this.hideCompletions();
    }
  }

  private renderTabs(): void {
    this.tabsEl.innerHTML = "";
    for (const [path, file] of this.files) {
      const tab = document.createElement("span");
      tab.className = "tab" + (path === this.active ? " active" : "");
      tab.dataset.path = path;
      const label = document.createElement("span");
      label.textContent = (file.dirty ? "● " : "") + path.split("/").pop();
      label.title = path;
      label.addEventListener("click", () => this.activate(path));
      const close = document.createElement("button");
      close.className = "tab-close";
      close.textContent = "×";
      close.addEventListener("click", (event) => {
        event.stopPropagation();
        this.closeTab(path);
      });
      tab.append(label, close);
      this.tabsEl.append(tab);
    }
  }

  private renderUnderlay(): void {
    if (this.active === null) {
      return;
    }
    const file = this.files.get(this.active)!;
    const language = languageIdFor(this.active);
    const text = this.textareaEl.value;
    const errorLines = new Set(
      file.diagnostics.map((diagnostic) => diagnostic.range.start.line),
    );
    const match = findMatchingBrace(text, this.textareaEl.selectionStart ?? 0);
    const markByLine = new Map<number, number[]>();
    if (match) {
      for (const offset of [match.from, match.to]) {
        const position = offsetToPosition(text, offset);
        const marks = markByLine.get(position.line) ?? [];
        marks.push(position.character);
        markByLine.set(position.line, marks);
      }
    }
    const lines = text.split("\n");
    this.underlayEl.innerHTML = lines
      .map((line, index) => {
        const cls = errorLines.has(index) ? ' class="line diag-error"' : ' class="line"';
        const html = renderLineWithMarks(language, line, markByLine.get(index) ?? []);
        return `<div${cls}>${html || "&nbsp;"}</div>`;
      })
      .join("");
  }

  private renderDiagnosticsStrip(): void {
    const diagnostics = this.active ? this.files.get(this.active)!.diagnostics : [];
    this.diagnosticsEl.innerHTML = diagnostics
      .map(
        (diagnostic) =>
          `<div class="diagnostic-item" data-line="${diagnostic.range.start.line}">` +
          `L${diagnostic.range.start.line + 1}: ${escapeHtml(diagnostic.message)}</div>`,
      )
      .join("");
  }

  private syncScroll(): void {
    this.underlayEl.scrollTop = this.textareaEl.scrollTop;
    this.underlayEl.scrollLeft = this.textareaEl.scrollLeft;
  }
}
