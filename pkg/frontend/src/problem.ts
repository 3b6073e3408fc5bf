// Problem-statement pane: renders the exercise's markdown (problem.md or
// README.md from the workspace). Deliberately tiny renderer; everything
// is HTML-escaped before markup is applied.

import { escapeHtml } from "./highlight.js";

export function renderMarkdown(source: string): string {
  const lines = source.split("\n");
  const html: string[] = [];
  let inCode = false;
  let paragraph: string[] = [];
  let inList = false;

  const flushParagraph = () => {
    if (paragraph.length > 0) {
      html.push(`<p>${inline(paragraph.join(" "))}</p>`);
      paragraph = [];
    }
  };
  const closeList = () => {
    if (inList) {
      html.push("</ul>");
      inList = false;
    }
  };

  for (const line of lines) {
    if (line.startsWith("```")) {
      flushParagraph();
      closeList();
      html.push(inCode ? "</code></pre>" : "<pre><code>");
      inCode = !inCode;
      continue;
    }
    if (inCode) {
      html.push(escapeHtml(line));
      continue;
    }
    const heading = line.match(/^(#{1,4})\s+(.*)$/);
    if (heading) {
      flushParagraph();
      closeList();
      const level = heading[1].length;
      html.push(`<h${level}>${inline(heading[2])}</h${level}>`);
      continue;
    }
    const bullet = line.match(/^\s*[-*]\s+(.*)$/);
    if (bullet) {
      flushParagraph();
      if (!inList) {
        html.push("<ul>");
        inList = true;
      }
      html.push(`<li>${inline(bullet[1])}</li>`);
      continue;
    }
    if (line.trim() === "") {
      flushParagraph();
      closeList();
      continue;
    }
    paragraph.push(line.trim());
  }
  if (inCode) {
    html.push("</code></pre>");
  }
  flushParagraph();
  closeList();
  return html.join("\n");
}

function inline(text: string): string {
  let escaped = escapeHtml(text);
  escaped = escaped.replace(/`([^`]+)`/g, "<code>$1</code>");
  escaped = escaped.replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>");
  escaped = escaped.replace(/\*([^*]+)\*/g, "<em>$1</em>");
  return escaped;
}

export class ProblemPane {
  constructor(private root: HTMLElement) {
    root.classList.add("problem-pane");
  }

  render(markdown: string | null): void {
    if (markdown === null) {
      this.root.innerHTML =
        '<div class="pane-title">Problem</div><p class="muted">No problem statement in this workspace.</p>';
      return;
    }
    this.root.innerHTML =
      `<div class="pane-title">Problem</div><div class="problem-body">${renderMarkdown(markdown)}</div>`;
  }
}
