import { describe, expect, it } from "vitest";

import { renderMarkdown } from "../src/problem.js";

describe("markdown rendering", () => {
  it("renders headings, lists, and paragraphs", () => {
    const html = renderMarkdown("# Title\n\nIntro text.\n\n- one\n- two\n");
    expect(html).toContain("<h1>Title</h1>");
    expect(html).toContain("<p>Intro text.</p>");
    expect(html).toContain("<li>one</li>");
  });

  it("renders fenced code without inline markup", () => {
    const html = renderMarkdown("```\nx = **not bold**\n```\n");
    expect(html).toContain("<pre><code>");
    expect(html).toContain("x = **not bold**");
    expect(html).not.toContain("<strong>");
  });

  it("applies inline code, bold, italics", () => {
    const html = renderMarkdown("Use `pytest` to run **all** *tests*.");
    expect(html).toContain("<code>pytest</code>");
    expect(html).toContain("<strong>all</strong>");
    expect(html).toContain("<em>tests</em>");
  });

  it("escapes raw html everywhere", () => {
    const html = renderMarkdown('# <script>alert(1)</script>\n\n<img src=x onerror=y>\n');
    expect(html).not.toContain("<script>");
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;script&gt;");
  });
});
