// Local syntax highlighting for java/python/c: works offline, no LSP
// needed. A small line tokenizer is plenty for an exercise editor;
// multi-line constructs (block comments, triple quotes) are not tracked
// across lines.

export interface Token {
  text: string;
  cls: string | null; // kw | str | num | com | null
}

const KEYWORDS: Record<string, Set<string>> = {
  java: new Set(
    ("abstract assert boolean break byte case catch char class const continue default do double " +
      "else enum extends final finally float for if implements import instanceof int interface " +
      "long native new package private protected public return short static strictfp super " +
      "switch synchronized this throw throws transient try void volatile while var record " +
      "true false null").split(" "),
  ),
  python: new Set(
    ("False None True and as assert async await break class continue def del elif else except " +
      "finally for from global if import in is lambda nonlocal not or pass raise return try " +
      "while with yield match case").split(" "),
  ),
  c: new Set(
    ("auto break case char const continue default do double else enum extern float for goto if " +
      "inline int long register restrict return short signed sizeof static struct switch typedef " +
      "union unsigned void volatile while").split(" "),
  ),
};

const LINE_COMMENT: Record<string, string> = { java: "//", c: "//", python: "#" };

const TOKEN_PATTERN =
  /("(?:[^"\\]|\\.)*"?|'(?:[^'\\]|\\.)*'?)|(\b\d[\w.]*\b)|([A-Za-z_][A-Za-z0-9_]*)|(\s+)|(.)/g;

export function tokenizeLine(language: string, line: string): Token[] {
  const keywords = KEYWORDS[language];
  const comment = LINE_COMMENT[language];
  const tokens: Token[] = [];
  let rest = line;
  if (comment) {
    const at = findCommentStart(line, comment);
    if (at >= 0) {
      rest = line.slice(0, at);
      if (at > 0) {
        tokens.push(...tokenizeCode(rest, keywords));
      }
      tokens.push({ text: line.slice(at), cls: "com" });
      return tokens;
    }
  }
  return tokenizeCode(rest, keywords);
}

function tokenizeCode(text: string, keywords: Set<string> | undefined): Token[] {
  const tokens: Token[] = [];
  for (const match of text.matchAll(TOKEN_PATTERN)) {
    const [whole, str, num, word] = match;
    if (str !== undefined) {
      tokens.push({ text: whole, cls: "str" });
    } else if (num !== undefined) {
      tokens.push({ text: whole, cls: "num" });
    } else if (word !== undefined) {
      tokens.push({ text: whole, cls: keywords?.has(word) ? "kw" : null });
    } else {
      tokens.push({ text: whole, cls: null });
    }
  }
  return tokens;
}

function findCommentStart(line: string, marker: string): number {
  let inString: string | null = null;
  for (let i = 0; i < line.length; i++) {
    const char = line[i];
    if (inString) {
      if (char === "\\") {
        i++;
      } else if (char === inString) {
        inString = null;
      }
    } else if (char === '"' || char === "'") {
      inString = char;
    } else if (line.startsWith(marker, i)) {
      return i;
    }
  }
  return -1;
}

const OPEN_TO_CLOSE: Record<string, string> = { "(": ")", "[": "]", "{": "}" };
const CLOSE_TO_OPEN: Record<string, string> = { ")": "(", "]": "[", "}": "{" };

/**
 * Offset of the bracket matching the one at (or just before) `offset`,
 * or null. Drives the brace-matching highlight.
 */
export function findMatchingBrace(text: string, offset: number): { from: number; to: number } | null {
  let at = offset;
  let char = text[at];
  if (!char || !(char in OPEN_TO_CLOSE || char in CLOSE_TO_OPEN)) {
    at = offset - 1;
    char = text[at];
  }
  if (!char) {
    return null;
  }
  if (char in OPEN_TO_CLOSE) {
    const close = OPEN_TO_CLOSE[char];
    let depth = 0;
    for (let i = at + 1; i < text.length; i++) {
      if (text[i] === char) depth++;
      else if (text[i] === close) {
        if (depth === 0) return { from: at, to: i };
        depth--;
      }
    }
    return null;
  }
  if (char in CLOSE_TO_OPEN) {
    const open = CLOSE_TO_OPEN[char];
    let depth = 0;
    for (let i = at - 1; i >= 0; i--) {
      if (text[i] === char) depth++;
      else if (text[i] === open) {
        if (depth === 0) return { from: i, to: at };
        depth--;
      }
    }
  }
  return null;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderLineHtml(language: string, line: string): string {
  return tokenizeLine(language, line)
    .map((token) =>
      token.cls
        ? `<span class="tok-${token.cls}">${escapeHtml(token.text)}</span>`
        : escapeHtml(token.text),
    )
    .join("");
}
