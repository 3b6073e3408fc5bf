import { describe, expect, it } from "vitest";

import { buildTree } from "../src/filetree.js";

describe("file tree building", () => {
  it("nests folders and sorts folders before files", () => {
    const tree = buildTree([
      { path: "README.md", size: 10 },
      { path: "src/deep/util.py", size: 5 },
      { path: "src/main.py", size: 20 },
      { path: "tests/test_main.py", size: 8 },
    ]);
    expect(tree.map((n) => n.name)).toEqual(["src", "tests", "README.md"]);
    const src = tree[0];
    expect(src.children!.map((n) => n.name)).toEqual(["deep", "main.py"]);
    expect(src.children![0].children![0].path).toBe("src/deep/util.py");
  });

  it("handles an empty workspace", () => {
    expect(buildTree([])).toEqual([]);
  });

  it("keeps full paths on leaves", () => {
    const tree = buildTree([{ path: "a/b/c.txt", size: 1 }]);
    expect(tree[0].children![0].children![0]).toEqual({ name: "c.txt", path: "a/b/c.txt", children: null });
  });
});
