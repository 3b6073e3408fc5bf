// Workspace file browser: nested folders from the flat listing.

import type { FileEntry } from "./api.js";

export interface TreeNode {
  name: string;
  path: string;
  children: TreeNode[] | null; // null = file
}

export function buildTree(entries: FileEntry[]): TreeNode[] {
  const roots: TreeNode[] = [];
  const folders = new Map<string, TreeNode>();

  const folderFor = (path: string): TreeNode[] => {
    if (path === "") {
      return roots;
    }
    let node = folders.get(path);
    if (!node) {
      const parts = path.split("/");
      node = { name: parts[parts.length - 1], path, children: [] };
      folders.set(path, node);
      folderFor(parts.slice(0, -1).join("/")).push(node);
    }
    return node.children!;
  };

  for (const entry of [...entries].sort((a, b) => a.path.localeCompare(b.path))) {
    const parts = entry.path.split("/");
    folderFor(parts.slice(0, -1).join("/")).push({
      name: parts[parts.length - 1],
      path: entry.path,
      children: null,
    });
  }
  sortTree(roots);
  return roots;
}

function sortTree(nodes: TreeNode[]): void {
  nodes.sort((a, b) => {
    if ((a.children === null) !== (b.children === null)) {
      return a.children === null ? 1 : -1; // folders first
    }
    return a.name.localeCompare(b.name);
  });
  for (const node of nodes) {
    if (node.children) {
      sortTree(node.children);
    }
  }
}

export class FileTreePane {
  constructor(
    private root: HTMLElement,
    private onOpen: (path: string) => void,
  ) {
    root.classList.add("filetree-pane");
  }

  render(entries: FileEntry[]): void {
    this.root.innerHTML = '<div class="pane-title">Files</div>';
    this.root.append(this.renderNodes(buildTree(entries)));
  }

  private renderNodes(nodes: TreeNode[]): HTMLElement {
    const list = document.createElement("ul");
    list.className = "file-list";
    for (const node of nodes) {
      const item = document.createElement("li");
      if (node.children) {
        item.className = "file-folder";
        const label = document.createElement("span");
        label.textContent = node.name;
        label.addEventListener("click", () => item.classList.toggle("collapsed"));
        item.append(label, this.renderNodes(node.children));
      } else {
        item.className = "file-entry";
        item.textContent = node.name;
        item.dataset.path = node.path;
        item.title = node.path;
        item.addEventListener("click", () => this.onOpen(node.path));
      }
      list.append(item);
    }
    return list;
  }
}
