/** Tiny element builder; enough DOM sugar for a two-view page. */

type Child = Node | string;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Child[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "text") {
      node.textContent = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function find<T extends HTMLElement>(root: ParentNode,
                                            role: string): T {
  const node = root.querySelector(`[data-role="${role}"]`);
  if (node === null) throw new Error(`missing element with role ${role}`);
  return node as T;
}
