// Small DOM construction helpers; no framework.

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function option(value: string, label = value): HTMLOptionElement {
  const opt = el("option", { value });
  opt.textContent = label;
  return opt;
}

/** Transient notice; also used for error toasts. */
export function toast(host: HTMLElement, message: string, kind = "error"): void {
  const note = el("div", { class: `toast toast-${kind}`, role: "alert" });
  note.textContent = message;
  host.append(note);
  setTimeout(() => note.remove(), 4000);
}
