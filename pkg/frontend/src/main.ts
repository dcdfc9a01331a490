// Application shell: three tabs sharing one session and one API client.

import { ExplorerApi } from "./api.js";
import { apiBase } from "./config.js";
import { clear, el } from "./dom.js";
import { ExplorerSession } from "./session.js";
import { createClustersView } from "./views/clusters.js";
import { createCompareView } from "./views/compare.js";
import { createKnnView } from "./views/knn.js";

export function mountApp(root: HTMLElement, base = apiBase()): void {
  const api = new ExplorerApi(base);
  const session = new ExplorerSession();

  const knn = createKnnView(api, session);
  const compare = createCompareView(api, session, (id) => {
    void knn.explore(id);
    activate("explore");
  });
  const clusters = createClustersView(api, (id) => {
    void knn.explore(id);
    activate("explore");
  });

  const tabs: Record<string, HTMLElement> = {
    compare: compare.element,
    explore: knn.element,
    clusters: clusters.element,
  };
  const nav = el("nav", { class: "tabs" });
  const body = el("main", { class: "tab-body" });
  const buttons: Record<string, HTMLButtonElement> = {};
  for (const name of Object.keys(tabs)) {
    const button = el("button", { class: "tab", "data-tab": name }, [name]);
    button.addEventListener("click", () => activate(name));
    buttons[name] = button;
    nav.append(button);
  }

  function activate(name: string): void {
    clear(body);
    body.append(tabs[name]);
    for (const [tab, button] of Object.entries(buttons)) {
      button.className = tab === name ? "tab tab-active" : "tab";
    }
  }

  clear(root);
  root.append(
    el("header", {}, [
      el("h1", {}, ["tti-audit explorer"]),
      el("span", { class: "muted" }, [`service: ${base}`]),
    ]),
    nav,
    body,
  );
  activate("compare");

  void api
    .systems()
    .then((names) => compare.setSystems(names))
    .catch(() => {
      // systems stay empty; the compare selectors are simply unpopulated
    });
  void clusters.load();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountApp(document.getElementById("app") as HTMLElement);
}
