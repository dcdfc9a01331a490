// Click-through nearest-neighbor exploration by BoVW similarity or
// colorfulness, with a breadcrumb trail of visited probes.

import { ApiError, type ExplorerApi } from "../api.js";
import { clear, el, toast } from "../dom.js";
import type { ExplorerSession } from "../session.js";
import { RequestGate } from "../session.js";
import type { KnnDoc, NeighborMetric } from "../types.js";

export interface KnnView {
  element: HTMLElement;
  /** User-driven probe activation; pushes the trail only on success. */
  explore(id: string): Promise<void>;
  setMetric(metric: NeighborMetric): Promise<void>;
  back(): Promise<void>;
}

export function createKnnView(api: ExplorerApi, session: ExplorerSession): KnnView {
  const gate = new RequestGate();
  const probeInput = el("input", {
    type: "text",
    placeholder: "image id",
    "data-role": "probe-input",
  });
  const metricSelect = el("select", { "data-role": "metric" });
  for (const metric of ["bovw", "colorfulness"]) {
    const opt = el("option", { value: metric });
    opt.textContent = metric;
    metricSelect.append(opt);
  }
  const kInput = el("input", { type: "number", value: "12", min: "1", "data-role": "k" });
  const goButton = el("button", { "data-role": "go" }, ["Explore"]);
  const backButton = el("button", { "data-role": "back" }, ["Back"]);
  const breadcrumbBar = el("nav", { class: "breadcrumbs", "data-role": "breadcrumbs" });
  const panel = el("div", { class: "knn-panel", "data-role": "panel" });
  const element = el("section", { class: "knn-view" }, [
    el("div", { class: "controls" }, [probeInput, metricSelect, kInput, goButton, backButton]),
    breadcrumbBar,
    panel,
  ]);

  function renderBreadcrumbs(): void {
    clear(breadcrumbBar);
    session.breadcrumbs.forEach((id, index) => {
      const isLast = index === session.breadcrumbs.length - 1;
      const crumb = el(
        "span",
        { class: isLast ? "crumb crumb-current" : "crumb", "data-id": id },
        [id],
      );
      breadcrumbBar.append(crumb);
      if (!isLast) breadcrumbBar.append(el("span", { class: "crumb-sep" }, [" / "]));
    });
  }

  /** Fetch neighbors; returns null (after a toast) on handled failure or
   * when a newer request superseded this one. */
  async function lookup(id: string): Promise<KnnDoc | null> {
    const token = gate.issue();
    try {
      const doc = await api.knn(id, session.metric, session.k);
      return gate.isCurrent(token) ? doc : null;
    } catch (err) {
      if (!gate.isCurrent(token)) return null;
      if (err instanceof ApiError && err.status === 404) {
        toast(element, `unknown probe: ${err.message}`);
      } else {
        toast(element, `neighbor lookup failed: ${(err as Error).message}`);
      }
      return null;
    }
  }

  function render(doc: KnnDoc): void {
    clear(panel);
    panel.append(
      el("figure", { class: "probe-tile" }, [
        el("img", { src: api.imageUrl(doc.probe), alt: doc.probe, class: "tile tile-probe" }),
        el("figcaption", {}, [`probe: ${doc.probe}`]),
      ]),
    );
    const neighborHost = el("div", { class: "neighbor-grid", "data-role": "neighbors" });
    for (const [id, score] of doc.neighbors) {
      const tile = el("figure", { class: "neighbor-tile", "data-id": id });
      const img = el("img", { src: api.imageUrl(id), alt: id, class: "tile" });
      img.addEventListener("click", () => void explore(id));
      tile.append(img, el("figcaption", {}, [`${id} (${score.toFixed(4)})`]));
      neighborHost.append(tile);
    }
    panel.append(neighborHost);
    renderBreadcrumbs();
  }

  async function explore(id: string): Promise<void> {
    const doc = await lookup(id);
    if (doc === null) return; // toast shown, state unchanged
    session.activateProbe(id);
    probeInput.value = id;
    render(doc);
  }

  async function setMetric(metric: NeighborMetric): Promise<void> {
    session.metric = metric;
    metricSelect.value = metric;
    const probe = session.probe;
    if (probe === null) return;
    const doc = await lookup(probe); // probe preserved, fresh request
    if (doc !== null) render(doc);
  }

  async function back(): Promise<void> {
    const previous = session.back();
    probeInput.value = previous ?? "";
    if (previous === null) {
      clear(panel);
      renderBreadcrumbs();
      return;
    }
    const doc = await lookup(previous);
    if (doc !== null) render(doc);
    else renderBreadcrumbs();
  }

  goButton.addEventListener("click", () => {
    const id = probeInput.value.trim();
    if (id) void explore(id);
  });
  backButton.addEventListener("click", () => void back());
  metricSelect.addEventListener("change", () => {
    void setMetric(metricSelect.value as NeighborMetric);
  });
  kInput.addEventListener("change", () => {
    const k = parseInt(kInput.value, 10);
    if (Number.isFinite(k) && k >= 1) session.k = k;
  });

  return { element, explore, setMetric, back };
}
