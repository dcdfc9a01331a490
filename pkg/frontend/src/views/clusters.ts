// Region browser: per-cluster shares and top prompt phrases, example
// image strips, and a per-profession distribution bar view.

import type { ExplorerApi } from "../api.js";
import { clear, el, option } from "../dom.js";
import { PROFESSIONS } from "../professions.js";
import { RequestGate } from "../session.js";
import type { RegionSummary } from "../types.js";

const EXAMPLES_PER_STRIP = 8;

export interface ClustersView {
  element: HTMLElement;
  load(): Promise<void>;
  selectProfession(name: string): Promise<void>;
}

function phraseList(pairs: [string, number][], count: number): string {
  return pairs
    .slice(0, count)
    .map(([phrase]) => phrase)
    .join(", ");
}

export function createClustersView(
  api: ExplorerApi,
  onProbe?: (id: string) => void,
): ClustersView {
  const gate = new RequestGate();
  const professionSelect = el("select", { "data-role": "profession" });
  professionSelect.append(option("", "(select a profession)"));
  for (const profession of PROFESSIONS) professionSelect.append(option(profession));
  const banner = el("div", { class: "banner", "data-role": "banner" });
  const distributionHost = el("div", { class: "distribution", "data-role": "distribution" });
  const table = el("table", { class: "region-table" });
  const tbody = el("tbody", { "data-role": "rows" });
  table.append(
    el("thead", {}, [
      el("tr", {}, [
        el("th", {}, ["Region"]),
        el("th", {}, ["Share"]),
        el("th", {}, ["Top gender phrases"]),
        el("th", {}, ["Top ethnicity phrases"]),
        el("th", {}, ["Examples"]),
      ]),
    ]),
    tbody,
  );
  const element = el("section", { class: "clusters-view" }, [
    el("div", { class: "controls" }, [professionSelect]),
    banner,
    distributionHost,
    table,
  ]);

  async function loadStrip(cell: HTMLElement, cluster: number): Promise<void> {
    try {
      const examples = await api.clusterExamples(cluster, EXAMPLES_PER_STRIP);
      const strip = el("div", { class: "example-strip" });
      for (const id of examples.ids) {
        const img = el("img", { src: api.imageUrl(id), alt: id, class: "tile tile-small" });
        img.addEventListener("click", () => onProbe?.(id));
        strip.append(img);
      }
      cell.append(strip);
    } catch {
      cell.append(el("span", { class: "muted" }, ["(examples unavailable)"]));
    }
  }

  function renderRows(summaries: RegionSummary[]): void {
    clear(tbody);
    for (const summary of summaries) {
      const exampleCell = el("td", { class: "examples-cell" });
      const row = el("tr", { "data-cluster": String(summary.cluster) }, [
        el("td", {}, [String(summary.cluster)]),
        el("td", {}, [`${(summary.share * 100).toFixed(1)}%`]),
        el("td", {}, [phraseList(summary.top_gender, 2)]),
        el("td", {}, [phraseList(summary.top_ethnicity, 4)]),
        exampleCell,
      ]);
      tbody.append(row);
      if (summary.share > 0) {
        void loadStrip(exampleCell, summary.cluster);
      }
    }
  }

  async function load(): Promise<void> {
    const token = gate.issue();
    banner.textContent = "";
    try {
      const doc = await api.clusters();
      if (!gate.isCurrent(token)) return;
      renderRows(doc.summaries);
    } catch (err) {
      if (!gate.isCurrent(token)) return;
      clear(banner);
      banner.append(el("span", {}, [`failed to load regions: ${(err as Error).message} `]));
      const retry = el("button", { "data-role": "retry" }, ["Retry"]);
      retry.addEventListener("click", () => void load());
      banner.append(retry);
    }
  }

  async function selectProfession(name: string): Promise<void> {
    professionSelect.value = name;
    clear(distributionHost);
    if (!name) return;
    try {
      const doc = await api.distribution(name);
      distributionHost.append(el("h3", {}, [`"${name}" region distribution`]));
      for (const [system, shares] of Object.entries(doc.shares)) {
        const row = el("div", { class: "bar-row", "data-system": system });
        row.append(el("span", { class: "bar-label" }, [system]));
        const bars = el("div", { class: "bars" });
        shares.forEach((share, cluster) => {
          const bar = el("div", {
            class: "bar",
            "data-cluster": String(cluster),
            title: `region ${cluster}: ${(share * 100).toFixed(1)}%`,
            style: `height:${Math.round(share * 100)}px`,
          });
          bars.append(bar);
        });
        row.append(bars);
        distributionHost.append(row);
      }
    } catch (err) {
      distributionHost.append(
        el("span", { class: "muted" }, [
          `no distribution for "${name}": ${(err as Error).message}`,
        ]),
      );
    }
  }

  professionSelect.addEventListener("change", () => {
    void selectProfession(professionSelect.value);
  });

  return { element, load, selectProfession };
}
