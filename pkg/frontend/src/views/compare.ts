// Side-by-side comparison: the same profession prompt across two systems.

import type { ExplorerApi } from "../api.js";
import { clear, el, option } from "../dom.js";
import { PROFESSIONS } from "../professions.js";
import type { ExplorerSession } from "../session.js";
import { RequestGate } from "../session.js";

export const PAGE_SIZE = 12;

interface GridState {
  system: string;
  ids: string[];
  offset: number;
}

export interface CompareView {
  element: HTMLElement;
  setSystems(names: string[]): void;
  load(systems: [string, string], profession: string): Promise<void>;
  nextPage(): void;
  prevPage(): void;
}

export function createCompareView(
  api: ExplorerApi,
  session: ExplorerSession,
  onProbe?: (id: string) => void,
): CompareView {
  const gate = new RequestGate();
  const systemA = el("select", { class: "system-select", "data-role": "system-a" });
  const systemB = el("select", { class: "system-select", "data-role": "system-b" });
  const professionSelect = el("select", { "data-role": "profession" });
  for (const profession of PROFESSIONS) {
    professionSelect.append(option(profession));
  }
  const loadButton = el("button", { "data-role": "load" }, ["Compare"]);
  const notice = el("div", { class: "notice", "data-role": "notice" });
  const banner = el("div", { class: "banner", "data-role": "banner" });
  const gridHost = el("div", { class: "compare-grids" });
  const pager = el("div", { class: "pager" });
  const prevButton = el("button", { "data-role": "prev" }, ["Prev"]);
  const nextButton = el("button", { "data-role": "next" }, ["Next"]);
  const pageLabel = el("span", { "data-role": "page" });
  pager.append(prevButton, pageLabel, nextButton);

  const element = el("section", { class: "compare-view" }, [
    el("div", { class: "controls" }, [
      systemA,
      el("span", {}, [" vs "]),
      systemB,
      professionSelect,
      loadButton,
    ]),
    banner,
    notice,
    gridHost,
    pager,
  ]);

  let grids: [GridState, GridState] | null = null;

  function renderGrids(): void {
    clear(gridHost);
    if (!grids) return;
    for (const grid of grids) {
      const column = el("div", { class: "grid-column", "data-system": grid.system });
      column.append(el("h3", {}, [grid.system]));
      const images = el("div", { class: "grid-images" });
      const page = grid.ids.slice(grid.offset, grid.offset + PAGE_SIZE);
      for (const id of page) {
        const img = el("img", {
          src: api.imageUrl(id),
          alt: id,
          title: id,
          class: "tile",
          "data-id": id,
        });
        img.addEventListener("click", () => onProbe?.(id));
        images.append(img);
      }
      column.append(images);
      column.append(
        el("div", { class: "grid-count" }, [`${grid.ids.length} images`]),
      );
      gridHost.append(column);
    }
    const pageIndex = grids[0] ? Math.floor(grids[0].offset / PAGE_SIZE) + 1 : 1;
    pageLabel.textContent = `page ${pageIndex}`;
  }

  function setOffsets(change: number): void {
    if (!grids) return;
    for (const grid of grids) {
      const next = grid.offset + change;
      if (next >= 0 && (next < grid.ids.length || change < 0)) {
        grid.offset = next;
      }
    }
    renderGrids();
  }

  async function load(systems: [string, string], profession: string): Promise<void> {
    session.systems = systems;
    session.profession = profession;
    const token = gate.issue();
    banner.textContent = "";
    notice.textContent = "";
    try {
      const doc = await api.compare(systems, profession);
      if (!gate.isCurrent(token)) return;
      grids = [
        { system: systems[0], ids: doc.ids[systems[0]] ?? [], offset: 0 },
        { system: systems[1], ids: doc.ids[systems[1]] ?? [], offset: 0 },
      ];
      if (grids.every((g) => g.ids.length === 0)) {
        notice.textContent = `no images for "${profession}"`;
      }
      renderGrids();
    } catch (err) {
      if (!gate.isCurrent(token)) return;
      clear(banner);
      banner.append(
        el("span", {}, [`failed to load comparison: ${(err as Error).message} `]),
      );
      const retry = el("button", { "data-role": "retry" }, ["Retry"]);
      retry.addEventListener("click", () => void load(systems, profession));
      banner.append(retry);
    }
  }

  loadButton.addEventListener("click", () => {
    if (systemA.value && systemB.value && professionSelect.value) {
      void load([systemA.value, systemB.value], professionSelect.value);
    }
  });
  nextButton.addEventListener("click", () => setOffsets(PAGE_SIZE));
  prevButton.addEventListener("click", () => setOffsets(-PAGE_SIZE));

  return {
    element,
    setSystems(names: string[]): void {
      clear(systemA);
      clear(systemB);
      for (const name of names) {
        systemA.append(option(name));
        systemB.append(option(name));
      }
      if (names.length > 1) systemB.selectedIndex = 1;
    },
    load,
    nextPage: () => setOffsets(PAGE_SIZE),
    prevPage: () => setOffsets(-PAGE_SIZE),
  };
}
