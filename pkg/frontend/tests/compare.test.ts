import { describe, expect, it } from "vitest";

import { ExplorerApi } from "../src/api.js";
import { ExplorerSession } from "../src/session.js";
import { createCompareView, PAGE_SIZE } from "../src/views/compare.js";
import { installFetch } from "./mock.js";

const BASE = "http://svc.test";

function ids(system: string, n: number): string[] {
  return Array.from({ length: n }, (_, i) => `${system}-img${i}`);
}

function compareRoute(perSystem: Record<string, string[]>) {
  return (url: URL) =>
    url.pathname === "/compare"
      ? {
          status: 200,
          body: {
            systems: (url.searchParams.get("systems") ?? "").split(","),
            profession: url.searchParams.get("profession"),
            ids: perSystem,
          },
        }
      : undefined;
}

describe("compare view", () => {
  it("renders two grids for two systems", async () => {
    installFetch([compareRoute({ sd14: ids("sd14", 5), dalle2: ids("dalle2", 3) })]);
    const view = createCompareView(new ExplorerApi(BASE), new ExplorerSession());
    await view.load(["sd14", "dalle2"], "CEO");
    const columns = view.element.querySelectorAll(".grid-column");
    expect(columns.length).toBe(2);
    expect(columns[0].getAttribute("data-system")).toBe("sd14");
    expect(columns[1].getAttribute("data-system")).toBe("dalle2");
    expect(columns[0].querySelectorAll("img").length).toBe(5);
    expect(columns[1].querySelectorAll("img").length).toBe(3);
  });

  it("lists all 146 professions in the selector", () => {
    installFetch([]);
    const view = createCompareView(new ExplorerApi(BASE), new ExplorerSession());
    const select = view.element.querySelector('[data-role="profession"]')!;
    expect(select.querySelectorAll("option").length).toBe(146);
  });

  it("shows a notice for a profession with no images", async () => {
    installFetch([compareRoute({ sd14: [], dalle2: [] })]);
    const view = createCompareView(new ExplorerApi(BASE), new ExplorerSession());
    await view.load(["sd14", "dalle2"], "astronaut");
    expect(view.element.querySelectorAll(".grid-column img").length).toBe(0);
    const notice = view.element.querySelector('[data-role="notice"]')!;
    expect(notice.textContent).toContain("astronaut");
  });

  it("advances the page offset by the page limit", async () => {
    installFetch([
      compareRoute({ sd14: ids("sd14", PAGE_SIZE * 2 + 3), dalle2: ids("dalle2", 2) }),
    ]);
    const view = createCompareView(new ExplorerApi(BASE), new ExplorerSession());
    await view.load(["sd14", "dalle2"], "cook");
    const firstImage = () =>
      view.element
        .querySelector('.grid-column[data-system="sd14"] img')!
        .getAttribute("data-id");
    expect(firstImage()).toBe("sd14-img0");
    view.nextPage();
    expect(firstImage()).toBe(`sd14-img${PAGE_SIZE}`);
    view.nextPage();
    expect(firstImage()).toBe(`sd14-img${PAGE_SIZE * 2}`);
    view.prevPage();
    expect(firstImage()).toBe(`sd14-img${PAGE_SIZE}`);
  });

  it("offers an inline retry banner on service errors", async () => {
    installFetch([
      (url) =>
        url.pathname === "/compare"
          ? { status: 500, body: { error: { code: 500, message: "boom" } } }
          : undefined,
    ]);
    const view = createCompareView(new ExplorerApi(BASE), new ExplorerSession());
    await view.load(["a", "b"], "cook");
    const banner = view.element.querySelector('[data-role="banner"]')!;
    expect(banner.textContent).toContain("boom");
    expect(banner.querySelector('[data-role="retry"]')).not.toBeNull();
  });
});
