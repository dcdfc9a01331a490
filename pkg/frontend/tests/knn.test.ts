import { describe, expect, it } from "vitest";

import { ExplorerApi } from "../src/api.js";
import { ExplorerSession } from "../src/session.js";
import { createKnnView } from "../src/views/knn.js";
import { deferred, installFetch, knnDoc } from "./mock.js";

const BASE = "http://svc.test";

function knnRoute(known: (id: string) => boolean) {
  return (url: URL) => {
    if (url.pathname !== "/knn") return undefined;
    const id = url.searchParams.get("id")!;
    if (!known(id)) {
      return { status: 404, body: { error: { code: 404, message: `unknown image id '${id}'` } } };
    }
    return {
      status: 200,
      body: knnDoc(id, url.searchParams.get("by")!, Number(url.searchParams.get("k"))),
    };
  };
}

describe("knn explorer", () => {
  it("a 3-click chain produces breadcrumb length 3", async () => {
    installFetch([knnRoute(() => true)]);
    const session = new ExplorerSession();
    const view = createKnnView(new ExplorerApi(BASE), session);
    await view.explore("seed-img");
    const clickFirstNeighbor = async () => {
      const tile = view.element.querySelector(".neighbor-tile img")!;
      (tile as HTMLElement).click();
      await new Promise((r) => setTimeout(r, 0));
    };
    await clickFirstNeighbor();
    await clickFirstNeighbor();
    expect(session.breadcrumbs.length).toBe(3);
    expect(session.breadcrumbs[0]).toBe("seed-img");
    expect(session.breadcrumbs[1]).toBe("seed-img-nb0");
    expect(session.breadcrumbs[2]).toBe("seed-img-nb0-nb0");
    const crumbs = view.element.querySelectorAll(".crumb");
    expect(crumbs.length).toBe(3);
  });

  it("switching metric re-queries with the same probe", async () => {
    const log = installFetch([knnRoute(() => true)]);
    const session = new ExplorerSession();
    const view = createKnnView(new ExplorerApi(BASE), session);
    await view.explore("probe-1");
    expect(log.urls.at(-1)).toContain("by=bovw");
    await view.setMetric("colorfulness");
    expect(log.urls.at(-1)).toContain("id=probe-1");
    expect(log.urls.at(-1)).toContain("by=colorfulness");
    expect(session.probe).toBe("probe-1");
    expect(session.breadcrumbs.length).toBe(1); // metric switch is not a click
  });

  it("renders neighbor scores in API order (non-increasing)", async () => {
    installFetch([knnRoute(() => true)]);
    const session = new ExplorerSession();
    session.k = 5;
    const view = createKnnView(new ExplorerApi(BASE), session);
    await view.explore("p");
    const captions = [...view.element.querySelectorAll(".neighbor-tile figcaption")].map(
      (n) => n.textContent ?? "",
    );
    const scores = captions.map((c) => Number(c.match(/\(([\d.]+)\)/)![1]));
    expect(scores.length).toBe(5);
    for (let i = 1; i < scores.length; i += 1) {
      expect(scores[i]).toBeLessThanOrEqual(scores[i - 1]);
    }
  });

  it("404 probe shows a toast and leaves state unchanged", async () => {
    installFetch([knnRoute((id) => id !== "ghost")]);
    const session = new ExplorerSession();
    const view = createKnnView(new ExplorerApi(BASE), session);
    await view.explore("real-img");
    expect(session.breadcrumbs.length).toBe(1);
    await view.explore("ghost");
    expect(session.breadcrumbs.length).toBe(1);
    expect(session.probe).toBe("real-img");
    const toastNode = view.element.querySelector(".toast");
    expect(toastNode).not.toBeNull();
    expect(toastNode!.textContent).toContain("unknown probe");
    // the rendered panel still shows the previous probe
    expect(view.element.querySelector(".probe-tile figcaption")!.textContent).toContain(
      "real-img",
    );
  });

  it("back pops the trail and reloads the previous probe", async () => {
    installFetch([knnRoute(() => true)]);
    const session = new ExplorerSession();
    const view = createKnnView(new ExplorerApi(BASE), session);
    await view.explore("first");
    await view.explore("second");
    expect(session.breadcrumbs.length).toBe(2);
    await view.back();
    expect(session.breadcrumbs).toEqual(["first"]);
    expect(view.element.querySelector(".probe-tile figcaption")!.textContent).toContain(
      "first",
    );
  });

  it("discards stale responses from superseded probes", async () => {
    const slow = deferred<Response>();
    let calls = 0;
    globalThis.fetch = (async (input: RequestInfo | URL) => {
      const url = new URL(String(input));
      const id = url.searchParams.get("id")!;
      calls += 1;
      if (calls === 1) return slow.promise; // first request hangs
      return new Response(
        JSON.stringify(knnDoc(id, "bovw", 3)),
        { status: 200, headers: { "Content-Type": "application/json" } },
      );
    }) as typeof fetch;

    const session = new ExplorerSession();
    const view = createKnnView(new ExplorerApi(BASE), session);
    const firstLoad = view.explore("slow-probe");
    await view.explore("fast-probe");
    expect(view.element.querySelector(".probe-tile figcaption")!.textContent).toContain(
      "fast-probe",
    );
    // now the slow response lands; it must not clobber the newer panel
    slow.resolve(
      new Response(JSON.stringify(knnDoc("slow-probe", "bovw", 3)), {
        status: 200,
        headers: { "Content-Type": "application/json" },
      }),
    );
    await firstLoad;
    expect(view.element.querySelector(".probe-tile figcaption")!.textContent).toContain(
      "fast-probe",
    );
    expect(session.breadcrumbs).toEqual(["fast-probe"]);
  });
});
