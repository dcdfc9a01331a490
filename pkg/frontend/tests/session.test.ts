import { describe, expect, it } from "vitest";

import { ExplorerSession, RequestGate } from "../src/session.js";

describe("ExplorerSession breadcrumbs", () => {
  it("grows only by probe activations and pops on back", () => {
    const session = new ExplorerSession();
    expect(session.probe).toBeNull();
    session.activateProbe("a");
    session.activateProbe("b");
    session.activateProbe("c");
    expect(session.breadcrumbs).toEqual(["a", "b", "c"]);
    expect(session.probe).toBe("c");
    expect(session.back()).toBe("b");
    expect(session.breadcrumbs).toEqual(["a", "b"]);
    expect(session.back()).toBe("a");
    expect(session.back()).toBeNull();
    expect(session.breadcrumbs).toEqual([]);
  });

  it("defaults to the bovw metric with k=12", () => {
    const session = new ExplorerSession();
    expect(session.metric).toBe("bovw");
    expect(session.k).toBe(12);
  });
});

describe("RequestGate", () => {
  it("marks superseded tokens stale", () => {
    const gate = new RequestGate();
    const first = gate.issue();
    expect(gate.isCurrent(first)).toBe(true);
    const second = gate.issue();
    expect(gate.isCurrent(first)).toBe(false);
    expect(gate.isCurrent(second)).toBe(true);
  });
});
