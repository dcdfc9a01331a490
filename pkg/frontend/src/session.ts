// Exploration state: current selections plus the breadcrumb trail of
// visited probes. The trail grows only through user clicks and shrinks
// only through back navigation.

import type { NeighborMetric } from "./types.js";

export class ExplorerSession {
  systems: [string, string] | null = null;
  profession: string | null = null;
  metric: NeighborMetric = "bovw";
  k = 12;
  private trail: string[] = [];

  get probe(): string | null {
    return this.trail.length ? this.trail[this.trail.length - 1] : null;
  }

  get breadcrumbs(): readonly string[] {
    return this.trail;
  }

  /** User clicked an image (or submitted a probe): push onto the trail. */
  activateProbe(id: string): void {
    this.trail.push(id);
  }

  /** Back navigation: pop the current probe, return the one underneath. */
  back(): string | null {
    this.trail.pop();
    return this.probe;
  }
}

/** Discards responses that arrive after a newer request was issued. */
export class RequestGate {
  private current = 0;

  issue(): number {
    return ++this.current;
  }

  isCurrent(token: number): boolean {
    return token === this.current;
  }
}
