// Endpoint base URL: ?api=... query param wins, then a global set by the
// host page, then the default local service address.

declare global {
  interface Window {
    TTI_AUDIT_API?: string;
  }
}

export const DEFAULT_API_BASE = "http://127.0.0.1:8787";

export function apiBase(): string {
  if (typeof window !== "undefined") {
    const fromQuery = new URLSearchParams(window.location.search).get("api");
    if (fromQuery) return fromQuery.replace(/\/$/, "");
    if (window.TTI_AUDIT_API) return window.TTI_AUDIT_API.replace(/\/$/, "");
  }
  return DEFAULT_API_BASE;
}
