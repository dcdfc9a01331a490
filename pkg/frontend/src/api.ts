// Thin typed client over the explorer service. The UI never computes
// metrics itself; every number rendered comes from these payloads.

import type {
  ClusterExamples,
  ClustersDoc,
  CompareDoc,
  DistributionDoc,
  DiversityDoc,
  ImagePage,
  KnnDoc,
  NeighborMetric,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ExplorerApi {
  constructor(readonly base: string) {}

  imageUrl(id: string): string {
    return `${this.base}/images/${encodeURIComponent(id)}`;
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(`${this.base}${path}`);
    if (!resp.ok) {
      let message = `HTTP ${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: { message?: string } };
        if (body.error?.message) message = body.error.message;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(resp.status, message);
    }
    return (await resp.json()) as T;
  }

  clusters(): Promise<ClustersDoc> {
    return this.get<ClustersDoc>("/clusters");
  }

  clusterExamples(cluster: number, limit = 8): Promise<ClusterExamples> {
    return this.get<ClusterExamples>(`/clusters/${cluster}/examples?limit=${limit}`);
  }

  compare(systems: [string, string], profession: string): Promise<CompareDoc> {
    const pair = systems.map(encodeURIComponent).join(",");
    return this.get<CompareDoc>(
      `/compare?systems=${pair}&profession=${encodeURIComponent(profession)}`,
    );
  }

  knn(id: string, by: NeighborMetric, k: number): Promise<KnnDoc> {
    return this.get<KnnDoc>(`/knn?id=${encodeURIComponent(id)}&by=${by}&k=${k}`);
  }

  images(
    filters: Partial<Record<"system" | "profession" | "gender" | "ethnicity", string>>,
    limit = 60,
    offset = 0,
  ): Promise<ImagePage> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value) params.set(key, value);
    }
    params.set("limit", String(limit));
    params.set("offset", String(offset));
    return this.get<ImagePage>(`/images?${params.toString()}`);
  }

  distribution(profession: string, system?: string): Promise<DistributionDoc> {
    const suffix = system ? `?system=${encodeURIComponent(system)}` : "";
    return this.get<DistributionDoc>(
      `/professions/${encodeURIComponent(profession)}/distribution${suffix}`,
    );
  }

  report<T = unknown>(name: "diversity" | "quintiles" | "markers"): Promise<T> {
    return this.get<T>(`/reports/${name}`);
  }

  /** System names, discovered from the diversity report's per-system keys. */
  async systems(): Promise<string[]> {
    const doc = await this.report<DiversityDoc>("diversity");
    const names = new Set<string>();
    for (const dataset of ["identities", "professions"]) {
      const section = doc[dataset];
      if (section && typeof section === "object") {
        for (const name of Object.keys(section)) names.add(name);
      }
    }
    return [...names].sort();
  }
}
