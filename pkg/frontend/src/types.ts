// Payload shapes of the explorer API (read-only GET endpoints).

export type NeighborMetric = "bovw" | "colorfulness";

export interface RegionSummary {
  cluster: number;
  share: number; // fraction of the evaluated dataset
  top_gender: [string, number][];
  top_ethnicity: [string, number][];
}

export interface ClustersDoc {
  n_clusters: number;
  summaries: RegionSummary[];
}

export interface CompareDoc {
  systems: string[];
  profession: string;
  ids: Record<string, string[]>;
}

export interface KnnDoc {
  probe: string;
  by: NeighborMetric;
  neighbors: [string, number][];
}

export interface ImagePage {
  total: number;
  limit: number;
  offset: number;
  ids: string[];
}

export interface ClusterExamples {
  cluster: number;
  total: number;
  ids: string[];
}

export interface DistributionDoc {
  profession: string;
  shares: Record<string, number[]>;
}

export interface DiversityScore {
  entropy_bits: number;
  ci_low: number;
  ci_high: number;
  n: number;
  level: number;
}

export type DiversityDoc = Record<string, Record<string, DiversityScore>> & {
  config_hash?: string;
};
