// Wire types mirroring the analytics API exactly. The explorer holds no
// analytic logic: every number below is computed server-side.

export interface ScatterPoint {
  node_id: string;
  label: string;
  support: number;
  correlation: number;
  scent: number;
  patient_count: number;
  has_children: boolean;
}

export interface CohortSummary {
  engine_version: string;
  size: number;
  positives: number;
  prevalence: number;
  gender: Record<string, number>;
  ethnicity: Record<string, number>;
  race: Record<string, number>;
  age_decades: Record<string, number>;
}

export interface QueryResult {
  engine_version: string;
  session_id: string;
  matched: number;
  unmatched: number;
}

export interface ScatterResult {
  engine_version: string;
  session_id: string;
  budget: number;
  points: ScatterPoint[];
}

export interface SearchResult {
  engine_version: string;
  query: string;
  results: ScatterPoint[];
}

export interface SentinelPredicate {
  class: string;
  codes: string[];
  prefixes: string[];
}

export interface TemporalQuery {
  sentinel: SentinelPredicate;
  window_days: number;
}

export const ANY_ICD10_YEAR: TemporalQuery = {
  sentinel: { class: "ICD-10", codes: [], prefixes: [] },
  window_days: 365,
};
