// Shapes of the explorer service's JSON responses. These mirror the HTTP
// contract exactly; the UI never derives numbers beyond display transforms.

export type Value = string | number | boolean | null;
export type Row = Record<string, Value>;

export interface StudySummary {
  id: string;
  mode: string;
  direction: string;
  metric: string;
  status: string;
  budget: number | null;
  counts: Record<string, number>;
  last_seq: number;
}

export interface StudiesResponse {
  studies: StudySummary[];
}

export interface StudyDetail extends StudySummary {
  seed: number;
  repeats: number | null;
  grid_points: number | null;
  sampler: Record<string, Value> | null;
  pruner: Record<string, Value> | null;
  param_names: string[];
}

export interface TrialsResponse {
  columns: string[];
  rows: Row[];
}

export interface GroupedResponse {
  group_by: string[];
  agg: string;
  metric: string;
  groups: { key: Record<string, Value>; count: number; value: number | null }[];
}

export interface LeaderboardResponse {
  direction: string;
  metric: string;
  columns: string[];
  rows: Row[];
}

export interface PlotSeries {
  label: string;
  points: [Value, number][];
}

export interface PlotResponse {
  x: string;
  y: string;
  series: PlotSeries[];
}

export interface TrialDetail {
  trial_id: number;
  state: string;
  seed: number;
  bracket: number | null;
  config: Record<string, Value>;
  final_value: number | null;
  error: string | null;
  curve: [number, number][];
  cache_hits: Record<string, boolean>;
  rungs: number[];
}

export interface JournalEvent {
  seq: number;
  event: string;
  [key: string]: unknown;
}

export interface EventsResponse {
  events: JournalEvent[];
  last_seq: number;
}

/** Reserved marker for conditional parameters that were inactive. */
export const INACTIVE = "__inactive__";
