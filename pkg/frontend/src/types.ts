// Wire types for the co-modeler HTTP API.

export interface EventRecord {
  seq: number;
  project_id: string;
  kind: string;
  payload: Record<string, unknown>;
  author: string;
  server_time: string;
}

export interface LabelDoc {
  id: string;
  name: string;
  deleted: boolean;
}

export interface ResultDoc {
  distribution: Record<string, number>;
  top_label_id: string;
  top_confidence: number;
  correct?: boolean | null;
}

export interface ProjectDoc {
  id: string;
  name: string;
  created_at: string;
  head_seq: number;
  labels: LabelDoc[];
  sample_count: number;
  test_sample_count: number;
  current_model: { version: number; label_ids: string[] } | null;
  high_score: number | null;
}

export interface TestSampleDoc {
  id: string;
  image_sha256: string;
  author: string;
  added_at: string;
  expected_label_id: string | null;
  latest_result: ResultDoc | null;
  latest_model_version: number | null;
  correct: boolean | null;
  badge?: string;
}

export interface GameSessionDoc {
  id: string;
  project_id: string;
  model_version: number;
  rng_seed: number;
  duration_s: number;
  round_s: number;
  round_count: number;
  state: "running" | "finished";
  time_left_s: number;
  current_round: {
    index: number;
    target_label_id: string;
    target_name: string;
    ends_in_s: number;
  } | null;
  total_score: number | null;
}

export interface GameSummaryDoc {
  session_id: string;
  total_score: number;
  round_count: number;
  high_score: number;
  labels: {
    label_id: string;
    name: string;
    rounds_played: number;
    average_confidence_pct: number;
  }[];
  rounds: {
    index: number;
    target_label_id: string;
    target_name: string;
    top_label_id: string | null;
    top_name: string | null;
    score: number;
    correct: boolean;
  }[];
}

export interface DatasetReportDoc {
  labels: { label_id: string; name: string; count: number }[];
  total: number;
  imbalance_ratio: number | null;
}
