/** Shapes of the /v1 API documents the client consumes. */

export type DesignValue = number | boolean | string;
export type Design = Record<string, DesignValue>;

export interface VariableDoc {
  name: string;
  kind: "continuous" | "discrete" | "binary" | "categorical";
  bounds?: [number, number];
  categories?: string[];
}

export interface ConstraintDoc {
  name: string;
  kind: "linear" | "blackbox";
  coefficients?: Record<string, number> | number[];
  offset?: number;
  program?: string;
  units?: string;
}

export interface ObjectiveDoc {
  name: string;
  sense?: "minimize" | "maximize";
}

export interface ProblemDoc {
  variables: VariableDoc[];
  constraints?: ConstraintDoc[];
  objectives: ObjectiveDoc[];
}

export interface RunConfigDoc {
  preset?: string;
  batch_size?: number;
  eval_mode?: string;
  budget?: number;
  n_init?: number;
  seed?: number;
  [key: string]: unknown;
}

export interface RecordJson {
  id: number;
  status: "pending" | "in_evaluation" | "evaluated" | "failed";
  source: string;
  iteration: number;
  design: Design;
  objectives: number[] | null;
  requested_at: string;
  started_at: string | null;
  finished_at: string | null;
  worker: string | null;
  note: string;
}

export interface SchedulerJson {
  running: boolean;
  mode?: string;
  in_flight?: number[];
  budget_remaining?: number;
  stopping?: string;
  draining?: boolean;
}

export interface StatusResponse {
  experiment: string;
  problem: ProblemDoc;
  run_config: RunConfigDoc;
  counts: Record<string, number>;
  records: RecordJson[];
  front_ids: number[];
  hypervolume_trajectory: [number, number][];
  reference_point: number[] | null;
  scheduler: SchedulerJson;
}

export interface PostedPrediction {
  mean: number;
  std: number;
}

export interface SuggestionEntry {
  record: RecordJson;
  predicted: PostedPrediction[] | null;
}

export interface SuggestionsResponse {
  suggestions: SuggestionEntry[];
}

export interface PredictResponse {
  predicted: { objective: string; mean: number; std: number }[];
}

export interface ApiErrorBody {
  error: string;
  detail: string;
}
