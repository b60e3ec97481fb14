/**
 * Type mirrors of the consult-service HTTP API payloads.
 *
 * Field names match the JSON wire format exactly, so API responses can be
 * used as-is without mapping layers.
 */

export type AnswerValue = string | number | boolean | string[];

export interface Question {
  id: string;
  text: string;
  answer_kind: "free_text" | "single_choice" | "multi_choice" | "boolean" | "numeric";
  options: string[];
  required: boolean;
  help_text: string | null;
  tags: string[];
}

export interface Section {
  name: string;
  questions: Question[];
}

export interface Schema {
  sections: Section[];
}

export interface AnswerEntry {
  value: AnswerValue;
  source: string;
  updated_at: number;
}

export interface Suggestion {
  question_id: string;
  proposed_value: AnswerValue;
  provenance: string;
  catalog_entries: string[];
  rationale: string;
}

export interface SuggestionSet {
  created_at: number;
  partial: boolean;
  suggestions: Suggestion[];
}

export interface JobRecord {
  job_id: string;
  kind: string;
  status: "queued" | "running" | "succeeded" | "failed";
  params: Record<string, unknown>;
  result_uri: string;
  error: string | null;
  warnings: string[];
  created_at: number;
  started_at: number | null;
  finished_at: number | null;
}

export interface RecommendationMeta {
  job_id: string;
  strategy: string;
  evidence_ids: string[];
  lint: LintFinding[];
  created_at: number;
}

export interface SessionView {
  session_id: string;
  stage: "created" | "answered" | "recommended" | "prototyped";
  created_at: number;
  updated_at: number;
  project_description: string;
  answers: Record<string, AnswerEntry>;
  missing_required: string[];
  suggestions: SuggestionSet | null;
  shortlist: { arxiv_id: string; title: string }[] | null;
  recommendation: RecommendationMeta | null;
  feedback_count: number;
  jobs: JobRecord[];
}

export interface RecSectionView {
  description: string;
  step_by_step: string;
  coding_details: string;
  justification: string;
  references: string;
}

export interface LintFinding {
  kind: string;
  message: string;
}

export interface RecommendationView {
  markdown: string;
  thinking: string;
  sections: {
    best_solution: RecSectionView;
    strong_baseline: RecSectionView;
  };
  strategy: string;
  evidence_ids: string[];
  lint: LintFinding[];
  created_at: number;
}

export interface ToolParam {
  name: string;
  kind: "int" | "float" | "string";
  default: unknown;
  minimum: number | null;
  maximum: number | null;
  required: boolean;
}

export interface ToolInfo {
  name: string;
  description: string;
  task_kinds: string[];
  params: ToolParam[];
}

export interface ToolResult {
  tool_name: string;
  status: string;
  model_artifact_uri: string;
  predictions: { unique_id: string; prediction: unknown }[];
  metrics: Record<string, number> | null;
  log_uri: string;
  warnings: string[];
  failure_reason: string | null;
}

export interface FieldError {
  field: string;
  message: string;
}

export interface ErrorBody {
  code: string;
  message: string;
  details: FieldError[];
}

export interface SaveAnswersRequest {
  answers?: Record<string, AnswerValue>;
  project_description?: string;
  accepted_suggestions?: string[];
  edits?: Record<string, AnswerValue>;
}

export interface RecommendationRequest {
  strategy?: "abstract_only" | "full_paper" | "summaries";
  k?: number;
  n?: number;
  full_paper_ids?: string[];
  full_paper_mode?: "pdf" | "text";
  force?: boolean;
}

export interface PrototypeRequest {
  tool_name: string;
  task: string;
  input_uri: string;
  output_uri?: string;
  hyperparameters?: Record<string, unknown>;
  metric_names?: string[];
  compute_profile?: string;
}

export interface JobSubmission {
  job_id: string;
  status: string;
}
