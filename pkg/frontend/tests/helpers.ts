/** Shared fixtures for frontend tests. */

import type {
  AnswerEntry,
  AnswerValue,
  Schema,
  SessionView,
  Suggestion,
  SuggestionSet,
  ToolInfo,
} from "../src/types";

export const SCHEMA: Schema = {
  sections: [
    {
      name: "Introduction",
      questions: [
        {
          id: "intro_goal",
          text: "What is the goal of the project?",
          answer_kind: "free_text",
          options: [],
          required: true,
          help_text: "One or two sentences.",
          tags: [],
        },
      ],
    },
    {
      name: "Understanding Data",
      questions: [
        {
          id: "data_source",
          text: "Where does the data come from?",
          answer_kind: "free_text",
          options: [],
          required: false,
          help_text: null,
          tags: ["data_availability"],
        },
      ],
    },
    {
      name: "Evaluation",
      questions: [
        {
          id: "eval_metric",
          text: "Which metric matters most?",
          answer_kind: "single_choice",
          options: ["accuracy", "f1", "auc_roc"],
          required: false,
          help_text: null,
          tags: [],
        },
      ],
    },
    {
      name: "Task Mechanism",
      questions: [
        {
          id: "mech_online",
          text: "Does the system run online?",
          answer_kind: "boolean",
          options: [],
          required: false,
          help_text: null,
          tags: [],
        },
      ],
    },
    {
      name: "Constraints",
      questions: [
        {
          id: "constraint_latency_ms",
          text: "Latency budget in milliseconds?",
          answer_kind: "numeric",
          options: [],
          required: false,
          help_text: null,
          tags: [],
        },
      ],
    },
    {
      name: "Miscellaneous",
      questions: [
        {
          id: "misc_tags",
          text: "Relevant areas?",
          answer_kind: "multi_choice",
          options: ["cv", "nlp", "tabular"],
          required: false,
          help_text: null,
          tags: [],
        },
      ],
    },
  ],
};

export function makeSession(
  answers: Record<string, AnswerEntry> = {},
  overrides: Partial<SessionView> = {},
): SessionView {
  return {
    session_id: "sess-0001",
    stage: "created",
    created_at: 1_700_000_000,
    updated_at: 1_700_000_000,
    project_description: "",
    answers,
    missing_required: ["intro_goal"],
    suggestions: null,
    shortlist: null,
    recommendation: null,
    feedback_count: 0,
    jobs: [],
    ...overrides,
  };
}

export function entry(value: AnswerValue, source = "user"): AnswerEntry {
  return { value, source, updated_at: 1_700_000_000 };
}

export function makeSuggestion(overrides: Partial<Suggestion> = {}): Suggestion {
  return {
    question_id: "data_source",
    proposed_value: "internal warehouse exports",
    provenance: "catalog",
    catalog_entries: ["claims_2023"],
    rationale: "The catalog lists a matching claims dataset.",
    ...overrides,
  };
}

export function makeSuggestionSet(suggestions: Suggestion[]): SuggestionSet {
  return { created_at: 1_700_000_100, partial: false, suggestions };
}

export const TOOLS: ToolInfo[] = [
  {
    name: "tabular_baseline",
    description: "Majority class or mean baseline for tabular tasks.",
    task_kinds: ["binary_classification", "multiclass_classification", "regression"],
    params: [],
  },
  {
    name: "tabular_linear",
    description: "Linear model trained with gradient descent.",
    task_kinds: ["binary_classification", "multiclass_classification", "regression"],
    params: [
      {
        name: "learning_rate",
        kind: "float",
        default: 0.1,
        minimum: 1e-6,
        maximum: 10,
        required: false,
      },
      { name: "epochs", kind: "int", default: 200, minimum: 1, maximum: 10000, required: false },
    ],
  },
];
