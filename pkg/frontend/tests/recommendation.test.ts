import { describe, expect, it } from "vitest";

import { renderRecommendation } from "../src/recommendation";
import type { RecommendationView } from "../src/types";

const VIEW: RecommendationView = {
  markdown: "# Recommendation\n...",
  thinking: "The strongest evidence points to gradient boosting.",
  sections: {
    best_solution: {
      description: "Gradient boosted trees over engineered claim features.",
      step_by_step: "1. Build features. 2. Train with early stopping.",
      coding_details: "Use a mainstream boosting library with default depth.",
      justification: "Two shortlisted papers report it beating deep baselines.",
      references: "arXiv:2301.00001, arXiv:2301.00002",
    },
    strong_baseline: {
      description: "Regularized logistic regression.",
      step_by_step: "1. One-hot encode. 2. Fit with cross-validated C.",
      coding_details: "Standard linear model implementation.",
      justification: "Well calibrated and hard to misconfigure.",
      references: "arXiv:2301.00003",
    },
  },
  strategy: "summaries",
  evidence_ids: ["2301.00001", "2301.00002"],
  lint: [{ kind: "vague_reference", message: "Baseline references one paper loosely." }],
  created_at: 1_700_000_300,
};

describe("renderRecommendation", () => {
  it("keeps the thinking stream collapsed by default", () => {
    const html = renderRecommendation(VIEW, "best_solution");
    expect(html).toContain("<details class=\"thinking\">");
    expect(html).not.toContain("<details class=\"thinking\" open");
    expect(html).toContain("gradient boosting");
  });

  it("renders the active solution tab with all five fields", () => {
    const html = renderRecommendation(VIEW, "best_solution");
    for (const label of [
      "Description",
      "Step by step",
      "Coding details",
      "Justification",
      "References",
    ]) {
      expect(html).toContain(`<h3>${label}</h3>`);
    }
    expect(html).toContain("Gradient boosted trees");
    expect(html).not.toContain("Regularized logistic regression");
  });

  it("switches content with the tab", () => {
    const html = renderRecommendation(VIEW, "strong_baseline");
    expect(html).toContain("Regularized logistic regression");
    expect(html).toContain('class="rec-tab active" data-rec-tab="strong_baseline"');
  });

  it("links evidence papers to arXiv", () => {
    const html = renderRecommendation(VIEW, "evidence");
    expect(html).toContain('href="https://arxiv.org/abs/2301.00001"');
    expect(html).toContain("arXiv:2301.00002");
  });

  it("lists lint findings", () => {
    const html = renderRecommendation(VIEW, "best_solution");
    expect(html).toContain("vague_reference");
    expect(html).toContain("Baseline references one paper loosely.");
  });

  it("omits the thinking block when empty", () => {
    const html = renderRecommendation({ ...VIEW, thinking: "" }, "best_solution");
    expect(html).not.toContain("<details");
  });
});
