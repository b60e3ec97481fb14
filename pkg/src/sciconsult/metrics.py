"""Evaluation metrics for the prototype tools.

Formulas:
  accuracy  = correct / total
  precision = TP / (TP + FP)          (0.0 + warning when no predicted positives)
  recall    = TP / (TP + FN)          (0.0 + warning when no actual positives)
  f1        = 2PR / (P + R)           (0.0 + warning when P + R == 0)
  auc_roc   = P(score_pos > score_neg) with ties counting 1/2, computed via
              average ranks (equal to the concordant-pair fraction)
  rmse      = sqrt(mean((pred - true)^2))
  mae       = mean(|pred - true|)
  r2        = 1 - SS_res / SS_tot     (0.0 + warning when SS_tot == 0)

Binary metrics treat the lexicographically greater label as positive unless
positive_label is given. Ill-defined cases return 0.0 and set a warning flag
instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MetricInputError

CLASSIFICATION_METRICS = ("accuracy", "precision", "recall", "f1", "auc_roc")
REGRESSION_METRICS = ("rmse", "mae", "r2")
BINARY_ONLY_METRICS = ("precision", "recall", "f1", "auc_roc")

METRICS_BY_TASK = {
    "regression": REGRESSION_METRICS,
    "binary_classification": CLASSIFICATION_METRICS,
    "multiclass_classification": ("accuracy",),
}


@dataclass
class MetricReport:
    values: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _align(predictions: dict, ground_truth: dict) -> list:
    if set(predictions) != set(ground_truth):
        missing = sorted(set(ground_truth) - set(predictions))[:3]
        extra = sorted(set(predictions) - set(ground_truth))[:3]
        raise MetricInputError(
            f"predictions and ground truth are misaligned (missing={missing}, extra={extra})"
        )
    if not predictions:
        raise MetricInputError("empty prediction set")
    return sorted(predictions)


def auc_roc(scores_pos, scores_neg) -> float:
    """Rank-based AUC: U statistic over positives divided by n_pos * n_neg."""
    pos = np.asarray(list(scores_pos), dtype=float)
    neg = np.asarray(list(scores_neg), dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise MetricInputError("auc_roc needs at least one positive and one negative")
    combined = np.concatenate([pos, neg])
    order = np.argsort(combined, kind="mergesort")
    ranks = np.empty(combined.size, dtype=float)
    i = 0
    while i < combined.size:
        j = i
        while j + 1 < combined.size and combined[order[j + 1]] == combined[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def compute_metrics(
    predictions: dict,
    ground_truth: dict,
    task: str,
    metric_names: list[str],
    scores: dict | None = None,
    positive_label: str | None = None,
) -> MetricReport:
    """Compute the requested metrics for one task.

    predictions / ground_truth / scores map unique_id -> value; ids must
    align exactly. auc_roc requires scores (probability of the positive
    class). Metric/task mismatches raise MetricInputError.
    """
    allowed = METRICS_BY_TASK.get(task)
    if allowed is None:
        raise MetricInputError(f"no metrics defined for task {task!r}")
    bad = [m for m in metric_names if m not in allowed]
    if bad:
        raise MetricInputError(f"metric(s) {bad} not valid for task {task!r}")
    ids = _align(predictions, ground_truth)
    report = MetricReport()

    if task == "regression":
        pred = np.array([float(predictions[i]) for i in ids])
        true = np.array([float(ground_truth[i]) for i in ids])
        for name in metric_names:
            if name == "rmse":
                report.values[name] = float(np.sqrt(np.mean((pred - true) ** 2)))
            elif name == "mae":
                report.values[name] = float(np.mean(np.abs(pred - true)))
            elif name == "r2":
                ss_tot = float(np.sum((true - true.mean()) ** 2))
                if ss_tot == 0.0:
                    report.values[name] = 0.0
                    report.warnings.append("r2 ill-defined: constant ground truth")
                else:
                    ss_res = float(np.sum((pred - true) ** 2))
                    report.values[name] = 1.0 - ss_res / ss_tot
        return report

    pred = {i: str(predictions[i]) for i in ids}
    true = {i: str(ground_truth[i]) for i in ids}
    if positive_label is None and task == "binary_classification":
        positive_label = max(set(true.values()))
    for name in metric_names:
        if name == "accuracy":
            report.values[name] = sum(pred[i] == true[i] for i in ids) / len(ids)
            continue
        if name == "auc_roc":
            if scores is None:
                raise MetricInputError("auc_roc requires per-record scores")
            if set(scores) != set(ids):
                raise MetricInputError("scores misaligned with predictions")
            pos_scores = [scores[i] for i in ids if true[i] == positive_label]
            neg_scores = [scores[i] for i in ids if true[i] != positive_label]
            report.values[name] = auc_roc(pos_scores, neg_scores)
            continue
        tp = sum(pred[i] == positive_label and true[i] == positive_label for i in ids)
        fp = sum(pred[i] == positive_label and true[i] != positive_label for i in ids)
        fn = sum(pred[i] != positive_label and true[i] == positive_label for i in ids)
        if name == "precision":
            if tp + fp == 0:
                report.values[name] = 0.0
                report.warnings.append("precision ill-defined: no predicted positives")
            else:
                report.values[name] = tp / (tp + fp)
        elif name == "recall":
            if tp + fn == 0:
                report.values[name] = 0.0
                report.warnings.append("recall ill-defined: no actual positives")
            else:
                report.values[name] = tp / (tp + fn)
        elif name == "f1":
            p = tp / (tp + fp) if tp + fp else 0.0
            r = tp / (tp + fn) if tp + fn else 0.0
            if p + r == 0:
                report.values[name] = 0.0
                report.warnings.append("f1 ill-defined: precision + recall == 0")
            else:
                report.values[name] = 2 * p * r / (p + r)
    return report
