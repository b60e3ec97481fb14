"""Local deterministic tabular baselines behind an estimator-style API.

Each model is constructed with its hyperparameters, exposes fit/predict plus
get_params/set_params, and is fully deterministic for a fixed seed.
FeatureEncoder maps feature-dict rows to dense matrices: numeric columns are
standardized with train statistics (population std, zero std treated as 1)
and categorical columns are one-hot encoded over the train categories, with
unseen categories mapping to an all-zero block.
"""

from __future__ import annotations

import numpy as np

#: A row is (numerical_features, categorical_features).
Row = tuple[dict[str, float], dict[str, str]]


class FeatureEncoder:
    def fit(self, rows: list[Row]) -> "FeatureEncoder":
        if not rows:
            raise ValueError("cannot fit an encoder on zero rows")
        num_keys: set[str] = set()
        cat_keys: set[str] = set()
        for num, cat in rows:
            num_keys.update(num)
            cat_keys.update(cat)
        self.numeric_keys_ = tuple(sorted(num_keys))
        self.categorical_keys_ = tuple(sorted(cat_keys))
        self.means_ = {}
        self.stds_ = {}
        for key in self.numeric_keys_:
            values = np.array([float(num.get(key, 0.0)) for num, _ in rows])
            self.means_[key] = float(values.mean())
            std = float(values.std())
            self.stds_[key] = std if std > 0.0 else 1.0
        self.categories_ = {
            key: tuple(sorted({cat[key] for _, cat in rows if key in cat}))
            for key in self.categorical_keys_
        }
        names = [f"num:{k}" for k in self.numeric_keys_]
        for key in self.categorical_keys_:
            names.extend(f"cat:{key}={value}" for value in self.categories_[key])
        self.feature_names_ = tuple(names)
        self.n_features_ = len(names)
        return self

    def transform(self, rows: list[Row]) -> np.ndarray:
        matrix = np.zeros((len(rows), self.n_features_))
        for i, (num, cat) in enumerate(rows):
            col = 0
            for key in self.numeric_keys_:
                matrix[i, col] = (float(num.get(key, 0.0)) - self.means_[key]) / self.stds_[key]
                col += 1
            for key in self.categorical_keys_:
                values = self.categories_[key]
                seen = cat.get(key)
                if seen in values:
                    matrix[i, col + values.index(seen)] = 1.0
                col += len(values)
        return matrix

    def fit_transform(self, rows: list[Row]) -> np.ndarray:
        return self.fit(rows).transform(rows)


class MajorityClassPredictor:
    """Predicts the most frequent train label; ties go to the smallest label."""

    def fit(self, X, y) -> "MajorityClassPredictor":
        labels = [str(v) for v in y]
        if not labels:
            raise ValueError("cannot fit on an empty label list")
        counts: dict[str, int] = {}
        for label in labels:
            counts[label] = counts.get(label, 0) + 1
        top = max(counts.values())
        self.majority_ = min(label for label, n in counts.items() if n == top)
        return self

    def predict(self, X) -> list[str]:
        return [self.majority_] * len(X)

    def get_params(self) -> dict:
        return {}

    def set_params(self, **params) -> "MajorityClassPredictor":
        if params:
            raise ValueError(f"unknown parameters: {sorted(params)}")
        return self


class MeanPredictor:
    """Predicts the train-output mean everywhere."""

    def fit(self, X, y) -> "MeanPredictor":
        values = np.asarray(list(y), dtype=float)
        if values.size == 0:
            raise ValueError("cannot fit on an empty target list")
        self.mean_ = float(values.mean())
        return self

    def predict(self, X) -> list[float]:
        return [self.mean_] * len(X)

    def get_params(self) -> dict:
        return {}

    def set_params(self, **params) -> "MeanPredictor":
        if params:
            raise ValueError(f"unknown parameters: {sorted(params)}")
        return self


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


class LinearGDModel:
    """Full-batch gradient-descent linear model for the three tabular tasks.

    task="regression" fits least squares; "binary_classification" fits
    logistic regression (the lexicographically greater label is positive);
    "multiclass_classification" fits softmax regression. When a validation
    set is passed to fit, the weights of the epoch with the best validation
    metric (accuracy, or negative rmse for regression) are kept; the first
    best epoch wins ties. Deterministic for a fixed seed.
    """

    TASKS = ("regression", "binary_classification", "multiclass_classification")

    def __init__(
        self,
        task: str = "regression",
        learning_rate: float = 0.1,
        epochs: int = 200,
        l2: float = 0.0,
        seed: int = 0,
    ):
        if task not in self.TASKS:
            raise ValueError(f"task must be one of {self.TASKS}, got {task!r}")
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if epochs < 1:
            raise ValueError("epochs must be >= 1")
        if l2 < 0:
            raise ValueError("l2 must be >= 0")
        self.task = task
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.seed = seed

    def get_params(self) -> dict:
        return {
            "task": self.task,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2": self.l2,
            "seed": self.seed,
        }

    def set_params(self, **params) -> "LinearGDModel":
        known = self.get_params()
        for key, value in params.items():
            if key not in known:
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def _encode_targets(self, y) -> np.ndarray:
        if self.task == "regression":
            return np.asarray(list(y), dtype=float)
        labels = [str(v) for v in y]
        self.classes_ = tuple(sorted(set(labels)))
        if self.task == "binary_classification" and len(self.classes_) != 2:
            raise ValueError(
                f"binary_classification needs exactly 2 classes, got {list(self.classes_)}"
            )
        index = {label: i for i, label in enumerate(self.classes_)}
        codes = np.array([index[label] for label in labels])
        if self.task == "binary_classification":
            return codes.astype(float)  # positive class == classes_[1]
        onehot = np.zeros((len(codes), len(self.classes_)))
        onehot[np.arange(len(codes)), codes] = 1.0
        return onehot

    def _raw_scores(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef_ + self.intercept_

    def _gradients(self, X, target):
        n = X.shape[0]
        if self.task == "regression":
            residual = self._raw_scores(X) - target
            grad_w = 2.0 * X.T @ residual / n
            grad_b = 2.0 * residual.mean()
        elif self.task == "binary_classification":
            residual = _sigmoid(self._raw_scores(X)) - target
            grad_w = X.T @ residual / n
            grad_b = residual.mean()
        else:
            residual = _softmax(self._raw_scores(X)) - target
            grad_w = X.T @ residual / n
            grad_b = residual.mean(axis=0)
        if self.l2:
            grad_w = grad_w + self.l2 * self.coef_
        return grad_w, grad_b

    def _validation_metric(self, X_val, y_val) -> float:
        if self.task == "regression":
            pred = np.asarray(self.predict(X_val), dtype=float)
            true = np.asarray(list(y_val), dtype=float)
            return -float(np.sqrt(np.mean((pred - true) ** 2)))
        pred = self.predict(X_val)
        true = [str(v) for v in y_val]
        return sum(p == t for p, t in zip(pred, true)) / len(true)

    def fit(self, X, y, X_val=None, y_val=None) -> "LinearGDModel":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("X must be a non-empty 2d array")
        target = self._encode_targets(y)
        if len(target) != X.shape[0]:
            raise ValueError("X and y lengths differ")
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.seed)
        if self.task == "multiclass_classification":
            shape = (X.shape[1], len(self.classes_))
            self.intercept_ = np.zeros(len(self.classes_))
        else:
            shape = (X.shape[1],)
            self.intercept_ = 0.0
        self.coef_ = rng.normal(0.0, 0.01, size=shape)

        use_val = X_val is not None and y_val is not None and len(X_val) > 0
        if use_val:
            X_val = np.asarray(X_val, dtype=float)
        best_metric = -np.inf
        best_state = None
        self.val_history_ = []
        for epoch in range(1, self.epochs + 1):
            grad_w, grad_b = self._gradients(X, target)
            self.coef_ = self.coef_ - self.learning_rate * grad_w
            self.intercept_ = self.intercept_ - self.learning_rate * grad_b
            if use_val:
                metric = self._validation_metric(X_val, y_val)
                self.val_history_.append(metric)
                if metric > best_metric:
                    best_metric = metric
                    best_state = (self.coef_.copy(), np.copy(self.intercept_), epoch)
        if use_val and best_state is not None:
            self.coef_, intercept, self.best_epoch_ = best_state
            self.intercept_ = intercept if intercept.ndim else float(intercept)
        else:
            self.best_epoch_ = self.epochs
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        scores = self._raw_scores(X)
        if self.task == "regression":
            return [float(v) for v in scores]
        if self.task == "binary_classification":
            probs = _sigmoid(scores)
            return [self.classes_[1] if p >= 0.5 else self.classes_[0] for p in probs]
        return [self.classes_[int(i)] for i in np.argmax(scores, axis=1)]

    def predict_scores(self, X) -> list[float]:
        """Positive-class probability for binary classification."""
        if self.task != "binary_classification":
            raise ValueError("predict_scores is only defined for binary_classification")
        X = np.asarray(X, dtype=float)
        return [float(p) for p in _sigmoid(self._raw_scores(X))]
