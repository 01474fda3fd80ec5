"""One-vs-rest L2-regularized logistic regression, trained by full-batch gradient descent.

Each binary problem (class ``c`` against the rest, ``y`` in {-1, +1})
minimizes::

    F(w, b) = mean(log(1 + exp(-y (X w + b)))) + ||w||^2 / (2 C n)

which is the usual ``||w||^2 / 2 + C * sum(loss)`` objective divided by
``C n``. The bias is not regularized. Training is deterministic: a fixed
number of epochs, and a step that is halved whenever it would increase F.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dataio import LabeledDataset

MODEL_HEADER = "gintkernel-linear-model"
MODEL_VERSION = 1

DEFAULT_EPOCHS = 200
DEFAULT_STEP = 0.5
_MAX_HALVINGS = 60


@dataclass(eq=False)
class LinearModel:
    classes: np.ndarray
    weights: np.ndarray  # (num_classes, dim + 1), bias in the last column
    reg_c: float
    loss_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.classes.size < 2:
            raise ValueError("a linear model needs at least 2 classes")
        if self.weights.shape[0] != self.classes.size:
            raise ValueError("one weight row per class is required")

    @property
    def num_classes(self):
        return int(self.classes.size)

    @property
    def dim(self):
        return self.weights.shape[1] - 1

    def decision_function(self, X):
        X = _check_features(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"X has {X.shape[1]} features, model expects {self.dim}")
        W = self.weights
        return np.asarray(X @ W[:, :-1].T) + W[:, -1]

    def predict(self, X):
        # argmax returns the first maximum; classes are sorted, so ties go to the smaller label
        return self.classes[np.argmax(self.decision_function(X), axis=1)]

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            classes = ",".join(str(c) for c in self.classes.tolist())
            fh.write(f"{MODEL_HEADER} {MODEL_VERSION} dim={self.dim} "
                     f"reg_c={self.reg_c!r} classes={classes}\n")
            for row in self.weights:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) < 2 or header[0] != MODEL_HEADER:
                raise ValueError(f"{path}: not a linear model file")
            if int(header[1]) != MODEL_VERSION:
                raise ValueError(f"{path}: unsupported model version {header[1]}")
            meta = dict(tok.split("=", 1) for tok in header[2:])
            classes = [int(c) for c in meta["classes"].split(",")]
            rows = [[float(x) for x in line.split()] for line in fh if line.strip()]
        weights = np.asarray(rows, dtype=np.float64)
        if weights.shape != (len(classes), int(meta["dim"]) + 1):
            raise ValueError(f"{path}: weight block has shape {weights.shape}")
        return cls(classes, weights, float(meta["reg_c"]))


def _check_features(X):
    X = check_array(X, accept_sparse="csr", dtype=np.float64, ensure_all_finite=True)
    return sp.csr_matrix(X) if sp.issparse(X) else X


def objective_and_gradient(wb, X, y, reg_c):
    """Binary objective and gradient at ``wb`` (weights with the bias appended), ``y`` in {-1, +1}."""
    n = X.shape[0]
    w, b = wb[:-1], wb[-1]
    margin = y * (np.asarray(X @ w).ravel() + b)
    lam = 1.0 / (reg_c * n)
    f = np.logaddexp(0.0, -margin).mean() + 0.5 * lam * np.dot(w, w)
    coef = -y * expit(-margin) / n
    grad = np.empty_like(wb)
    grad[:-1] = np.asarray(X.T @ coef).ravel() + lam * w
    grad[-1] = coef.sum()
    return f, grad


def _descend(X, y, reg_c, epochs, step):
    wb = np.zeros(X.shape[1] + 1)
    f, g = objective_and_gradient(wb, X, y, reg_c)
    history = [f]
    for _ in range(epochs):
        for _ in range(_MAX_HALVINGS):
            cand = wb - step * g
            f_new, g_new = objective_and_gradient(cand, X, y, reg_c)
            if f_new <= f:
                wb, f, g = cand, f_new, g_new
                break
            step *= 0.5
        history.append(f)
    return wb, history


def train(data, reg_c=1.0, epochs=DEFAULT_EPOCHS, step=DEFAULT_STEP, labels=None) -> LinearModel:
    """Fit a one-vs-rest model.

    ``data`` is a :class:`LabeledDataset`, or a feature matrix with ``labels``.
    """
    if isinstance(data, LabeledDataset):
        X, y = data.to_csr(), data.labels
    else:
        if labels is None:
            raise ValueError("labels are required when data is a matrix")
        X, y = data, np.asarray(labels)
    X = _check_features(X)
    y = np.asarray(y, dtype=np.int64).ravel()
    if y.size != X.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
    if not reg_c > 0:
        raise ValueError(f"reg_c must be positive, got {reg_c}")
    if int(epochs) < 1:
        raise ValueError("epochs must be >= 1")
    if not step > 0:
        raise ValueError("step must be positive")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError(f"training data contains a single class ({classes.tolist()})")
    weights = np.empty((classes.size, X.shape[1] + 1))
    history = []
    for r, c in enumerate(classes):
        target = np.where(y == c, 1.0, -1.0)
        weights[r], h = _descend(X, target, float(reg_c), int(epochs), float(step))
        history.append(h)
    return LinearModel(classes, weights, float(reg_c), history)


def evaluate(model: LinearModel, data, labels=None) -> float:
    if isinstance(data, LabeledDataset):
        X, y = data.to_csr(), data.labels
    else:
        X, y = data, np.asarray(labels)
    return float(np.mean(model.predict(X) == np.asarray(y).ravel()))


class OneVsRestLogisticGD(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around :func:`train`.

    Parameters
    ----------
    C : float, default=1.0
        Inverse regularization strength.
    epochs : int, default=200
    step : float, default=0.5
        Initial step size; halved whenever a step would increase the objective.
    """

    def __init__(self, C=1.0, epochs=DEFAULT_EPOCHS, step=DEFAULT_STEP):
        self.C = C
        self.epochs = epochs
        self.step = step

    def fit(self, X, y):
        self.model_ = train(X, self.C, self.epochs, self.step, labels=y)
        self.classes_ = self.model_.classes
        self.coef_ = self.model_.weights[:, :-1]
        self.intercept_ = self.model_.weights[:, -1]
        self.n_features_in_ = self.model_.dim
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(X)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(X)
