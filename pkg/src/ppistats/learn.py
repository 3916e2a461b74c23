"""From-scratch linear models: hinge-loss one-vs-rest classifiers,
epsilon-insensitive regressors, k-fold cross-validation, and recursive
feature elimination.

Training minimizes the mean-form regularized objective

    f(w, b) = ||w||^2 / (2 n C) + mean_i loss_i(w, b)

(the standard C-weighted SVM primal divided by nC) with a deterministic
full-batch projected subgradient method on a fixed geometric step
ladder, tracking the best iterate seen.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateModelError, DomainError
from .features import fit_standardizer

NUM_ROUNDS = 25
STEP_DECAY = 10.0 ** -0.25  # final step is 1e-6 of the initial step


@dataclass(frozen=True)
class LinearModel:
    """w·x + b scorer; kind is "classifier" or "regressor"."""

    kind: str
    weights: tuple[float, ...]
    bias: float
    hyperparams: dict
    # best objective per optimizer round; diagnostic, not serialized
    history: tuple[float, ...] = ()

    def decision(self, x: Sequence[float]) -> float:
        return float(np.dot(self.weights, x) + self.bias)


@dataclass(frozen=True)
class MulticlassModel:
    """One-vs-rest bundle: labels[i] is scored by models[i]."""

    labels: tuple
    models: tuple[LinearModel, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise DegenerateModelError("multiclass model needs >= 2 labels")
        if len(self.labels) != len(self.models):
            raise DomainError("labels/models length mismatch")
        dims = {len(m.weights) for m in self.models}
        if len(dims) != 1:
            raise DomainError("inconsistent feature dimensions")

    @property
    def dim(self) -> int:
        return len(self.models[0].weights)


def svc_objective(w: np.ndarray, b: float, X: np.ndarray,
                  y_signed: np.ndarray, C: float) -> float:
    """Mean-form regularized hinge objective (y_signed in {-1,+1})."""
    n = len(y_signed)
    margins = y_signed * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(w @ w / (2.0 * n * C) + hinge.mean())


def svr_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                  C: float, epsilon: float) -> float:
    """Mean-form regularized epsilon-insensitive objective."""
    n = len(y)
    excess = np.abs(X @ w + b - y) - epsilon
    return float(w @ w / (2.0 * n * C) + np.maximum(0.0, excess).mean())


def _svc_value_grad(w, b, X, y_signed, C):
    n = len(y_signed)
    margins = y_signed * (X @ w + b)
    slack = 1.0 - margins
    obj = float(w @ w / (2.0 * n * C) + np.maximum(0.0, slack).mean())
    coeff = np.where(slack > 0.0, -y_signed, 0.0)
    grad_w = w / (n * C) + X.T @ coeff / n
    return obj, grad_w, float(coeff.mean())


def _svr_value_grad(w, b, X, y, C, epsilon):
    n = len(y)
    resid = X @ w + b - y
    excess = np.abs(resid) - epsilon
    obj = float(w @ w / (2.0 * n * C) + np.maximum(0.0, excess).mean())
    coeff = np.where(excess > 0.0, np.sign(resid), 0.0)
    grad_w = w / (n * C) + X.T @ coeff / n
    return obj, grad_w, float(coeff.mean())


def _optimize(value_grad, dim: int, b0: float, n: int, C: float,
              eta0: float, max_iters: int, tol: float,
              ) -> tuple[np.ndarray, float, tuple[float, ...]]:
    """Projected subgradient descent from (0, b0).

    The iterate's weight norm is kept inside the ball that must contain
    the minimizer (||w*||^2 <= 2nC·f(0, b0)). Steps follow a fixed
    geometric ladder spanning six orders of magnitude; the best
    evaluated iterate is returned. The only early exit is the objective
    dropping to `tol`, its global lower bound being 0.
    """
    w = np.zeros(dim)
    b = float(b0)
    f0 = value_grad(w, b)[0]
    best_w, best_b, best_f = w.copy(), b, f0
    history = [f0]
    radius = math.sqrt(2.0 * n * C * f0) if f0 > 0.0 else 0.0
    if radius == 0.0 or max_iters <= 0:
        return best_w, best_b, tuple(history)
    for rnd in range(NUM_ROUNDS):
        start = rnd * max_iters // NUM_ROUNDS
        end = (rnd + 1) * max_iters // NUM_ROUNDS
        if end == start:
            continue
        eta = eta0 * STEP_DECAY ** rnd
        for _ in range(end - start):
            f, grad_w, grad_b = value_grad(w, b)
            if f < best_f:
                best_f, best_b = f, b
                best_w = w.copy()
            w = w - eta * grad_w
            b = b - eta * grad_b
            norm = float(np.linalg.norm(w))
            if norm > radius:
                w *= radius / norm
        history.append(best_f)
        # the objective is nonnegative, so reaching tol is a certificate
        if best_f <= tol:
            break
    f = value_grad(w, b)[0]
    if f < best_f:
        best_f, best_b = f, b
        best_w = w.copy()
        history.append(best_f)
    return best_w, best_b, tuple(history)


def _as_matrix(X) -> np.ndarray:
    data = np.asarray(X, dtype=float)
    if data.ndim != 2:
        raise DomainError("feature matrix must be 2-dimensional")
    if not np.isfinite(data).all():
        raise DomainError("non-finite feature value")
    return data


def train_svc(X, y: Sequence, C: float = 100.0, seed: int = 0,
              max_iters: int = 5000, tol: float = 1e-6) -> MulticlassModel:
    """Train a one-vs-rest linear classifier; bit-reproducible."""
    data = _as_matrix(X)
    labels_in = list(y)
    if data.shape[0] != len(labels_in):
        raise DomainError("X and y lengths differ")
    labels = sorted(set(labels_in))
    if len(labels) < 2:
        raise DegenerateModelError("training labels contain a single class")
    hyper = {"C": C, "max_iters": max_iters, "tol": tol, "seed": seed}
    n, dim = data.shape
    models = []
    for label in labels:
        y_signed = np.array([1.0 if v == label else -1.0
                             for v in labels_in])
        w, b, hist = _optimize(
            lambda w_, b_: _svc_value_grad(w_, b_, data, y_signed, C),
            dim, 0.0, n, C, 1.0, max_iters, tol)
        models.append(LinearModel(kind="classifier",
                                  weights=tuple(float(v) for v in w),
                                  bias=b, hyperparams=dict(hyper),
                                  history=hist))
    return MulticlassModel(labels=tuple(labels), models=tuple(models))


def decision_values(m: MulticlassModel, x: Sequence[float]) -> list[float]:
    vec = np.asarray(x, dtype=float)
    if vec.shape != (m.dim,):
        raise DomainError(f"expected {m.dim} features, got {vec.shape}")
    if not np.isfinite(vec).all():
        raise DomainError("non-finite input vector")
    return [float(np.dot(mm.weights, vec) + mm.bias) for mm in m.models]


def predict_svc_batch(m: MulticlassModel, X) -> list:
    data = _as_matrix(X)
    if data.shape[1] != m.dim:
        raise DomainError(f"expected {m.dim} features, got {data.shape[1]}")
    weights = np.array([mm.weights for mm in m.models])
    bias = np.array([mm.bias for mm in m.models])
    scores = data @ weights.T + bias
    # argmax takes the first maximum: ties go to the earliest label
    return [m.labels[i] for i in np.argmax(scores, axis=1)]


def predict_svc(m: MulticlassModel, x: Sequence[float]):
    vec = np.asarray(x, dtype=float)
    if vec.ndim != 1:
        raise DomainError("predict_svc expects a single vector")
    return predict_svc_batch(m, vec.reshape(1, -1))[0]


def svc_accuracy(m: MulticlassModel, X, y: Sequence) -> float:
    predictions = predict_svc_batch(m, X)
    truth = list(y)
    if len(truth) != len(predictions):
        raise DomainError("X and y lengths differ")
    return sum(p == t for p, t in zip(predictions, truth)) / len(truth)


def train_svr(X, y, C: float = 100.0, epsilon: Optional[float] = None,
              seed: int = 0, max_iters: int = 5000,
              tol: float = 1e-6) -> LinearModel:
    """Train a linear epsilon-insensitive regressor; bit-reproducible.

    epsilon defaults to 0.1 × std(y); constant targets short-circuit to
    the constant predictor.
    """
    data = _as_matrix(X)
    targets = np.asarray(y, dtype=float)
    if targets.ndim != 1 or data.shape[0] != len(targets):
        raise DomainError("X and y lengths differ")
    if len(targets) < 2:
        raise DomainError("regression needs at least 2 examples")
    if not np.isfinite(targets).all():
        raise DomainError("non-finite regression target")
    std_y = float(targets.std())
    if epsilon is None:
        epsilon = 0.1 * std_y
    if epsilon < 0:
        raise DomainError("epsilon must be >= 0")
    hyper = {"C": C, "epsilon": epsilon, "max_iters": max_iters,
             "tol": tol, "seed": seed}
    n, dim = data.shape
    mean_y = float(targets.mean())
    if std_y == 0.0:
        return LinearModel(kind="regressor", weights=(0.0,) * dim,
                           bias=mean_y, hyperparams=hyper, history=(0.0,))
    w, b, hist = _optimize(
        lambda w_, b_: _svr_value_grad(w_, b_, data, targets, C, epsilon),
        dim, mean_y, n, C, max(1.0, std_y), max_iters, tol)
    return LinearModel(kind="regressor",
                       weights=tuple(float(v) for v in w), bias=b,
                       hyperparams=hyper, history=hist)


def predict_svr_batch(m: LinearModel, X) -> list[float]:
    data = _as_matrix(X)
    if data.shape[1] != len(m.weights):
        raise DomainError(f"expected {len(m.weights)} features, "
                          f"got {data.shape[1]}")
    values = data @ np.asarray(m.weights) + m.bias
    return [float(v) for v in values]


def predict_svr(m: LinearModel, x: Sequence[float]) -> float:
    vec = np.asarray(x, dtype=float)
    if vec.ndim != 1:
        raise DomainError("predict_svr expects a single vector")
    return predict_svr_batch(m, vec.reshape(1, -1))[0]


def relative_error(predicted: float, actual: float) -> float:
    """|predicted − actual| / |actual|."""
    if actual == 0:
        raise DomainError("relative error undefined for actual = 0")
    return abs(predicted - actual) / abs(actual)


def kfold_split(n: int, k: int, seed: int = 0) -> list[list[int]]:
    """Seeded partition of range(n) into k folds, sizes within 1."""
    if k < 2 or k > n:
        raise DomainError(f"k must be between 2 and {n}, got {k}")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    folds = []
    start = 0
    for f in range(k):
        size = n // k + (1 if f < n % k else 0)
        folds.append(sorted(order[start:start + size]))
        start += size
    return folds


def cross_val_accuracy(X, y: Sequence, C: float = 100.0, k: int = 5,
                       seed: int = 0, max_iters: int = 5000,
                       tol: float = 1e-6) -> float:
    """Pooled k-fold accuracy with per-fold standardization.

    Folds whose training half collapses to one class are skipped.
    """
    data = _as_matrix(X)
    truth = list(y)
    folds = kfold_split(len(truth), k, seed)
    correct = 0
    total = 0
    for f, test_idx in enumerate(folds):
        train_idx = [i for g, fold in enumerate(folds) if g != f
                     for i in fold]
        y_train = [truth[i] for i in train_idx]
        if len(set(y_train)) < 2:
            continue
        scaler = fit_standardizer(data[train_idx])
        model = train_svc(scaler.apply_matrix(data[train_idx]), y_train,
                          C=C, seed=seed, max_iters=max_iters, tol=tol)
        predictions = predict_svc_batch(
            model, scaler.apply_matrix(data[test_idx]))
        correct += sum(predictions[j] == truth[i]
                       for j, i in enumerate(test_idx))
        total += len(test_idx)
    if total == 0:
        raise DegenerateModelError("no usable cross-validation fold")
    return correct / total


def rfe(X, y: Sequence, C: float = 100.0, cv_k: int = 5, seed: int = 0,
        max_iters: int = 5000, tol: float = 1e-6,
        ) -> list[tuple[int, float, int]]:
    """Recursive feature elimination.

    At each size: record pooled CV accuracy, train on the full data,
    rank features by the summed |w| across one-vs-rest models, and drop
    the lowest-ranked. The entry for size 1 records the lone remaining
    feature, so the third column is a full elimination order.
    """
    data = _as_matrix(X)
    if data.shape[1] < 2:
        raise DomainError("recursive elimination needs >= 2 features")
    active = list(range(data.shape[1]))
    out: list[tuple[int, float, int]] = []
    while active:
        sub = data[:, active]
        accuracy = cross_val_accuracy(sub, y, C=C, k=cv_k, seed=seed,
                                      max_iters=max_iters, tol=tol)
        scaler = fit_standardizer(sub)
        model = train_svc(scaler.apply_matrix(sub), y, C=C, seed=seed,
                          max_iters=max_iters, tol=tol)
        scores = np.abs(np.array([mm.weights
                                  for mm in model.models])).sum(axis=0)
        drop = int(np.argmin(scores))
        out.append((len(active), accuracy, active[drop]))
        active.pop(drop)
    return out


MODEL_FORMAT_VERSION = 1


def linear_model_to_dict(m: LinearModel) -> dict:
    return {"kind": m.kind, "weights": list(m.weights), "bias": m.bias,
            "hyperparams": dict(m.hyperparams)}


def linear_model_from_dict(doc: dict) -> LinearModel:
    return LinearModel(kind=doc["kind"],
                       weights=tuple(float(v) for v in doc["weights"]),
                       bias=float(doc["bias"]),
                       hyperparams=dict(doc["hyperparams"]))


def multiclass_to_dict(m: MulticlassModel) -> dict:
    return {"labels": list(m.labels),
            "models": [linear_model_to_dict(mm) for mm in m.models]}


def multiclass_from_dict(doc: dict) -> MulticlassModel:
    return MulticlassModel(
        labels=tuple(doc["labels"]),
        models=tuple(linear_model_from_dict(d) for d in doc["models"]))
