"""Measurement layer: masked MSE, a deterministic linear classifier,
stratified k-fold cross-validation, and wall-clock stage timing."""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError


def derive_seed(master: int, *parts) -> int:
    """Stable 32-bit seed from a master seed and context labels.

    Pure function of its arguments (crc32 mixing), so any derived stage can
    be re-run in isolation and reproduce its stream.
    """
    text = "|".join(str(p) for p in parts)
    return (int(master) * 0x9E3779B9 + zlib.crc32(text.encode("utf-8"))) % 2**32


def mse_masked(imputed, truth, mask) -> float:
    """Mean squared error over the masked positions only."""
    imputed = np.asarray(imputed, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if imputed.shape != truth.shape or mask.shape != truth.shape:
        raise ContractError(
            f"shape mismatch: imputed {imputed.shape}, truth {truth.shape}, mask {mask.shape}"
        )
    if not mask.any():
        raise ContractError("mask has no missing positions; MSE undefined")
    diff = imputed[mask] - truth[mask]
    return float(np.mean(diff**2))


def time_stage(label: str, thunk):
    """Run ``thunk()`` under a monotonic clock; return (value, seconds)."""
    start = time.perf_counter()
    value = thunk()
    return value, time.perf_counter() - start


@dataclass(frozen=True)
class ClassifierModel:
    """Linear one-vs-rest classifier: per-class weight columns and biases.

    Prediction is the argmax over class scores ``X @ weights + bias``;
    numpy's argmax resolves ties toward the lower class index.
    """

    weights: np.ndarray
    bias: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.weights.setflags(write=False)
        self.bias.setflags(write=False)

    def decision_scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)


def train_linear_svm(
    X, y, epochs: int = 50, reg_lambda: float = 1e-3, seed: int = 0
) -> ClassifierModel:
    """One-vs-rest hinge loss with L2 penalty, trained by subgradient descent.

    Schedule: samples are visited in a freshly seeded-shuffled order each
    epoch with step size 1 / (1 + reg_lambda * t) at global step t; weight
    columns decay by (1 - eta * reg_lambda) every step and violating classes
    receive the hinge subgradient.  Biases are unregularized.  Deterministic
    for fixed inputs and seed.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ContractError(f"bad shapes: X {X.shape}, y {y.shape}")
    if not np.isfinite(X).all():
        raise ContractError("classifier input contains non-finite values")
    if np.unique(y).size < 2:
        raise ContractError("training labels contain fewer than 2 classes")
    if epochs < 1:
        raise ContractError("epochs must be >= 1")
    if reg_lambda <= 0:
        raise ContractError("reg_lambda must be > 0")
    n, d = X.shape
    n_classes = int(y.max()) + 1

    signed = np.full((n, n_classes), -1.0)
    signed[np.arange(n), y] = 1.0
    W = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (1.0 + reg_lambda * t)
            x = X[i]
            margins = signed[i] * (x @ W + b)
            viol = margins < 1.0
            W *= 1.0 - eta * reg_lambda
            if viol.any():
                W[:, viol] += eta * np.outer(x, signed[i, viol])
                b[viol] += eta * signed[i, viol]
    return ClassifierModel(W, b, n_classes)


def fold_indices(y, folds: int, seed: int, stratify: bool = True) -> list[np.ndarray]:
    """Disjoint fold row sets covering all rows; per-class sizes differ by
    at most one when stratified."""
    y = np.asarray(y, dtype=np.int64)
    if folds < 2:
        raise ContractError(f"folds={folds} must be >= 2")
    rng = np.random.default_rng(seed)
    assignment = np.empty(y.size, dtype=np.int64)
    if stratify:
        for c in np.unique(y):
            members = np.flatnonzero(y == c)
            if members.size < folds:
                raise ContractError(
                    f"class {c} has {members.size} rows, fewer than folds={folds}"
                )
            shuffled = rng.permutation(members)
            assignment[shuffled] = np.arange(members.size) % folds
    else:
        if y.size < folds:
            raise ContractError(f"{y.size} rows cannot fill {folds} folds")
        assignment[rng.permutation(y.size)] = np.arange(y.size) % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def kfold_cv(
    X, y, folds: int = 5, *, epochs: int = 50, reg_lambda: float = 1e-3,
    seed: int = 0, stratify: bool = True,
) -> tuple[float, np.ndarray]:
    """Cross-validated accuracy of the linear classifier.

    Returns the unweighted mean over folds and the per-fold accuracies.
    Fold assignment and per-fold training seeds derive deterministically
    from ``seed``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    accs = []
    for f, test_idx in enumerate(fold_indices(y, folds, seed, stratify)):
        train_idx = np.setdiff1d(np.arange(y.size), test_idx)
        model = train_linear_svm(
            X[train_idx], y[train_idx], epochs=epochs, reg_lambda=reg_lambda,
            seed=derive_seed(seed, "fold", f),
        )
        accs.append(float(np.mean(model.predict(X[test_idx]) == y[test_idx])))
    accs = np.asarray(accs)
    return float(accs.mean()), accs


@dataclass
class ExperimentRecord:
    """One benchmark cell: strategy x imputer x missing rate.

    ``mse`` is set for imputation strategies, ``accuracy`` (plus per-fold
    values) for classification strategies; an NA cell (budget or resource
    failure) carries neither, only the reason.
    """

    strategy: str
    imputer: str
    missing_rate: float
    mse: float | None = None
    accuracy: float | None = None
    fold_accuracies: list = field(default_factory=list)
    stage_seconds: dict = field(default_factory=dict)
    total_seconds: float = 0.0
    seed: int = 0
    na: bool = False
    na_reason: str = ""

    def __post_init__(self):
        if self.na != (self.mse is None and self.accuracy is None):
            raise ContractError("na flag must match absence of both metrics")
