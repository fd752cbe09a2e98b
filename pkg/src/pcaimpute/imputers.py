"""Imputer suite: mean, kNN, soft-thresholded SVD, iterative truncated SVD,
and a deterministic chained ridge imputer.

Every imputer consumes a dense matrix plus a boolean mask (True = missing)
and returns a completed matrix that reproduces the observed entries exactly.
All of them are pure deterministic functions of their inputs: the chained
ridge imputer is a single-chain point estimator (no posterior sampling), and
kNN breaks distance ties by lower row index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, check_deadline

IMPUTER_KINDS = ("mean", "knn", "soft_impute", "iterative_svd", "mice_ridge")


@dataclass(frozen=True)
class ImputerSpec:
    """Choice of imputer kind plus hyperparameters (unused ones ignored)."""

    kind: str
    knn_k: int = 5
    soft_lambda_frac: float = 0.1
    soft_max_iter: int = 100
    soft_tol: float = 1e-5
    svd_rank: int = 10
    svd_max_iter: int = 100
    svd_tol: float = 1e-5
    mice_cycles: int = 10
    mice_ridge_alpha: float = 1e-3

    def __post_init__(self):
        if self.kind not in IMPUTER_KINDS:
            raise ContractError(f"unknown imputer kind {self.kind!r}; expected one of {IMPUTER_KINDS}")
        if self.knn_k < 1:
            raise ContractError("knn_k must be >= 1")
        if not 0.0 < self.soft_lambda_frac < 1.0:
            raise ContractError("soft_lambda_frac must lie in (0, 1)")
        for name in ("soft_max_iter", "svd_rank", "svd_max_iter", "mice_cycles"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        for name in ("soft_tol", "svd_tol", "mice_ridge_alpha"):
            if getattr(self, name) <= 0.0:
                raise ContractError(f"{name} must be > 0")


@dataclass(frozen=True)
class ImputationResult:
    """Completed matrix plus iteration diagnostics.

    ``objective_trace`` is populated by the soft-threshold imputer only;
    ``mean_fallbacks`` counts kNN cells that had no eligible neighbor and
    fell back to the column mean.
    """

    completed: np.ndarray
    iterations_run: int
    converged: bool
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_fallbacks: int = 0


def _check_inputs(X, mask) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if X.ndim != 2:
        raise ContractError(f"expected 2-D matrix, got shape {X.shape}")
    if mask.shape != X.shape:
        raise ContractError(f"mask shape {mask.shape} does not match data shape {X.shape}")
    fully_missing = np.flatnonzero(mask.all(axis=0))
    if fully_missing.size:
        raise ContractError(
            f"column {fully_missing[0]} is fully missing; imputation is under-determined"
        )
    if not np.isfinite(X[~mask]).all():
        raise ContractError("non-finite values present at observed positions")
    return X, mask


def _column_means(X: np.ndarray, mask: np.ndarray) -> np.ndarray:
    obs = ~mask
    return np.where(mask, 0.0, X).sum(axis=0) / obs.sum(axis=0)


def _mean_filled(X: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, _column_means(X, mask), X)


def _overlay(X: np.ndarray, mask: np.ndarray, fill: np.ndarray) -> np.ndarray:
    # Observed entries pass through bit-for-bit.
    return np.where(mask, fill, X)


def _identity(X: np.ndarray) -> ImputationResult:
    return ImputationResult(X.copy(), iterations_run=0, converged=True)


def impute(spec: ImputerSpec, X, mask, deadline: float | None = None) -> ImputationResult:
    """Dispatch to the imputer named by ``spec.kind``."""
    X, mask = _check_inputs(X, mask)
    if spec.kind == "mean":
        return impute_mean(X, mask)
    if spec.kind == "knn":
        return impute_knn(X, mask, spec.knn_k)
    if spec.kind == "soft_impute":
        return impute_soft(
            X, mask, spec.soft_lambda_frac, spec.soft_max_iter, spec.soft_tol, deadline
        )
    if spec.kind == "iterative_svd":
        return impute_itersvd(
            X, mask, spec.svd_rank, spec.svd_max_iter, spec.svd_tol, deadline
        )
    return impute_mice_ridge(
        X, mask, spec.mice_cycles, spec.mice_ridge_alpha, deadline
    )


def impute_mean(X, mask) -> ImputationResult:
    """Fill each missing entry with its column's observed mean."""
    X, mask = _check_inputs(X, mask)
    if not mask.any():
        return _identity(X)
    return ImputationResult(_mean_filled(X, mask), iterations_run=1, converged=True)


def _masked_distances(X: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances over coordinates observed in both rows,
    rescaled by sqrt(m / shared); inf where rows share no observed coordinate."""
    m = X.shape[1]
    W = (~mask).astype(np.float64)
    Xz = np.where(mask, 0.0, X)
    sq = (Xz**2) @ W.T
    d2 = sq + sq.T - 2.0 * (Xz @ Xz.T)
    shared = W @ W.T
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = np.where(shared > 0, d2 * (m / shared), np.inf)
    return np.sqrt(np.maximum(d2, 0.0))


def impute_knn(X, mask, k: int) -> ImputationResult:
    """Average the k nearest rows (masked Euclidean distance) that observe
    each missing coordinate; ties broken by lower row index.  Cells with no
    eligible neighbor fall back to the column mean and are counted."""
    X, mask = _check_inputs(X, mask)
    if not mask.any():
        return _identity(X)
    n = X.shape[0]
    if not 1 <= k <= n - 1:
        raise ContractError(f"knn_k={k} must lie in [1, rows-1={n - 1}]")

    dist = _masked_distances(X, mask)
    means = _column_means(X, mask)
    completed = np.where(mask, means, X)
    fallbacks = 0
    for i in np.flatnonzero(mask.any(axis=1)):
        d = dist[i].copy()
        d[i] = np.inf
        # candidates ordered by (distance, row index); unreachable rows dropped
        order = np.lexsort((np.arange(n), d))
        order = order[np.isfinite(d[order])]
        for c in np.flatnonzero(mask[i]):
            cands = order[~mask[order, c]]
            if cands.size == 0:
                fallbacks += 1  # column mean already in place
                continue
            completed[i, c] = np.mean(X[cands[:k], c])
    return ImputationResult(
        _overlay(X, mask, completed), iterations_run=1, converged=True,
        mean_fallbacks=fallbacks,
    )


def impute_soft(
    X, mask, lambda_frac: float = 0.1, max_iter: int = 100, tol: float = 1e-5,
    deadline: float | None = None,
) -> ImputationResult:
    """Matrix completion by iterated soft-thresholding of singular values.

    Minimizes 0.5 * ||P_obs(X - Z)||_F^2 + lam * ||Z||_* where lam is
    ``lambda_frac`` times the largest singular value of the mean-filled
    start; the per-iteration penalized objective is recorded in
    ``objective_trace`` and is nonincreasing by construction.
    """
    X, mask = _check_inputs(X, mask)
    if not mask.any():
        return _identity(X)

    Z = _mean_filled(X, mask)
    lam = lambda_frac * np.linalg.svd(Z, compute_uv=False)[0]
    obs = ~mask
    x_obs = np.where(mask, 0.0, X)
    trace = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        check_deadline(deadline)
        y = _overlay(X, mask, Z)
        u, s, vt = np.linalg.svd(y, full_matrices=False)
        s_shrunk = np.maximum(s - lam, 0.0)
        Z_new = (u * s_shrunk) @ vt
        resid = np.where(obs, x_obs - Z_new, 0.0)
        trace.append(0.5 * np.sum(resid**2) + lam * s_shrunk.sum())
        delta = np.linalg.norm(Z_new - Z) / max(np.linalg.norm(Z), 1e-12)
        Z = Z_new
        if delta <= tol:
            converged = True
            break
    return ImputationResult(
        _overlay(X, mask, Z), iterations, converged, np.asarray(trace)
    )


def impute_itersvd(
    X, mask, rank: int = 10, max_iter: int = 100, tol: float = 1e-5,
    deadline: float | None = None,
) -> ImputationResult:
    """Fill missing entries with a rank-``rank`` truncated-SVD reconstruction,
    iterated to a fixed point."""
    X, mask = _check_inputs(X, mask)
    if not mask.any():
        return _identity(X)
    n, m = X.shape
    if not 1 <= rank <= min(n, m) - 1:
        raise ContractError(f"rank={rank} must lie in [1, min(rows, cols)-1={min(n, m) - 1}]")

    Z = _mean_filled(X, mask)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        check_deadline(deadline)
        u, s, vt = np.linalg.svd(Z, full_matrices=False)
        low_rank = (u[:, :rank] * s[:rank]) @ vt[:rank]
        Z_new = _overlay(X, mask, low_rank)
        delta = np.linalg.norm(Z_new - Z) / max(np.linalg.norm(Z), 1e-12)
        Z = Z_new
        if delta <= tol:
            converged = True
            break
    return ImputationResult(_overlay(X, mask, Z), iterations, converged)


def _ridge_predict(A_obs, y_obs, A_query, alpha: float) -> np.ndarray:
    # Ridge with unpenalized intercept via centering.
    a_mean = A_obs.mean(axis=0)
    y_mean = y_obs.mean()
    Ac = A_obs - a_mean
    gram = Ac.T @ Ac
    gram[np.diag_indices_from(gram)] += alpha
    w = np.linalg.solve(gram, Ac.T @ (y_obs - y_mean))
    return (A_query - a_mean) @ w + y_mean


def impute_mice_ridge(
    X, mask, cycles: int = 10, alpha: float = 1e-3,
    deadline: float | None = None,
) -> ImputationResult:
    """Chained conditional regression: per cycle, each missing-bearing column
    (left to right) is ridge-regressed on all other columns over its observed
    rows and the predictions overwrite its missing entries.

    ``cycles=0`` returns the column-mean initialization.
    """
    X, mask = _check_inputs(X, mask)
    if not mask.any():
        return _identity(X)

    Z = _mean_filled(X, mask)
    target_cols = np.flatnonzero(mask.any(axis=0))
    for _ in range(cycles):
        check_deadline(deadline)
        for j in target_cols:
            obs = ~mask[:, j]
            others = np.concatenate([np.arange(j), np.arange(j + 1, X.shape[1])])
            A = Z[:, others]
            Z[~obs, j] = _ridge_predict(A[obs], X[obs, j], A[~obs], alpha)
    return ImputationResult(
        _overlay(X, mask, Z), iterations_run=cycles, converged=True
    )
