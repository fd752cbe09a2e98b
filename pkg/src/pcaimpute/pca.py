"""Principal component analysis via economy SVD of the centered data matrix.

The SVD route is deliberate: forming the m x m covariance matrix costs
O(n m^2 + m^3) and dominates when the sample count n is smaller than the
column count m, whereas the economy SVD scales with min(n, m).  Components
are sign-canonicalized (largest-magnitude entry of each component is
nonnegative) so fitted models are deterministic across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractError


@dataclass(frozen=True)
class PcaModel:
    """Fitted projection: per-column mean, orthonormal components, ratios.

    ``components`` is m x k with one principal direction per column, ordered
    by decreasing explained variance; ``explained_ratio`` holds the matching
    per-component fractions of total variance.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_ratio: np.ndarray
    k: int

    def __post_init__(self):
        for arr in (self.mean, self.components, self.explained_ratio):
            arr.setflags(write=False)

    @property
    def n_features(self) -> int:
        return self.components.shape[0]


def _canonicalize_signs(components: np.ndarray) -> np.ndarray:
    # Flip each component so its largest-magnitude entry is nonnegative.
    flip = components[np.abs(components).argmax(axis=0), np.arange(components.shape[1])] < 0
    out = components.copy()
    out[:, flip] *= -1.0
    return out


def fit_pca(
    X, variance_target: float = 0.95, n_components: int | None = None
) -> tuple[np.ndarray, PcaModel]:
    """Fit PCA on a complete matrix; return (scores, model).

    The component count is either ``n_components`` (capped at
    ``min(n - 1, m)``) or the smallest k whose cumulative explained-variance
    ratio reaches ``variance_target``.  Scores are ``(X - mean) @ V``.

    Degenerate zero-variance input yields k = 1 with the first standard
    basis vector as the single component and explained_ratio [1.0], keeping
    downstream pipelines total.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ContractError(f"expected 2-D matrix, got shape {X.shape}")
    n, m = X.shape
    if n < 2:
        raise ContractError("PCA needs at least 2 rows (variance undefined)")
    if m < 1:
        raise ContractError("PCA needs at least 1 column")
    if np.isnan(X).any():
        raise ContractError("PCA input contains missing entries")
    if n_components is None and not 0.0 < variance_target <= 1.0:
        raise ContractError(f"variance_target={variance_target} outside (0, 1]")

    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s**2 / (n - 1)
    total = var.sum()
    k_max = min(n - 1, m)

    if total <= 0.0:
        components = np.zeros((m, 1))
        components[0, 0] = 1.0
        model = PcaModel(mean, components, np.array([1.0]), 1)
        return Xc @ components, model

    ratios = var / total
    if n_components is not None:
        if n_components < 1:
            raise ContractError(f"n_components={n_components} must be >= 1")
        k = min(int(n_components), k_max)
    else:
        cum = np.cumsum(ratios[:k_max])
        # tiny slack so variance_target=1.0 is reachable despite rounding
        k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
        k = min(k, k_max)

    components = _canonicalize_signs(vt[:k].T)
    model = PcaModel(mean, components, ratios[:k].copy(), k)
    return Xc @ components, model


def project(model: PcaModel, Y) -> np.ndarray:
    """Project new rows through a fitted model: ``(Y - mean) @ V``.

    Centering uses the training mean, so projecting the fit matrix itself
    reproduces the scores returned by fit_pca.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ContractError(f"expected 2-D matrix, got shape {Y.shape}")
    if Y.shape[1] != model.n_features:
        raise ContractError(
            f"column count {Y.shape[1]} does not match fitted model ({model.n_features})"
        )
    return (Y - model.mean) @ model.components
