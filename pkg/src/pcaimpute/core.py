"""Dataset container with an explicit missingness mask and column partition.

A dataset here is a dense float matrix whose columns split into a leading
block of fully observed features (the first ``q`` columns) and a trailing
block that may contain missing entries.  Missing entries are carried two
ways: a boolean mask (the single source of truth, ``True`` = missing) and a
NaN sentinel mirrored into the data array for convenience.

All randomness in this package goes through ``numpy.random.Generator``
seeded with PCG64 (``numpy.random.default_rng``), so every operation is
bit-reproducible across runs and platforms for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ContractError(ValueError):
    """An argument violated a documented precondition or invariant."""


class TimeBudgetExceeded(RuntimeError):
    """Raised by cooperative deadline checks inside long-running kernels."""


def check_deadline(deadline: float | None) -> None:
    """Raise TimeBudgetExceeded if the monotonic deadline has passed."""
    import time

    if deadline is not None and time.monotonic() > deadline:
        raise TimeBudgetExceeded("time budget exceeded")


def _as_float_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractError(f"{name} must be non-empty, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class MaskedDataset:
    """Immutable matrix + missingness mask + column partition (+ labels).

    Parameters
    ----------
    data : (n, p) float array; entries at masked positions are rewritten to
        NaN on construction, all other entries must be finite.
    mask : (n, p) bool array, True where the entry is missing.
    q : number of leading fully observed columns; the mask must be all-False
        in columns < q.
    labels : optional (n,) integer class labels in {0..C-1}.
    """

    data: np.ndarray
    mask: np.ndarray
    q: int
    labels: np.ndarray | None = None

    def __post_init__(self):
        data = _as_float_matrix(self.data, "data")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != data.shape:
            raise ContractError(
                f"mask shape {mask.shape} does not match data shape {data.shape}"
            )
        q = int(self.q)
        if not 0 <= q <= data.shape[1]:
            raise ContractError(f"q={q} outside [0, {data.shape[1]}]")
        if mask[:, :q].any():
            raise ContractError(f"missing entries found in fully observed columns < q={q}")
        data = data.copy()
        data[mask] = np.nan
        if not np.isfinite(data[~mask]).all():
            raise ContractError("non-finite values present at observed positions")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (data.shape[0],):
                raise ContractError(
                    f"labels shape {labels.shape} does not match row count {data.shape[0]}"
                )
            if not np.issubdtype(labels.dtype, np.integer):
                if not np.all(labels == labels.astype(np.int64)):
                    raise ContractError("labels must be integers")
            labels = labels.astype(np.int64)
            if labels.min() < 0:
                raise ContractError("labels must be nonnegative class codes")
            labels = labels.copy()
            labels.setflags(write=False)
        mask = mask.copy()
        for arr in (data, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    @property
    def observed_block(self) -> np.ndarray:
        """The fully observed leading block (columns < q)."""
        return self.data[:, : self.q]

    @property
    def missing_block(self) -> np.ndarray:
        """The trailing block that may contain missing entries (columns >= q)."""
        return self.data[:, self.q :]

    @property
    def missing_block_mask(self) -> np.ndarray:
        return self.mask[:, self.q :]

    def n_missing(self) -> int:
        return int(self.mask.sum())

    def n_classes(self) -> int:
        if self.labels is None:
            raise ContractError("dataset has no labels")
        return int(self.labels.max()) + 1

    def with_partition(self, q: int) -> "MaskedDataset":
        """Return a copy with a different partition index (must stay valid)."""
        return MaskedDataset(self.data, self.mask, q, self.labels)

    def take_rows(self, rows: np.ndarray) -> "MaskedDataset":
        labels = self.labels[rows] if self.labels is not None else None
        return MaskedDataset(self.data[rows], self.mask[rows], self.q, labels)


def rearrange_columns(data, mask, labels=None) -> tuple[MaskedDataset, np.ndarray]:
    """Permute columns so all fully observed ones come first.

    Column order is stable within the observed and missing groups.  Returns
    the rearranged dataset and the applied permutation ``perm`` such that
    ``out.data[:, i] == data[:, perm[i]]``; invert with
    ``inv = np.argsort(perm)``.
    """
    data = _as_float_matrix(data, "data")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != data.shape:
        raise ContractError(
            f"mask shape {mask.shape} does not match data shape {data.shape}"
        )
    col_has_missing = mask.any(axis=0)
    perm = np.concatenate(
        [np.flatnonzero(~col_has_missing), np.flatnonzero(col_has_missing)]
    ).astype(np.int64)
    q = int((~col_has_missing).sum())
    ds = MaskedDataset(data[:, perm], mask[:, perm], q, labels)
    return ds, perm


def apply_mcar(truth: MaskedDataset, rate: float, seed: int) -> MaskedDataset:
    """Mask entries of the trailing block completely at random.

    Selects exactly ``floor(rate * n_rows * (n_cols - q))`` positions without
    replacement from columns >= q (count-exact, not per-entry Bernoulli) and
    marks them missing in a copy.  Deterministic for a fixed seed.
    """
    if not 0.0 <= rate <= 1.0:
        raise ContractError(f"rate={rate} outside [0, 1]")
    if truth.mask.any():
        raise ContractError("ground truth already contains missing entries")
    n, p = truth.data.shape
    q = truth.q
    block = n * (p - q)
    if block == 0:
        if rate > 0:
            raise ContractError("q equals the column count; nothing to mask")
        return truth
    count = int(np.floor(rate * block))
    rng = np.random.default_rng(seed)
    flat = rng.choice(block, size=count, replace=False)
    mask = np.array(truth.mask)
    rows = flat // (p - q)
    cols = q + flat % (p - q)
    mask[rows, cols] = True
    return MaskedDataset(truth.data, mask, q, truth.labels)


def split_rows(
    ds: MaskedDataset, test_fraction: float, seed: int, stratify: bool = True
) -> tuple[MaskedDataset, MaskedDataset]:
    """Disjoint train/test row split; stratified per class when requested.

    Test size is ``floor(test_fraction * n)`` rows overall (per class when
    stratified), bumped to one row if the floors leave the test half empty.
    Both halves keep the parent's partition index and ascending row order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ContractError(f"test_fraction={test_fraction} outside (0, 1)")
    n = ds.n_rows
    if n < 2:
        raise ContractError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    if stratify:
        if ds.labels is None:
            raise ContractError("stratified split requested but dataset has no labels")
        test_idx = []
        classes = np.unique(ds.labels)
        for c in classes:
            members = np.flatnonzero(ds.labels == c)
            if members.size < 2:
                raise ContractError(f"class {c} has fewer than 2 rows; cannot stratify")
            k = int(np.floor(test_fraction * members.size))
            shuffled = rng.permutation(members)
            test_idx.append(shuffled[:k])
        test_idx = np.concatenate(test_idx).astype(np.int64)
        if test_idx.size == 0:
            largest = classes[np.argmax(np.bincount(ds.labels))]
            members = rng.permutation(np.flatnonzero(ds.labels == largest))
            test_idx = members[:1]
    else:
        k = max(1, int(np.floor(test_fraction * n)))
        test_idx = rng.permutation(n)[:k]
    test_idx = np.sort(test_idx)
    train_idx = np.setdiff1d(np.arange(n), test_idx)
    if train_idx.size == 0:
        raise ContractError("split left no training rows")
    return ds.take_rows(train_idx), ds.take_rows(test_idx)
