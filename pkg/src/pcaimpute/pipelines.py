"""Imputation and imputation-classification strategies.

Five strategies over a dataset whose leading ``q`` columns are fully
observed (the F block) and whose trailing columns carry the missing
entries (the M block):

- ``traditional``: run the imputer on the full matrix F | M.
- ``pcai``: PCA-reduce F to scores R, impute on R | M instead; the reduced
  width makes iterative imputers much cheaper while keeping the information
  F contributes.
- ``pic`` / ``pic_reduce``: train/test variant of pcai feeding a classifier,
  optionally PCA-reducing the imputed M block as well.
- ``pca_on_full``: baseline that imputes everything first and PCA-reduces
  the full completed matrix before classification.

Test-side imputation in the pic strategies runs on the test batch itself
(R_test | M_test), so a test row's imputed values depend on the rest of the
batch; single fully observed vectors go through ``pic_predict``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractError, MaskedDataset, check_deadline
from .evaluation import ClassifierModel, derive_seed, time_stage, train_linear_svm
from .imputers import ImputationResult, ImputerSpec, impute
from .pca import PcaModel, fit_pca, project

STRATEGIES = ("traditional", "pcai", "pic", "pic_reduce", "pca_on_full")
IMPUTATION_STRATEGIES = ("traditional", "pcai")
CLASSIFICATION_STRATEGIES = ("pic", "pic_reduce", "pca_on_full")


@dataclass(frozen=True)
class PipelineSpec:
    """Strategy tag + imputer + PCA target + seed + cooperative time budget."""

    strategy: str
    imputer: ImputerSpec
    variance_target: float = 0.95
    seed: int = 0
    time_budget_seconds: float = 6500.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ContractError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if not 0.0 < self.variance_target <= 1.0:
            raise ContractError("variance_target must lie in (0, 1]")
        if self.time_budget_seconds <= 0.0:
            raise ContractError("time_budget_seconds must be > 0")


@dataclass(frozen=True)
class PicModel:
    """Trained pic pipeline: observed-block PCA, optional imputed-block PCA,
    and the classifier consuming their concatenation."""

    pca_f: PcaModel
    pca_m: PcaModel | None
    classifier: ClassifierModel
    reduce_miss: bool

    def __post_init__(self):
        if (self.pca_m is not None) != self.reduce_miss:
            raise ContractError("pca_m must be present exactly when reduce_miss is set")


def _add_time(timings: dict | None, key: str, seconds: float) -> None:
    if timings is not None:
        timings[key] = timings.get(key, 0.0) + seconds


def traditional_impute(
    ds: MaskedDataset, imputer: ImputerSpec, deadline: float | None = None
) -> ImputationResult:
    """Run the imputer on the full matrix, observed block included."""
    return impute(imputer, ds.data, ds.mask, deadline)


def pcai_impute(
    ds: MaskedDataset,
    imputer: ImputerSpec,
    variance_target: float = 0.95,
    n_components: int | None = None,
    deadline: float | None = None,
    timings: dict | None = None,
) -> tuple[np.ndarray, PcaModel]:
    """Impute the missing block against PCA scores of the observed block.

    Fits PCA on columns < q, concatenates the scores with the raw missing
    block, imputes that, and returns (completed missing block, PCA model).
    When a ``timings`` dict is supplied the "pca_fit" and "impute" stage
    seconds are accumulated into it.
    """
    if ds.q == 0:
        raise ContractError("pcai requires a fully observed leading block (q >= 1)")
    if ds.q == ds.n_cols:
        raise ContractError("no missing block to impute (q equals the column count)")
    (scores, model), dt = time_stage(
        "pca_fit", lambda: fit_pca(ds.observed_block, variance_target, n_components)
    )
    _add_time(timings, "pca_fit", dt)
    check_deadline(deadline)
    concat = np.hstack([scores, ds.missing_block])
    concat_mask = np.hstack(
        [np.zeros(scores.shape, dtype=bool), ds.missing_block_mask]
    )
    result, dt = time_stage("impute", lambda: impute(imputer, concat, concat_mask, deadline))
    _add_time(timings, "impute", dt)
    return result.completed[:, model.k :], model


def _imputed_missing_block(
    reduced: np.ndarray, ds: MaskedDataset, imputer: ImputerSpec,
    deadline: float | None,
) -> np.ndarray:
    concat = np.hstack([reduced, ds.missing_block])
    concat_mask = np.hstack(
        [np.zeros(reduced.shape, dtype=bool), ds.missing_block_mask]
    )
    return impute(imputer, concat, concat_mask, deadline).completed[:, reduced.shape[1] :]


def _require_labeled_pair(train: MaskedDataset, test: MaskedDataset) -> None:
    if train.labels is None or test.labels is None:
        raise ContractError("classification strategies require labels on both halves")
    if train.q != test.q or train.n_cols != test.n_cols:
        raise ContractError("train and test must share the partition and column count")


def pic_run(
    train: MaskedDataset,
    test: MaskedDataset,
    spec: PipelineSpec,
    deadline: float | None = None,
) -> tuple[PicModel, float, dict]:
    """Train and evaluate the pic pipeline; returns (model, accuracy, timings).

    Stages: PCA on the train observed block; project the test observed
    block; impute both missing blocks against their scores; optionally
    PCA-reduce the imputed train block (strategy "pic_reduce") and project
    the test one; train the classifier on the concatenation and score it on
    the test rows.  Timings are keyed pca_fit / project / impute / train /
    evaluate.
    """
    if spec.strategy not in ("pic", "pic_reduce"):
        raise ContractError(f"pic_run cannot execute strategy {spec.strategy!r}")
    _require_labeled_pair(train, test)
    if train.q == 0 or train.q == train.n_cols:
        raise ContractError("pic requires both a fully observed block and a missing block")
    reduce_miss = spec.strategy == "pic_reduce"
    timings: dict = {}

    (r_train, pca_f), dt = time_stage(
        "pca_fit", lambda: fit_pca(train.observed_block, spec.variance_target)
    )
    _add_time(timings, "pca_fit", dt)
    r_test, dt = time_stage("project", lambda: project(pca_f, test.observed_block))
    _add_time(timings, "project", dt)
    check_deadline(deadline)

    m_train, dt = time_stage(
        "impute", lambda: _imputed_missing_block(r_train, train, spec.imputer, deadline)
    )
    _add_time(timings, "impute", dt)
    m_test, dt = time_stage(
        "impute", lambda: _imputed_missing_block(r_test, test, spec.imputer, deadline)
    )
    _add_time(timings, "impute", dt)
    check_deadline(deadline)

    pca_m = None
    if reduce_miss:
        (m_train, pca_m), dt = time_stage(
            "pca_fit", lambda: fit_pca(m_train, spec.variance_target)
        )
        _add_time(timings, "pca_fit", dt)
        m_test, dt = time_stage("project", lambda: project(pca_m, m_test))
        _add_time(timings, "project", dt)
        check_deadline(deadline)

    x_train = np.hstack([r_train, m_train])
    x_test = np.hstack([r_test, m_test])
    classifier, dt = time_stage(
        "train",
        lambda: train_linear_svm(x_train, train.labels, seed=derive_seed(spec.seed, "svm")),
    )
    _add_time(timings, "train", dt)
    accuracy, dt = time_stage(
        "evaluate", lambda: float(np.mean(classifier.predict(x_test) == test.labels))
    )
    _add_time(timings, "evaluate", dt)
    return PicModel(pca_f, pca_m, classifier, reduce_miss), accuracy, timings


def pic_predict(model: PicModel, x) -> int:
    """Classify one fully observed vector through a trained pic model."""
    x = np.asarray(x, dtype=np.float64).ravel()
    q = model.pca_f.n_features
    if model.reduce_miss:
        m_width = model.pca_m.n_features
    else:
        m_width = model.classifier.weights.shape[0] - model.pca_f.k
    if x.size != q + m_width:
        raise ContractError(f"expected vector of length {q + m_width}, got {x.size}")
    if not np.isfinite(x).all():
        raise ContractError("pic_predict input must be fully observed")
    r = project(model.pca_f, x[:q].reshape(1, -1))
    tail = x[q:].reshape(1, -1)
    if model.reduce_miss:
        tail = project(model.pca_m, tail)
    return int(model.classifier.predict(np.hstack([r, tail]))[0])


def pca_on_full(
    train: MaskedDataset,
    test: MaskedDataset,
    spec: PipelineSpec,
    deadline: float | None = None,
) -> tuple[float, dict]:
    """Impute everything first, then PCA-reduce the full matrix and classify.

    Train and test matrices are imputed separately (test imputation sees
    only the test batch); one PCA is fitted on the completed train matrix.
    """
    if spec.strategy != "pca_on_full":
        raise ContractError(f"pca_on_full cannot execute strategy {spec.strategy!r}")
    _require_labeled_pair(train, test)
    timings: dict = {}

    full_train, dt = time_stage(
        "impute", lambda: impute(spec.imputer, train.data, train.mask, deadline).completed
    )
    _add_time(timings, "impute", dt)
    full_test, dt = time_stage(
        "impute", lambda: impute(spec.imputer, test.data, test.mask, deadline).completed
    )
    _add_time(timings, "impute", dt)
    check_deadline(deadline)

    (x_train, model), dt = time_stage(
        "pca_fit", lambda: fit_pca(full_train, spec.variance_target)
    )
    _add_time(timings, "pca_fit", dt)
    x_test, dt = time_stage("project", lambda: project(model, full_test))
    _add_time(timings, "project", dt)

    classifier, dt = time_stage(
        "train",
        lambda: train_linear_svm(x_train, train.labels, seed=derive_seed(spec.seed, "svm")),
    )
    _add_time(timings, "train", dt)
    accuracy, dt = time_stage(
        "evaluate", lambda: float(np.mean(classifier.predict(x_test) == test.labels))
    )
    _add_time(timings, "evaluate", dt)
    return accuracy, timings
