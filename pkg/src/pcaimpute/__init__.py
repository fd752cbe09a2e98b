"""Imputation of datasets whose columns split into a fully observed block
and a block with missing entries, with a PCA shortcut that runs the imputer
on scores of the observed block instead of the block itself."""

from .core import (
    ContractError,
    MaskedDataset,
    TimeBudgetExceeded,
    apply_mcar,
    rearrange_columns,
    split_rows,
)
from .evaluation import (
    ClassifierModel,
    ExperimentRecord,
    derive_seed,
    kfold_cv,
    mse_masked,
    train_linear_svm,
)
from .harness import (
    RunConfig,
    SyntheticSpec,
    emit_report,
    generate_synthetic,
    load_csv,
    load_run_config,
    run_experiments,
)
from .imputers import IMPUTER_KINDS, ImputationResult, ImputerSpec, impute
from .pca import PcaModel, fit_pca, project
from .pipelines import (
    STRATEGIES,
    PicModel,
    PipelineSpec,
    pca_on_full,
    pcai_impute,
    pic_predict,
    pic_run,
    traditional_impute,
)

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "MaskedDataset",
    "TimeBudgetExceeded",
    "apply_mcar",
    "rearrange_columns",
    "split_rows",
    "PcaModel",
    "fit_pca",
    "project",
    "IMPUTER_KINDS",
    "ImputerSpec",
    "ImputationResult",
    "impute",
    "ClassifierModel",
    "ExperimentRecord",
    "derive_seed",
    "kfold_cv",
    "mse_masked",
    "train_linear_svm",
    "STRATEGIES",
    "PipelineSpec",
    "PicModel",
    "traditional_impute",
    "pcai_impute",
    "pic_run",
    "pic_predict",
    "pca_on_full",
    "RunConfig",
    "SyntheticSpec",
    "generate_synthetic",
    "load_csv",
    "load_run_config",
    "run_experiments",
    "emit_report",
]
