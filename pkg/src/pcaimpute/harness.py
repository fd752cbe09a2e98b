"""Experiment orchestration: CSV and synthetic data sources, benchmark
sweeps with per-cell time budgets, and report emission.

Sweeps run the Cartesian product of missing rates x strategies x imputers
sequentially (worker count 1, noted in the table header so timing columns
are comparable).  Every cell gets a seed that is a pure function of
(master seed, rate, strategy, imputer), the mask at a given rate is shared
by all strategy/imputer cells, and a cell that exceeds its time budget or
fails on resources becomes an NA record without stopping the sweep.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ContractError,
    MaskedDataset,
    TimeBudgetExceeded,
    apply_mcar,
    rearrange_columns,
)
from .evaluation import ExperimentRecord, derive_seed, fold_indices, mse_masked
from .imputers import IMPUTER_KINDS, ImputerSpec
from .pipelines import (
    CLASSIFICATION_STRATEGIES,
    STRATEGIES,
    PipelineSpec,
    pca_on_full,
    pcai_impute,
    pic_run,
    traditional_impute,
)

MISSING_TOKENS = ("", "nan")


@dataclass(frozen=True)
class SyntheticSpec:
    """Low-rank ground-truth generator: data = A @ B.T + sigma * noise with
    seeded standard-normal factors, min-max normalized per column; labels
    are the argmax of a seeded linear map of the latent rows."""

    rows: int
    cols: int
    rank: int
    sigma: float = 0.01
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1 or self.rank >= min(self.rows, self.cols):
            raise ContractError("rank must satisfy 1 <= rank < min(rows, cols)")
        if self.sigma < 0:
            raise ContractError("sigma must be >= 0")
        if self.n_classes < 2:
            raise ContractError("n_classes must be >= 2")


def minmax_normalize(X: np.ndarray) -> np.ndarray:
    """Scale each column to [0, 1]; constant columns map to 0."""
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (X - lo) / safe, 0.0)


def generate_synthetic(spec: SyntheticSpec) -> MaskedDataset:
    """Deterministic complete ground truth (mask all-False, q = cols)."""
    rng = np.random.default_rng(spec.seed)
    A = rng.standard_normal((spec.rows, spec.rank))
    B = rng.standard_normal((spec.cols, spec.rank))
    noise = rng.standard_normal((spec.rows, spec.cols))
    data = minmax_normalize(A @ B.T + spec.sigma * noise)
    teacher = rng.standard_normal((spec.rank, spec.n_classes))
    labels = np.argmax(A @ teacher, axis=1)
    mask = np.zeros(data.shape, dtype=bool)
    return MaskedDataset(data, mask, q=spec.cols, labels=labels)


@dataclass(frozen=True)
class LoadedCsv:
    """Parsed CSV: rearranged dataset plus enough context to undo it."""

    dataset: MaskedDataset
    feature_names: list[str]   # in rearranged column order
    permutation: np.ndarray    # dataset column i came from input feature permutation[i]
    label_column: str | None
    label_names: list[str]     # class code -> original label string


def load_csv(path: str, label_column: str | None = None) -> LoadedCsv:
    """Read a headered CSV into a MaskedDataset.

    Empty cells and the literal "NaN" (case-insensitive) are missing; every
    other feature cell must parse as a decimal real.  Label values map to
    dense integer codes in first-appearance order.  Columns are rearranged
    so fully observed features come first (q = their count).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ContractError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise ContractError(f"{path}: no data rows")

    header = [name.strip() for name in header]
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise ContractError(f"{path}: unknown label column {label_column!r}")
        label_idx = header.index(label_column)
    feature_idx = [j for j in range(len(header)) if j != label_idx]
    feature_names = [header[j] for j in feature_idx]

    n, p = len(rows), len(feature_idx)
    data = np.zeros((n, p))
    mask = np.zeros((n, p), dtype=bool)
    labels = None
    label_names: list[str] = []
    if label_idx is not None:
        labels = np.zeros(n, dtype=np.int64)
        codes: dict[str, int] = {}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ContractError(
                f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}"
            )
        for out_j, j in enumerate(feature_idx):
            cell = row[j].strip()
            if cell.lower() in MISSING_TOKENS:
                mask[i, out_j] = True
                continue
            try:
                data[i, out_j] = float(cell)
            except ValueError:
                raise ContractError(
                    f"{path}: row {i + 2}, column {header[j]!r}: "
                    f"cannot parse {cell!r} as a number"
                ) from None
        if label_idx is not None:
            cell = row[label_idx].strip()
            if cell.lower() in MISSING_TOKENS:
                raise ContractError(f"{path}: row {i + 2}: missing label")
            if cell not in codes:
                codes[cell] = len(codes)
                label_names.append(cell)
            labels[i] = codes[cell]

    ds, perm = rearrange_columns(data, mask, labels)
    return LoadedCsv(
        dataset=ds,
        feature_names=[feature_names[j] for j in perm],
        permutation=perm,
        label_column=label_column,
        label_names=label_names,
    )


def _format_cell(value: float) -> str:
    return repr(float(value))


def write_csv(
    path: str,
    ds: MaskedDataset,
    feature_names: list[str] | None = None,
    label_column: str = "label",
    label_names: list[str] | None = None,
) -> None:
    """Emit a dataset as CSV: missing entries become empty cells, the label
    column (when labels exist) is written last."""
    n, p = ds.data.shape
    names = feature_names if feature_names is not None else [f"f{j}" for j in range(p)]
    if len(names) != p:
        raise ContractError(f"expected {p} feature names, got {len(names)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ([label_column] if ds.labels is not None else []))
        for i in range(n):
            row = [
                "" if ds.mask[i, j] else _format_cell(ds.data[i, j]) for j in range(p)
            ]
            if ds.labels is not None:
                code = int(ds.labels[i])
                row.append(label_names[code] if label_names else str(code))
            writer.writerow(row)


def write_mask_csv(path: str, ds: MaskedDataset, feature_names: list[str] | None = None) -> None:
    """Sidecar mask as 0/1 integers under the same feature header."""
    n, p = ds.mask.shape
    names = feature_names if feature_names is not None else [f"f{j}" for j in range(p)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n):
            writer.writerow(ds.mask[i].astype(int).tolist())


@dataclass
class RunConfig:
    """Sweep definition; mirrors the flat JSON config file key-for-key."""

    csv_path: str | None = None
    label_column: str | None = None
    synth_rows: int | None = None
    synth_cols: int | None = None
    synth_rank: int | None = None
    synth_sigma: float = 0.01
    synth_classes: int = 2
    q: int | None = None
    missing_rates: tuple = (0.2, 0.4, 0.6)
    strategies: tuple = ("traditional", "pcai")
    imputers: tuple = ("mean",)
    imputer_params: dict = field(default_factory=dict)
    variance_target: float = 0.95
    folds: int = 5
    seed: int = 0
    time_budget_seconds: float = 6500.0
    output: str = "report"

    def __post_init__(self):
        self.missing_rates = tuple(float(r) for r in self.missing_rates)
        self.strategies = tuple(self.strategies)
        self.imputers = tuple(self.imputers)
        if not self.missing_rates or not all(0.0 < r < 1.0 for r in self.missing_rates):
            raise ContractError("missing_rates must be a nonempty list of values in (0, 1)")
        if not self.strategies:
            raise ContractError("strategies must be nonempty")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ContractError(f"unknown strategy {s!r}; expected one of {STRATEGIES}")
        if not self.imputers:
            raise ContractError("imputers must be nonempty")
        for kind in self.imputers:
            if kind not in IMPUTER_KINDS:
                raise ContractError(f"unknown imputer {kind!r}; expected one of {IMPUTER_KINDS}")
        has_csv = self.csv_path is not None
        has_synth = None not in (self.synth_rows, self.synth_cols, self.synth_rank)
        if has_csv == has_synth:
            raise ContractError(
                "exactly one data source required: csv_path or synth_rows/cols/rank"
            )
        if self.folds < 2:
            raise ContractError("folds must be >= 2")
        if self.time_budget_seconds <= 0:
            raise ContractError("time_budget_seconds must be > 0")


CONFIG_KEYS = tuple(RunConfig.__dataclass_fields__)


def load_run_config(path: str, overrides: dict | None = None) -> RunConfig:
    """Parse a flat JSON config file; ``overrides`` (e.g. CLI flags) win."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ContractError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise ContractError(f"{path}: config must be a flat JSON object")
    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise ContractError(f"{path}: unknown config keys {sorted(unknown)}")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**raw)


def default_partition(cols: int) -> int:
    """Default observed-block size: ceil(5p/6), keeping the missing block a
    minority of columns."""
    return math.ceil(5 * cols / 6)


def _ground_truth(config: RunConfig) -> MaskedDataset:
    if config.csv_path is not None:
        loaded = load_csv(config.csv_path, config.label_column)
        ds = loaded.dataset
        if ds.mask.any():
            raise ContractError(
                "benchmark ground truth must be complete; "
                f"{config.csv_path} has {ds.n_missing()} missing entries"
            )
        ds = MaskedDataset(minmax_normalize(ds.data), ds.mask, ds.q, ds.labels)
    else:
        ds = generate_synthetic(
            SyntheticSpec(
                rows=config.synth_rows,
                cols=config.synth_cols,
                rank=config.synth_rank,
                sigma=config.synth_sigma,
                n_classes=config.synth_classes,
                seed=derive_seed(config.seed, "synthetic"),
            )
        )
    q = config.q if config.q is not None else default_partition(ds.n_cols)
    if not 1 <= q < ds.n_cols:
        raise ContractError(f"q={q} must satisfy 1 <= q < cols={ds.n_cols}")
    needs_labels = any(s in CLASSIFICATION_STRATEGIES for s in config.strategies)
    if needs_labels and ds.labels is None:
        raise ContractError("classification strategies require a label column")
    return ds.with_partition(q)


def _classification_cell(
    masked: MaskedDataset, spec: PipelineSpec, folds: int, fold_seed: int,
    deadline: float | None,
) -> tuple[float, list, dict]:
    accs = []
    timings: dict = {}
    run = pic_run if spec.strategy in ("pic", "pic_reduce") else None
    for test_rows in fold_indices(masked.labels, folds, fold_seed, stratify=True):
        train_rows = np.setdiff1d(np.arange(masked.n_rows), test_rows)
        train, test = masked.take_rows(train_rows), masked.take_rows(test_rows)
        if run is not None:
            _, acc, fold_timings = run(train, test, spec, deadline)
        else:
            acc, fold_timings = pca_on_full(train, test, spec, deadline)
        accs.append(acc)
        for key, dt in fold_timings.items():
            timings[key] = timings.get(key, 0.0) + dt
    return float(np.mean(accs)), [float(a) for a in accs], timings


def run_cell(
    truth: MaskedDataset, masked: MaskedDataset, spec: PipelineSpec, folds: int,
) -> ExperimentRecord:
    """Execute one strategy x imputer cell on an already-masked dataset."""
    deadline = time.monotonic() + spec.time_budget_seconds
    timings: dict = {}
    mse = accuracy = None
    fold_accs: list = []
    if spec.strategy == "traditional":
        start = time.monotonic()
        result = traditional_impute(masked, spec.imputer, deadline)
        timings["impute"] = time.monotonic() - start
        mse = mse_masked(result.completed, truth.data, masked.mask)
    elif spec.strategy == "pcai":
        m_prime, _ = pcai_impute(
            masked, spec.imputer, spec.variance_target,
            deadline=deadline, timings=timings,
        )
        mse = mse_masked(m_prime, truth.missing_block, masked.missing_block_mask)
    else:
        accuracy, fold_accs, timings = _classification_cell(
            masked, spec, folds, derive_seed(spec.seed, "folds"), deadline
        )
    return ExperimentRecord(
        strategy=spec.strategy,
        imputer=spec.imputer.kind,
        missing_rate=0.0,  # filled by the sweep
        mse=mse,
        accuracy=accuracy,
        fold_accuracies=fold_accs,
        stage_seconds={k: float(v) for k, v in timings.items()},
        total_seconds=float(sum(timings.values())),
        seed=spec.seed,
    )


def run_experiments(config: RunConfig) -> list[ExperimentRecord]:
    """Run the full sweep; per-cell failures become NA records, never aborts.

    The mask at each missing rate is generated once (seed derived from the
    master seed and the rate alone) and shared across every strategy and
    imputer at that rate.  Fold assignment is likewise shared per rate so
    classification strategies are compared on identical splits.
    """
    truth = _ground_truth(config)
    records = []
    for rate in config.missing_rates:
        masked = apply_mcar(truth, rate, derive_seed(config.seed, "mask", rate))
        for strategy in config.strategies:
            for kind in config.imputers:
                cell_seed = derive_seed(config.seed, rate, strategy, kind)
                spec = PipelineSpec(
                    strategy=strategy,
                    imputer=ImputerSpec(kind, **config.imputer_params),
                    variance_target=config.variance_target,
                    seed=cell_seed,
                    time_budget_seconds=config.time_budget_seconds,
                )
                try:
                    record = run_cell(truth, masked, spec, config.folds)
                    record.missing_rate = float(rate)
                except TimeBudgetExceeded:
                    record = _na_record(spec, rate, "time budget exceeded")
                except MemoryError:
                    record = _na_record(spec, rate, "memory allocation failed")
                except Exception as e:  # noqa: BLE001 - cell failures must not kill the sweep
                    record = _na_record(spec, rate, f"{type(e).__name__}: {e}")
                records.append(record)
    return records


def _na_record(spec: PipelineSpec, rate: float, reason: str) -> ExperimentRecord:
    return ExperimentRecord(
        strategy=spec.strategy,
        imputer=spec.imputer.kind,
        missing_rate=float(rate),
        na=True,
        na_reason=reason,
        seed=spec.seed,
    )


RECORD_FIELDS = (
    "strategy", "imputer", "missing_rate", "mse", "accuracy",
    "fold_accuracies", "stage_seconds", "total_seconds", "seed",
    "na", "na_reason",
)
TIMING_FIELDS = ("stage_seconds", "total_seconds")


def record_to_dict(record: ExperimentRecord) -> dict:
    return {name: getattr(record, name) for name in RECORD_FIELDS}


def write_report_jsonl(records: list[ExperimentRecord], path: str) -> None:
    """Machine-readable report: one JSON object per record per line."""
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record)) + "\n")


def read_report_jsonl(path: str) -> list[ExperimentRecord]:
    """Inverse of write_report_jsonl; round-trips records exactly."""
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                records.append(ExperimentRecord(**json.loads(line)))
    return records


def _table_cell(record: ExperimentRecord) -> str:
    if record.na:
        return "NA"
    metric = record.mse if record.mse is not None else record.accuracy
    return f"({metric:.3f}, {record.total_seconds:.3f})"


def format_table(records: list[ExperimentRecord]) -> str:
    """Human-readable table: one row per imputer/strategy pair, one column
    per missing rate, (metric, seconds) cells, NA rendered literally."""
    if not records:
        raise ContractError("no records to report")
    rates = sorted({r.missing_rate for r in records})
    pairs = []
    for r in records:
        if (r.imputer, r.strategy) not in pairs:
            pairs.append((r.imputer, r.strategy))
    by_key = {(r.imputer, r.strategy, r.missing_rate): r for r in records}

    header = ["imputer", "strategy"] + [f"{rate * 100:g}%" for rate in rates]
    body = []
    for imputer, strategy in pairs:
        cells = []
        for rate in rates:
            rec = by_key.get((imputer, strategy, rate))
            cells.append(_table_cell(rec) if rec is not None else "")
        body.append([imputer, strategy] + cells)

    widths = [max(len(row[c]) for row in [header] + body) for c in range(len(header))]
    lines = ["# metric cells: (mse|accuracy, seconds); workers: 1"]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def emit_report(records: list[ExperimentRecord], path_base: str) -> tuple[str, str]:
    """Write ``<base>.jsonl`` and ``<base>.txt``; returns both paths."""
    jsonl_path = path_base + ".jsonl"
    table_path = path_base + ".txt"
    write_report_jsonl(records, jsonl_path)
    with open(table_path, "w") as fh:
        fh.write(format_table(records))
    return jsonl_path, table_path
