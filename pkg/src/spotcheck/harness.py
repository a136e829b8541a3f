"""Experiment harness: metrics, multi-seed suites, and report files.

Five suites mirror the study protocol on synthetic benchmarks:

- end2end: detector F1 at the default label budget (optionally with the CV
  rule baseline and the resampling baseline);
- ablation: one representation group removed at a time;
- aug-vs-super: channel augmentation vs training on the raw labels, at a
  scarce label budget;
- balance-sweep: F1 as the synthetic-error balance target varies;
- weak-precision: precision of the naive-Bayes pair generator against
  injected ground truth.

Each suite runs every seed end to end (inject, split, fit, predict, score)
and is bit-reproducible for a fixed seed list. Per-seed work that does not
depend on labels (injection, representation fitting) can be shared across
suites by passing prebuilt seed contexts.

Multi-seed aggregation reports the median run (the run with median F1, which
keeps precision/recall/F1 coupled) plus mean and standard error per metric.
"""

from __future__ import annotations

import os
import time
import warnings
from dataclasses import dataclass, field, replace
from math import sqrt
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .benchmark import InjectionSpec, generate_benchmark, inject_errors
from .channel import weak_label_cells
from .constraints import DenialConstraint, count_violations, parse_dc
from .data import CellRef, DataError, Dataset, LabeledCell, SplitSpec, TrainingSet, split
from .detector import Detector, DetectorConfig
from .features import FeaturePipeline

SUITES = ("end2end", "ablation", "aug-vs-super", "balance-sweep", "weak-precision")


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "EvalReport":
        # No positive predictions: precision reported as 0 by convention.
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(precision, recall, f1, tp, fp, fn)


def evaluate(
    predictions: Mapping[CellRef, bool],
    true_errors: set[CellRef],
    test_cells: Iterable[CellRef],
) -> EvalReport:
    """Precision/recall/F1 of error predictions over the test cells only."""
    tp = fp = fn = 0
    for cell in test_cells:
        if cell not in predictions:
            raise DataError(f"missing prediction for test cell {cell}")
        predicted = bool(predictions[cell])
        actual = cell in true_errors
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
    return EvalReport.from_counts(tp, fp, fn)


@dataclass(frozen=True)
class Aggregate:
    """Multi-seed summary: the median-F1 run plus per-metric mean and stderr."""

    median: EvalReport
    mean_precision: float
    mean_recall: float
    mean_f1: float
    stderr_precision: float
    stderr_recall: float
    stderr_f1: float
    n_runs: int


def aggregate(reports: list[EvalReport]) -> Aggregate:
    if not reports:
        raise DataError("cannot aggregate zero reports")
    ordered = sorted(reports, key=lambda r: r.f1)
    median = ordered[(len(ordered) - 1) // 2]

    def _mean_stderr(values: list[float]) -> tuple[float, float]:
        mean = float(np.mean(values))
        if len(values) < 2:
            return mean, 0.0
        return mean, float(np.std(values, ddof=1) / sqrt(len(values)))

    mp, sp = _mean_stderr([r.precision for r in reports])
    mr, sr = _mean_stderr([r.recall for r in reports])
    mf, sf = _mean_stderr([r.f1 for r in reports])
    return Aggregate(median, mp, mr, mf, sp, sr, sf, len(reports))


@dataclass(frozen=True)
class SuiteConfig:
    n_rows: int = 1000
    bench_seed: int = 7
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    error_rate: float = 0.05
    mix: tuple[tuple[str, float], ...] = (("typo", 1.0),)
    label_fraction: float = 0.10
    holdout_fraction: float = 0.10
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    use_constraints: bool = True
    include_baselines: bool = False
    ablate_groups: tuple[str, ...] = (
        "character",
        "cell-token",
        "tuple-bag",
        "dataset-neighbor",
    )
    balance_ratios: tuple[float, ...] = (0.05, 0.20, 0.35, 0.50, 0.65, 0.80, 0.95)
    weak_threshold: float = 0.9
    report_dir: str | None = None
    dataset_name: str = "bench"


@dataclass
class SeedContext:
    """Label-independent per-seed state, shareable across suites."""

    seed: int
    dirty: Dataset
    truth: dict[CellRef, str]
    labeled: TrainingSet  # every cell, observed vs clean value
    pipeline: FeaturePipeline
    constraints: list[DenialConstraint]


@dataclass
class SuiteResult:
    suite: str
    rows: list[dict]
    aggregates: dict[str, Aggregate]
    elapsed_seconds: float
    contexts: list[SeedContext]
    files: list[str] = field(default_factory=list)


def _labeled_cells(dirty: Dataset, truth: dict[CellRef, str]) -> TrainingSet:
    entries = [
        LabeledCell(cell, observed=dirty.value_at(cell), truth=truth[cell])
        for cell in sorted(truth)
    ]
    return TrainingSet(entries)


def build_contexts(config: SuiteConfig) -> list[SeedContext]:
    """Generate the benchmark and fit per-seed pipelines on injected data."""
    clean, constraint_texts = generate_benchmark(n_rows=config.n_rows, seed=config.bench_seed)
    texts = constraint_texts if config.use_constraints else []
    contexts = []
    for seed in config.seeds:
        spec = InjectionSpec(config.error_rate, dict(config.mix), seed=seed)
        dirty, truth = inject_errors(clean, spec)
        constraints = [parse_dc(text, dirty.schema) for text in texts]
        detector_config = config.detector.with_seed(seed)
        pipeline = FeaturePipeline.fit(dirty, constraints, detector_config.embed)
        contexts.append(
            SeedContext(seed, dirty, truth, _labeled_cells(dirty, truth), pipeline, constraints)
        )
    return contexts


def _split_for(context: SeedContext, config: SuiteConfig, label_fraction: float):
    spec = SplitSpec(label_fraction, config.holdout_fraction, seed=context.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return split(context.dirty, context.labeled, spec)


def _run_detector(
    context: SeedContext,
    config: SuiteConfig,
    detector_config: DetectorConfig,
    label_fraction: float,
) -> EvalReport:
    train, holdout, test = _split_for(context, config, label_fraction)
    detector = Detector(detector_config.with_seed(context.seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        detector.fit(
            context.dirty,
            train.entries,
            holdout.entries,
            context.constraints,
            pipeline=context.pipeline,
        )
    test_cells = [e.cell for e in test.entries]
    predictions = {p.cell: p.is_error for p in detector.predict(test_cells)}
    true_errors = {e.cell for e in test.entries if e.is_error}
    return evaluate(predictions, true_errors, test_cells)


def cv_baseline(context: SeedContext, config: SuiteConfig, label_fraction: float) -> EvalReport:
    """Flag every cell of every tuple that violates at least one constraint."""
    _, _, test = _split_for(context, config, label_fraction)
    counts = count_violations(context.dirty, context.constraints)
    violating = counts.sum(axis=1) > 0
    test_cells = [e.cell for e in test.entries]
    predictions = {cell: bool(violating[cell.tuple_index]) for cell in test_cells}
    true_errors = {e.cell for e in test.entries if e.is_error}
    return evaluate(predictions, true_errors, test_cells)


def _arm_rows(config: SuiteConfig, suite: str, arm: str, reports: dict[int, EvalReport]):
    return [
        {
            "suite": suite,
            "dataset": config.dataset_name,
            "arm": arm,
            "seed": seed,
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
        }
        for seed, report in sorted(reports.items())
    ]


def run_end2end(config: SuiteConfig, contexts: list[SeedContext] | None = None) -> SuiteResult:
    start = time.perf_counter()
    contexts = contexts or build_contexts(config)
    arms: dict[str, dict[int, EvalReport]] = {"AUG": {}}
    for context in contexts:
        arms["AUG"][context.seed] = _run_detector(
            context, config, config.detector, config.label_fraction
        )
        if config.include_baselines:
            arms.setdefault("CV", {})[context.seed] = cv_baseline(
                context, config, config.label_fraction
            )
            arms.setdefault("RES", {})[context.seed] = _run_detector(
                context,
                config,
                replace(config.detector, strategy="resample"),
                config.label_fraction,
            )
    rows = [row for arm, reports in arms.items() for row in _arm_rows(config, "end2end", arm, reports)]
    aggregates = {arm: aggregate(list(reports.values())) for arm, reports in arms.items()}
    return SuiteResult("end2end", rows, aggregates, time.perf_counter() - start, contexts)


def run_ablation(config: SuiteConfig, contexts: list[SeedContext] | None = None) -> SuiteResult:
    start = time.perf_counter()
    contexts = contexts or build_contexts(config)
    arms: dict[str, dict[int, EvalReport]] = {"full": {}}
    for context in contexts:
        arms["full"][context.seed] = _run_detector(
            context, config, config.detector, config.label_fraction
        )
        for group in config.ablate_groups:
            arm = f"no-{group}"
            detector_config = replace(config.detector, ablate=(group,))
            arms.setdefault(arm, {})[context.seed] = _run_detector(
                context, config, detector_config, config.label_fraction
            )
    rows = [row for arm, reports in arms.items() for row in _arm_rows(config, "ablation", arm, reports)]
    aggregates = {arm: aggregate(list(reports.values())) for arm, reports in arms.items()}
    return SuiteResult("ablation", rows, aggregates, time.perf_counter() - start, contexts)


def run_aug_vs_super(config: SuiteConfig, contexts: list[SeedContext] | None = None) -> SuiteResult:
    start = time.perf_counter()
    contexts = contexts or build_contexts(config)
    arms: dict[str, dict[int, EvalReport]] = {"AUG": {}, "SuperL": {}}
    for context in contexts:
        arms["AUG"][context.seed] = _run_detector(
            context, config, config.detector, config.label_fraction
        )
        arms["SuperL"][context.seed] = _run_detector(
            context,
            config,
            replace(config.detector, strategy="none"),
            config.label_fraction,
        )
    rows = [
        row for arm, reports in arms.items() for row in _arm_rows(config, "aug-vs-super", arm, reports)
    ]
    aggregates = {arm: aggregate(list(reports.values())) for arm, reports in arms.items()}
    return SuiteResult("aug-vs-super", rows, aggregates, time.perf_counter() - start, contexts)


def run_balance_sweep(config: SuiteConfig, contexts: list[SeedContext] | None = None) -> SuiteResult:
    start = time.perf_counter()
    contexts = contexts or build_contexts(config)
    arms: dict[str, dict[int, EvalReport]] = {}
    for context in contexts:
        for ratio in config.balance_ratios:
            arm = f"balance-{ratio:.2f}"
            detector_config = replace(
                config.detector, aug=replace(config.detector.aug, balance=ratio)
            )
            arms.setdefault(arm, {})[context.seed] = _run_detector(
                context, config, detector_config, config.label_fraction
            )
    rows = [
        row for arm, reports in arms.items() for row in _arm_rows(config, "balance-sweep", arm, reports)
    ]
    aggregates = {arm: aggregate(list(reports.values())) for arm, reports in arms.items()}
    return SuiteResult("balance-sweep", rows, aggregates, time.perf_counter() - start, contexts)


def run_weak_precision(config: SuiteConfig, contexts: list[SeedContext] | None = None) -> SuiteResult:
    start = time.perf_counter()
    contexts = contexts or build_contexts(config)
    reports: dict[int, EvalReport] = {}
    pair_counts: dict[int, int] = {}
    for context in contexts:
        emitted = weak_label_cells(context.dirty, config.weak_threshold)
        true_errors = {e.cell for e in context.labeled.entries if e.is_error}
        emitted_cells = {cell for cell, _ in emitted}
        tp = len(emitted_cells & true_errors)
        fp = len(emitted_cells - true_errors)
        fn = len(true_errors - emitted_cells)
        reports[context.seed] = EvalReport.from_counts(tp, fp, fn)
        pair_counts[context.seed] = len(emitted)
    rows = _arm_rows(config, "weak-precision", "weak", reports)
    for row in rows:
        row["n_pairs"] = pair_counts[row["seed"]]
    aggregates = {"weak": aggregate(list(reports.values()))}
    return SuiteResult("weak-precision", rows, aggregates, time.perf_counter() - start, contexts)


_RUNNERS = {
    "end2end": run_end2end,
    "ablation": run_ablation,
    "aug-vs-super": run_aug_vs_super,
    "balance-sweep": run_balance_sweep,
    "weak-precision": run_weak_precision,
}


def report_directory(config: SuiteConfig | None = None) -> Path:
    configured = config.report_dir if config is not None else None
    return Path(configured or os.environ.get("SPOTCHECK_REPORT_DIR", "reports"))


def write_report(result: SuiteResult, directory: Path) -> list[str]:
    """One machine-readable TSV plus a human-readable summary per suite."""
    directory.mkdir(parents=True, exist_ok=True)
    columns = ["suite", "dataset", "arm", "seed", "precision", "recall", "f1"]
    extras = sorted({key for row in result.rows for key in row} - set(columns))
    table_path = directory / f"{result.suite}.tsv"
    with open(table_path, "w", encoding="utf-8") as handle:
        handle.write("\t".join(columns + extras) + "\n")
        for row in result.rows:
            values = [str(row[c]) for c in columns] + [str(row.get(e, "")) for e in extras]
            handle.write("\t".join(values) + "\n")
    summary_path = directory / f"{result.suite}-summary.txt"
    with open(summary_path, "w", encoding="utf-8") as handle:
        handle.write(f"suite: {result.suite}\n")
        handle.write(f"elapsed_seconds: {result.elapsed_seconds:.1f}\n")
        for arm in sorted(result.aggregates):
            agg = result.aggregates[arm]
            med = agg.median
            handle.write(
                f"{arm}: median P={med.precision:.3f} R={med.recall:.3f} F1={med.f1:.3f} | "
                f"mean F1={agg.mean_f1:.3f}±{agg.stderr_f1:.3f} "
                f"P={agg.mean_precision:.3f}±{agg.stderr_precision:.3f} "
                f"R={agg.mean_recall:.3f}±{agg.stderr_recall:.3f} "
                f"(n={agg.n_runs})\n"
            )
    result.files = [str(table_path), str(summary_path)]
    return result.files


def run_experiment(
    name: str,
    config: SuiteConfig | None = None,
    contexts: list[SeedContext] | None = None,
    write: bool = True,
) -> SuiteResult:
    """Run one named suite; unknown names list the available suites."""
    if name not in _RUNNERS:
        raise DataError(f"unknown suite {name!r}; available: {', '.join(SUITES)}")
    config = config or SuiteConfig()
    result = _RUNNERS[name](config, contexts)
    if write:
        write_report(result, report_directory(config))
    return result
