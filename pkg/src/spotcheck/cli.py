"""Command-line surface: train, detect, augment, inject, evaluate, inspect.

One binary with subcommands. Every subcommand accepts `--config FILE` (a JSON
object of option-name -> value); explicit flags win over the config file,
which wins over built-in defaults. Exit codes: 0 success, 1 runtime failure
(bad data, unattainable request), 2 usage or config error (bad flags, missing
files, unknown suite).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

from .benchmark import ERROR_KINDS, InjectionSpec, inject_errors
from .channel import AugConfig, LabeledPair, NoisyChannel, augment, weak_label_cells
from .constraints import load_constraints
from .data import (
    CellRef,
    ConfigError,
    DataError,
    SplitSpec,
    TrainingSet,
    load_csv,
    load_ground_truth,
    save_csv,
    save_ground_truth,
    split,
)
from .detector import Detector, DetectorConfig
from .embeddings import EmbeddingConfig
from .features import FeaturePipeline
from .harness import SUITES, SuiteConfig, evaluate, run_experiment
from .neural import TrainConfig

PREDICTIONS_HEADER = ("tuple_index", "attribute", "label", "probability")


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 2."""


# -- configuration plumbing ----------------------------------------------------

# Option keys that name files the command reads (outputs are never checked;
# e.g. `model` is an input for detect but the output of train).
_INPUT_PATH_KEYS = {
    "train": ("data", "labels", "constraints"),
    "detect": ("model", "data", "labels"),
    "augment": ("data", "labels"),
    "inject-errors": ("data",),
    "evaluate": ("predictions", "truth", "data"),
    "bench": (),
    "inspect-policy": ("pairs", "data", "labels"),
    "inspect-features": ("model",),
}

# Options a command cannot run without.  These are deliberately not argparse
# `required` flags: a config file may supply them, and argparse would reject
# the invocation before the file is read.
_REQUIRED_KEYS = {
    "train": ("data", "labels", "model"),
    "detect": ("model", "data", "out"),
    "augment": ("data", "labels", "out"),
    "inject-errors": ("data", "out", "truth_out"),
    "evaluate": ("predictions", "truth", "data"),
    "bench": (),
    "inspect-policy": ("value",),
    "inspect-features": ("model",),
}


@dataclass(frozen=True)
class RunConfig:
    """Merged options for one command: defaults < config file < flags."""

    command: str
    options: dict

    def get(self, key, default=None):
        return self.options.get(key, default)

    def __getitem__(self, key):
        return self.options[key]

    def to_json(self) -> str:
        return json.dumps({"command": self.command, "options": self.options}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        raw = json.loads(text)
        return cls(raw["command"], raw["options"])

    def validate(self) -> "RunConfig":
        absent = [
            f"--{key.replace('_', '-')}"
            for key in _REQUIRED_KEYS.get(self.command, ())
            if not self.options.get(key)
        ]
        if absent:
            raise UsageError(f"missing required option(s): {', '.join(absent)}")
        missing = [
            str(self.options[key])
            for key in _INPUT_PATH_KEYS.get(self.command, ())
            if self.options.get(key) and not Path(self.options[key]).exists()
        ]
        if missing:
            raise UsageError(f"missing input file(s): {', '.join(missing)}")
        return self


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return {key.replace("-", "_"): value for key, value in raw.items()}


def _merge(args: argparse.Namespace, defaults: dict) -> RunConfig:
    """Layer defaults, then the config file, then explicitly given flags."""
    given = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "func", "config") and value is not None and value is not False
    }
    options = dict(defaults)
    options.update(_load_config_file(getattr(args, "config", None)))
    options.update(given)
    return RunConfig(args.command, options).validate()


def _parse_mix(text: str) -> dict[str, float]:
    """Parse 'typo=0.7,swap-chars=0.3' into an error-kind weight map."""
    mix = {}
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"bad mix entry {part!r}; expected kind=weight")
        kind, _, weight = part.partition("=")
        kind = kind.strip()
        if kind not in ERROR_KINDS:
            raise UsageError(f"unknown error kind {kind!r}; choose from {', '.join(ERROR_KINDS)}")
        try:
            mix[kind] = float(weight)
        except ValueError:
            raise UsageError(f"bad weight {weight!r} for kind {kind!r}") from None
    return mix


def _parse_seeds(text: str) -> tuple[int, ...]:
    """'5' means seeds 0..4; '3,7,11' means exactly those seeds."""
    try:
        if "," in text:
            return tuple(int(part) for part in text.split(","))
        return tuple(range(int(text)))
    except ValueError:
        raise UsageError(f"bad seeds {text!r}; expected a count or a comma list") from None


def _detector_config(cfg: RunConfig) -> DetectorConfig:
    embed = EmbeddingConfig(
        dims=int(cfg.get("embed_dims", 50)),
        epochs=int(cfg.get("embed_epochs", 5)),
        seed=int(cfg.get("seed", 0)),
    )
    train = TrainConfig(
        epochs=int(cfg.get("epochs", 500)),
        batch_size=int(cfg.get("batch_size", 5)),
        lr=float(cfg.get("lr", 1e-3)),
        hidden=int(cfg.get("hidden", 64)),
        seed=int(cfg.get("seed", 0)),
    )
    aug = AugConfig(
        alpha=float(cfg.get("alpha", 1.0)),
        balance=float(cfg.get("balance", 0.5)),
        seed=int(cfg.get("seed", 0)),
    )
    strategy = "none" if cfg.get("no_augment") else cfg.get("strategy", "augment")
    try:
        return DetectorConfig(
            embed=embed,
            train=train,
            aug=aug,
            strategy=strategy,
            threshold=float(cfg.get("threshold", 0.5)),
            weak_threshold=float(cfg.get("weak_threshold", 0.9)),
            min_channel_pairs=int(cfg.get("min_channel_pairs", 20)),
            ablate=tuple(cfg.get("ablate", ())),
        )
    except (DataError, ConfigError) as exc:
        raise UsageError(str(exc)) from None


def _load_constraint_list(cfg: RunConfig, schema):
    path = cfg.get("constraints")
    return load_constraints(path, schema) if path else []


def _learn_channel_from(dataset, labels: TrainingSet, cfg: RunConfig) -> NoisyChannel:
    pairs = [LabeledPair(e.truth, e.observed) for e in labels.errors()]
    if len(pairs) < int(cfg.get("min_channel_pairs", 20)):
        taken = {e.cell for e in labels.entries}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            weak = weak_label_cells(dataset, float(cfg.get("weak_threshold", 0.9)))
        pairs = pairs + [pair for cell, pair in weak if cell not in taken]
    if not pairs:
        raise DataError("no labeled errors and no weak pairs; cannot learn a channel")
    return NoisyChannel.learn(pairs)


# -- subcommands -----------------------------------------------------------------


def cmd_train(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    dataset = load_csv(cfg["data"])
    labels = load_ground_truth(cfg["labels"], dataset)
    t_load = time.perf_counter()

    constraints = _load_constraint_list(cfg, dataset.schema)
    t_dc = time.perf_counter()

    detector_config = _detector_config(cfg)
    spec = SplitSpec(
        float(cfg.get("train_fraction", 1.0)),
        float(cfg.get("holdout_fraction", 0.1)),
        seed=int(cfg.get("seed", 0)),
    )
    with warnings.catch_warnings():
        # train_fraction=1.0 intentionally leaves no test cells here
        warnings.simplefilter("ignore", UserWarning)
        train, holdout, _ = split(dataset, labels, spec)

    pipeline = FeaturePipeline.fit(dataset, constraints, detector_config.embed)
    t_feat = time.perf_counter()

    detector = Detector(detector_config)
    detector.fit(dataset, train.entries, holdout.entries, constraints, pipeline=pipeline)
    t_fit = time.perf_counter()

    detector.save(cfg["model"])
    t_save = time.perf_counter()

    print(f"[train] load: {t_load - t0:.2f}s ({dataset.n_rows} rows, {len(labels)} labels)")
    print(f"[train] constraints: {t_dc - t_load:.2f}s ({len(constraints)} parsed)")
    print(f"[train] representations: {t_feat - t_dc:.2f}s (wide_dim={pipeline.wide_dim})")
    print(
        f"[train] model: {t_fit - t_feat:.2f}s "
        f"(train={len(train)}, holdout={len(holdout)}, synthetic={detector.n_synthetic})"
    )
    print(f"[train] checkpoint: {t_save - t_fit:.2f}s -> {cfg['model']}")
    return 0


def cmd_detect(cfg: RunConfig) -> int:
    detector = Detector.load(cfg["model"])
    if cfg.get("threshold") is not None:
        detector.config = replace(detector.config, threshold=float(cfg["threshold"]))
    dataset = load_csv(cfg["data"])

    excluded = set(detector.train_cells) | set(detector.holdout_cells)
    if cfg.get("labels"):
        labels = load_ground_truth(cfg["labels"], dataset)
        excluded |= {e.cell for e in labels.entries}

    predictions = detector.detect(dataset)
    out_path = cfg["out"]
    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write(",".join(PREDICTIONS_HEADER) + "\n")
        kept = 0
        for p in predictions:
            if p.cell in excluded:
                continue
            attr = dataset.schema.attributes[p.cell.attr_index]
            handle.write(
                f"{p.cell.tuple_index},{attr},{1 if p.is_error else 0},{p.probability:.6f}\n"
            )
            kept += 1
    flagged = sum(1 for p in predictions if p.is_error and p.cell not in excluded)
    print(f"[detect] {kept} cells scored, {flagged} flagged as errors -> {out_path}")
    return 0


def cmd_augment(cfg: RunConfig) -> int:
    dataset = load_csv(cfg["data"])
    labels = load_ground_truth(cfg["labels"], dataset)
    channel = _learn_channel_from(dataset, labels, cfg)
    config = AugConfig(
        alpha=float(cfg.get("alpha", 1.0)),
        seed=int(cfg.get("seed", 0)),
        balance=float(cfg.get("balance", 0.5)),
    )
    synthetic = augment(labels, channel, config)
    out_path = cfg["out"]
    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write("tuple_index\tattribute\tclean\tdirty\n")
        for example in synthetic:
            attr = dataset.schema.attributes[example.cell.attr_index]
            handle.write(
                f"{example.cell.tuple_index}\t{attr}\t{example.truth}\t{example.observed}\n"
            )
    print(
        f"[augment] {len(channel.phi)} transformations; "
        f"{labels.n_errors} labeled errors, {len(synthetic)} synthetic -> {out_path}"
    )
    return 0


def cmd_inject_errors(cfg: RunConfig) -> int:
    dataset = load_csv(cfg["data"])
    spec = InjectionSpec(
        error_rate=float(cfg.get("rate", 0.05)),
        mix=_parse_mix(cfg.get("mix", "typo=1.0")),
        seed=int(cfg.get("seed", 0)),
        typo_char=str(cfg.get("typo_char", "x")),
    )
    dirty, truth = inject_errors(dataset, spec)
    save_csv(dirty, cfg["out"])
    save_ground_truth(dirty, truth, cfg["truth_out"])
    n_corrupted = sum(1 for cell, clean in truth.items() if dirty.value_at(cell) != clean)
    print(
        f"[inject-errors] corrupted {n_corrupted} of {dataset.n_cells} cells "
        f"-> {cfg['out']} (truth: {cfg['truth_out']})"
    )
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    dataset = load_csv(cfg["data"])
    truth = load_ground_truth(cfg["truth"], dataset)
    truth_by_cell = {e.cell: e for e in truth.entries}

    path = Path(cfg["predictions"])
    with open(path, encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if not lines or tuple(lines[0].split(",")) != PREDICTIONS_HEADER:
        raise DataError(f"{path}: expected header {','.join(PREDICTIONS_HEADER)}")
    predictions: dict[CellRef, bool] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 4:
            raise DataError(f"{path}: row {lineno} has {len(fields)} fields, expected 4")
        cell = CellRef(int(fields[0]), dataset.schema.index_of(fields[1]))
        if cell not in truth_by_cell:
            raise DataError(f"{path}: row {lineno} cell {cell} is missing from the truth file")
        predictions[cell] = bool(int(fields[2]))

    true_errors = {cell for cell, e in truth_by_cell.items() if e.is_error and cell in predictions}
    report = evaluate(predictions, true_errors, predictions.keys())
    line = (
        f"P={report.precision:.4f} R={report.recall:.4f} F1={report.f1:.4f} "
        f"(tp={report.tp} fp={report.fp} fn={report.fn} n={len(predictions)})"
    )
    print(line)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(line + "\n", encoding="utf-8")
    return 0


def cmd_bench(cfg: RunConfig) -> int:
    suite = cfg["suite"]
    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; available: {', '.join(SUITES)}")
    detector_config = _detector_config(cfg)
    suite_config = SuiteConfig(
        n_rows=int(cfg.get("rows", 1000)),
        bench_seed=int(cfg.get("bench_seed", 7)),
        seeds=_parse_seeds(str(cfg.get("seeds", "5"))),
        error_rate=float(cfg.get("rate", 0.05)),
        mix=tuple(_parse_mix(cfg.get("mix", "typo=1.0")).items()),
        label_fraction=float(cfg.get("label_fraction", 0.10)),
        holdout_fraction=float(cfg.get("holdout_fraction", 0.10)),
        detector=detector_config,
        use_constraints=not cfg.get("no_constraints", False),
        include_baselines=bool(cfg.get("include_baselines", False)),
        report_dir=cfg.get("report_dir"),
        dataset_name=str(cfg.get("dataset_name", "bench")),
    )
    if cfg.get("ratios"):
        ratios = tuple(float(r) for r in str(cfg["ratios"]).split(","))
        suite_config = replace(suite_config, balance_ratios=ratios)
    result = run_experiment(suite, suite_config)
    print(f"[bench] suite={suite} elapsed={result.elapsed_seconds:.1f}s")
    for arm in sorted(result.aggregates):
        agg = result.aggregates[arm]
        med = agg.median
        print(
            f"[bench] {arm}: median P={med.precision:.3f} R={med.recall:.3f} "
            f"F1={med.f1:.3f} | mean F1={agg.mean_f1:.3f}±{agg.stderr_f1:.3f} (n={agg.n_runs})"
        )
    for path in result.files:
        print(f"[bench] wrote {path}")
    return 0


def cmd_inspect_policy(cfg: RunConfig) -> int:
    if cfg.get("pairs"):
        pairs = []
        with open(cfg["pairs"], encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise DataError(
                        f"{cfg['pairs']}: line {lineno} has {len(fields)} fields, expected "
                        "clean<TAB>dirty"
                    )
                pairs.append(LabeledPair(fields[0], fields[1]))
        if not pairs:
            raise DataError(f"{cfg['pairs']}: no pairs")
        channel = NoisyChannel.learn(pairs)
    elif cfg.get("data") and cfg.get("labels"):
        dataset = load_csv(cfg["data"])
        labels = load_ground_truth(cfg["labels"], dataset)
        channel = _learn_channel_from(dataset, labels, cfg)
    else:
        raise UsageError("inspect-policy needs --pairs FILE or both --data and --labels")

    value = cfg["value"]
    top_k = int(cfg.get("top", 10))
    conditional = channel.conditional(value)
    print(f"value: {value!r}")
    print(f"transformations learned: {len(channel.phi)}; applicable here: {len(conditional.transformations)}")
    if conditional.is_empty:
        print("(no applicable transformations)")
        return 0
    for rank, (transformation, prob) in enumerate(conditional.top(top_k), start=1):
        print(f"{rank:3d}. {prob:8.5f}  {transformation}")
    return 0


def cmd_inspect_features(cfg: RunConfig) -> int:
    detector = Detector.load(cfg["model"])
    pipeline = detector.pipeline
    dataset = pipeline.dataset
    print(f"dataset: {dataset.id} ({dataset.n_rows} rows x {dataset.n_attributes} attributes)")
    print(f"layout hash: {pipeline.layout_hash()}")
    print(f"wide features: {pipeline.wide_dim} dims")
    for name, block in pipeline.wide_blocks():
        print(f"  {name}: [{block.start}:{block.stop})")
    print(f"deep features: 4 x {pipeline.dims} dims")
    for granularity, model in pipeline.embeddings.items():
        print(f"  {granularity}: vocabulary {len(model.vocabulary)}")
    print(f"constraints: {len(pipeline.constraints)}")
    print(f"strategy: {detector.config.strategy}; synthetic examples at fit: {detector.n_synthetic}")
    if detector.channel is not None:
        print(f"channel transformations: {len(detector.channel.phi)}")

    if cfg.get("cell"):
        raw = str(cfg["cell"])
        try:
            tuple_part, _, attr_name = raw.partition(",")
            cell = CellRef(int(tuple_part), dataset.schema.index_of(attr_name.strip()))
        except (ValueError, DataError) as exc:
            raise UsageError(f"bad --cell {raw!r}: {exc}") from None
        vector = pipeline.featurize(cell)
        print(f"cell {cell}: value {dataset.value_at(cell)!r}")
        for name, block in pipeline.wide_blocks():
            chunk = ", ".join(f"{x:.4f}" for x in vector.wide[block])
            print(f"  {name}: [{chunk}]")
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spotcheck",
        description="Train and run a cell-level error detector for relational data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, **kwargs):
        cmd = sub.add_parser(name, help=help_text, **kwargs)
        cmd.add_argument("--config", help="JSON config file; explicit flags override it")
        return cmd

    train = add("train", "learn a detector from a dataset and labeled cells")
    train.add_argument("--data", help="dataset CSV")
    train.add_argument("--labels", help="labeled-cell CSV (tuple_index,attribute,clean_value)")
    train.add_argument("--constraints", help="denial constraint file")
    train.add_argument("--model", help="output checkpoint path (.npz)")
    train.add_argument("--strategy", choices=("augment", "resample", "none"))
    train.add_argument("--no-augment", action="store_true", help="train on raw labels only")
    train.add_argument("--alpha", type=float, help="corruption coin probability")
    train.add_argument("--balance", type=float, help="target synthetic error fraction")
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", type=int, dest="batch_size")
    train.add_argument("--embed-epochs", type=int, dest="embed_epochs")
    train.add_argument("--embed-dims", type=int, dest="embed_dims")
    train.add_argument("--hidden", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--train-fraction", type=float, dest="train_fraction")
    train.add_argument("--holdout-fraction", type=float, dest="holdout_fraction")
    train.add_argument("--threshold", type=float)
    train.add_argument("--seed", type=int)
    train.add_argument("--ablate", action="append", help="feature group to zero out (repeatable)")

    detect = add("detect", "score every cell of a dataset with a trained checkpoint")
    detect.add_argument("--model")
    detect.add_argument("--data")
    detect.add_argument("--out", help="predictions CSV")
    detect.add_argument("--labels", help="labeled cells to exclude from the output")
    detect.add_argument("--threshold", type=float)

    aug = add("augment", "emit channel-synthesized error examples as TSV")
    aug.add_argument("--data")
    aug.add_argument("--labels")
    aug.add_argument("--out")
    aug.add_argument("--alpha", type=float)
    aug.add_argument("--balance", type=float)
    aug.add_argument("--seed", type=int)

    inject = add("inject-errors", "corrupt a clean dataset and write the ground truth")
    inject.add_argument("--data")
    inject.add_argument("--out", help="dirty dataset CSV")
    inject.add_argument("--truth-out", dest="truth_out", help="ground truth CSV")
    inject.add_argument("--rate", type=float, help="fraction of cells to corrupt")
    inject.add_argument("--mix", help="error kind weights, e.g. typo=0.7,swap-chars=0.3")
    inject.add_argument("--seed", type=int)
    inject.add_argument("--typo-char", dest="typo_char")

    ev = add("evaluate", "score a predictions file against ground truth")
    ev.add_argument("--predictions")
    ev.add_argument("--truth")
    ev.add_argument("--data")
    ev.add_argument("--out", help="also write the summary line here")

    bench = add("bench", "run a named experiment suite on the synthetic benchmark")
    bench.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    bench.add_argument("--rows", type=int)
    bench.add_argument("--seeds", help="a count (5 -> seeds 0..4) or a comma list")
    bench.add_argument("--bench-seed", type=int, dest="bench_seed")
    bench.add_argument("--rate", type=float)
    bench.add_argument("--mix")
    bench.add_argument("--label-fraction", type=float, dest="label_fraction")
    bench.add_argument("--holdout-fraction", type=float, dest="holdout_fraction")
    bench.add_argument("--epochs", type=int)
    bench.add_argument("--batch-size", type=int, dest="batch_size")
    bench.add_argument("--embed-epochs", type=int, dest="embed_epochs")
    bench.add_argument("--ratios", help="balance-sweep ratios, e.g. 0.05,0.5,0.95")
    bench.add_argument("--include-baselines", action="store_true", dest="include_baselines")
    bench.add_argument("--no-constraints", action="store_true", dest="no_constraints")
    bench.add_argument("--report-dir", dest="report_dir")
    bench.add_argument("--seed", type=int)

    pol = add("inspect-policy", "print the top conditional policy entries for a value")
    pol.add_argument("--value")
    pol.add_argument("--pairs", help="TSV of clean<TAB>dirty pairs")
    pol.add_argument("--data")
    pol.add_argument("--labels")
    pol.add_argument("--top", type=int)

    feats = add("inspect-features", "summarize a checkpoint's feature layout")
    feats.add_argument("--model")
    feats.add_argument("--cell", help="tuple_index,attribute to featurize and print")

    return parser


_HANDLERS = {
    "train": cmd_train,
    "detect": cmd_detect,
    "augment": cmd_augment,
    "inject-errors": cmd_inject_errors,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
    "inspect-policy": cmd_inspect_policy,
    "inspect-features": cmd_inspect_features,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge(args, defaults={})
        return _HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
