"""End-to-end error detector: pipeline + channel + classifier + calibration.

Fitting runs the full sequence: fit representation models on the (dirty)
dataset, learn the noisy channel from error-labeled training cells
(supplemented by weak-supervision pairs when labeled errors are scarce),
synthesize error examples to offset class imbalance, train the classifier,
then Platt-calibrate on the holdout cells.

Class-imbalance strategies: "augment" (channel synthesis), "resample"
(duplicate minority examples), "none" (train on the labels as given).

Checkpoints are .npz files carrying the fitted pipeline, weights, calibrator,
and a layout hash; loading rejects checkpoints whose recorded hash no longer
matches the pipeline layout.
"""

from __future__ import annotations

import pickle
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import AugConfig, LabeledPair, NoisyChannel, augment, weak_label_cells
from .constraints import DenialConstraint
from .data import CellRef, DataError, Dataset, LabeledCell, TrainingSet
from .embeddings import EmbeddingConfig
from .features import FeaturePipeline
from .neural import (
    CLASS_ERROR,
    Calibrator,
    NeuralModel,
    TrainConfig,
    calibrate,
    error_logit_margin,
    train_model,
)

CHECKPOINT_VERSION = "1"
STRATEGIES = ("augment", "resample", "none")

# Platt scaling fits two parameters; on a holdout with only a couple of
# examples of either class the NLL optimum degenerates (a -> 0 with a large
# intercept shift), which silently wrecks the decision threshold.  Below
# this many examples per class the detector keeps the identity calibrator.
MIN_CALIBRATION_CLASS_COUNT = 5


@dataclass(frozen=True)
class DetectorConfig:
    embed: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    aug: AugConfig = field(default_factory=AugConfig)
    strategy: str = "augment"
    threshold: float = 0.5
    weak_threshold: float = 0.9
    min_channel_pairs: int = 20
    ablate: tuple[str, ...] = ()

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DataError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not 0.0 <= self.threshold <= 1.0:
            raise DataError(f"threshold must be in [0, 1], got {self.threshold}")

    def with_seed(self, seed: int) -> "DetectorConfig":
        """Same configuration with every stochastic component reseeded."""
        return replace(
            self,
            embed=replace(self.embed, seed=seed),
            train=replace(self.train, seed=seed),
            aug=replace(self.aug, seed=seed),
        )


@dataclass(frozen=True)
class CellPrediction:
    cell: CellRef
    is_error: bool
    probability: float  # calibrated error probability


class Detector:
    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()
        self.pipeline: FeaturePipeline | None = None
        self.model: NeuralModel | None = None
        self.calibrator: Calibrator | None = None
        self.channel: NoisyChannel | None = None
        self.wide_mean: np.ndarray | None = None
        self.wide_scale: np.ndarray | None = None
        self.train_cells: tuple[CellRef, ...] = ()
        self.holdout_cells: tuple[CellRef, ...] = ()
        self.n_synthetic = 0

    # -- feature preparation -------------------------------------------------

    def _mask(self, wide: np.ndarray, deep: np.ndarray):
        """Zero out ablated feature groups in place."""
        if not self.config.ablate:
            return
        from .embeddings import GRANULARITIES

        blocks = dict(self.pipeline.wide_blocks())
        for name in self.config.ablate:
            if name in GRANULARITIES:
                deep[GRANULARITIES.index(name)] = 0.0
            elif name in blocks:
                wide[:, blocks[name]] = 0.0
            else:
                known = tuple(GRANULARITIES) + tuple(blocks)
                raise DataError(f"unknown ablation group {name!r}; choose from {known}")

    def _standardize(self, wide: np.ndarray) -> np.ndarray:
        return (wide - self.wide_mean) / self.wide_scale

    def _features_for(self, examples: list[LabeledCell]):
        dataset = self.pipeline.dataset
        overrides = {
            k: e.observed
            for k, e in enumerate(examples)
            if e.observed != dataset.value_at(e.cell)
        }
        cells = [e.cell for e in examples]
        return self.pipeline.featurize_many(cells, overrides)

    # -- channel -------------------------------------------------------------

    def _learn_channel(self, dataset: Dataset, train: TrainingSet, holdout) -> NoisyChannel | None:
        pairs = [LabeledPair(e.truth, e.observed) for e in train.errors()]
        if len(pairs) < self.config.min_channel_pairs:
            labeled = {e.cell for e in train.entries} | {e.cell for e in holdout}
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                weak = weak_label_cells(dataset, self.config.weak_threshold)
            pairs = pairs + [p for cell, p in weak if cell not in labeled]
        if not pairs:
            warnings.warn("no channel examples available; skipping augmentation")
            return None
        return NoisyChannel.learn(pairs)

    @staticmethod
    def _resample(train: TrainingSet) -> list[LabeledCell]:
        """Duplicate minority-class examples until the classes balance."""
        errors, correct = train.errors(), train.correct()
        minority, majority = (errors, correct) if len(errors) <= len(correct) else (correct, errors)
        if not minority:
            return []
        need = len(majority) - len(minority)
        return [minority[k % len(minority)] for k in range(need)]

    # -- fitting ---------------------------------------------------------------

    def fit(
        self,
        dataset: Dataset,
        train_cells: list[LabeledCell],
        holdout_cells: list[LabeledCell] | None = None,
        constraints: list[DenialConstraint] | None = None,
        pipeline: FeaturePipeline | None = None,
    ) -> "Detector":
        holdout_cells = list(holdout_cells or [])
        train = TrainingSet(list(train_cells))
        if pipeline is None:
            pipeline = FeaturePipeline.fit(dataset, constraints or [], self.config.embed)
        self.pipeline = pipeline
        self.train_cells = tuple(e.cell for e in train.entries)
        self.holdout_cells = tuple(e.cell for e in holdout_cells)

        synthetic: list[LabeledCell] = []
        if self.config.strategy == "augment":
            self.channel = self._learn_channel(dataset, train, holdout_cells)
            if self.channel is not None:
                synthetic = augment(train, self.channel, self.config.aug)
        elif self.config.strategy == "resample":
            synthetic = self._resample(train)
        self.n_synthetic = len(synthetic)

        examples = list(train.entries) + synthetic
        wide, deep = self._features_for(examples)
        labels = np.array([1 if e.is_error else 0 for e in examples], dtype=np.int64)
        self._mask(wide, deep)
        self.wide_mean = wide.mean(axis=0)
        scale = wide.std(axis=0)
        self.wide_scale = np.where(scale < 1e-12, 1.0, scale)
        wide = self._standardize(wide)

        self.model = NeuralModel(
            self.pipeline.wide_dim, deep.shape[0], self.pipeline.dims, self.config.train.hidden
        )
        train_model(self.model, wide, deep, labels, self.config.train)

        self.calibrator = Calibrator()
        if holdout_cells:
            h_labels = np.array([1 if e.is_error else 0 for e in holdout_cells])
            n_error = int(h_labels.sum())
            n_correct = len(h_labels) - n_error
            if min(n_error, n_correct) < MIN_CALIBRATION_CLASS_COUNT:
                warnings.warn(
                    f"holdout has {n_error} error / {n_correct} correct cells; "
                    f"need at least {MIN_CALIBRATION_CLASS_COUNT} of each to fit "
                    "calibration, keeping identity",
                    stacklevel=2,
                )
            else:
                h_wide, h_deep = self._features_for(holdout_cells)
                self._mask(h_wide, h_deep)
                logits, _ = self.model.forward(self._standardize(h_wide), h_deep)
                self.calibrator = calibrate(
                    error_logit_margin(logits), h_labels, self.config.train
                )
        return self

    # -- prediction ------------------------------------------------------------

    def _require_fitted(self):
        if self.model is None or self.pipeline is None:
            raise DataError("detector is not fitted")

    def predict_proba(self, cells: list[CellRef]) -> np.ndarray:
        """Calibrated error probability per cell."""
        self._require_fitted()
        if not cells:
            return np.zeros(0)
        wide, deep = self.pipeline.featurize_many(cells)
        self._mask(wide, deep)
        logits, _ = self.model.forward(self._standardize(wide), deep)
        return self.calibrator(error_logit_margin(logits))

    def predict(self, cells: list[CellRef] | None = None) -> list[CellPrediction]:
        """Error labels for the given cells (default: every cell of the dataset)."""
        self._require_fitted()
        if cells is None:
            cells = list(self.pipeline.dataset.cells())
        probs = self.predict_proba(cells)
        threshold = self.config.threshold
        return [
            CellPrediction(cell, bool(q >= threshold), float(q))
            for cell, q in zip(cells, probs)
        ]

    def detect(self, dataset: Dataset | None = None, cells: list[CellRef] | None = None):
        """Predict on a dataset, rebinding dataset-dependent state if needed."""
        self._require_fitted()
        if dataset is not None and dataset is not self.pipeline.dataset:
            self.pipeline.rebind(dataset)
        return self.predict(cells)

    # -- persistence -------------------------------------------------------------

    def save(self, path):
        self._require_fitted()
        np.savez_compressed(
            path,
            version=np.array(CHECKPOINT_VERSION),
            layout_hash=np.array(self.pipeline.layout_hash()),
            theta=self.model.theta,
            model_meta=np.array(
                [self.model.wide_dim, self.model.n_pathways, self.model.dims, self.model.hidden],
                dtype=np.int64,
            ),
            calibrator=np.array([self.calibrator.a, self.calibrator.b]),
            wide_mean=self.wide_mean,
            wide_scale=self.wide_scale,
            train_cells=np.array(self.train_cells, dtype=np.int64).reshape(-1, 2),
            holdout_cells=np.array(self.holdout_cells, dtype=np.int64).reshape(-1, 2),
            n_synthetic=np.array(self.n_synthetic, dtype=np.int64),
            pipeline=np.frombuffer(pickle.dumps(self.pipeline), dtype=np.uint8),
            config=np.frombuffer(pickle.dumps(self.config), dtype=np.uint8),
            channel=np.frombuffer(pickle.dumps(self.channel), dtype=np.uint8),
        )

    @classmethod
    def load(cls, path) -> "Detector":
        with np.load(path) as data:
            version = str(data["version"])
            if version != CHECKPOINT_VERSION:
                raise DataError(f"unsupported checkpoint version {version!r}")
            pipeline = pickle.loads(data["pipeline"].tobytes())
            stored_hash = str(data["layout_hash"])
            actual_hash = pipeline.layout_hash()
            if stored_hash != actual_hash:
                raise DataError(
                    f"checkpoint layout hash {stored_hash} does not match "
                    f"pipeline layout hash {actual_hash}"
                )
            detector = cls(pickle.loads(data["config"].tobytes()))
            detector.pipeline = pipeline
            detector.channel = pickle.loads(data["channel"].tobytes())
            wide_dim, n_pathways, dims, hidden = (int(x) for x in data["model_meta"])
            detector.model = NeuralModel(wide_dim, n_pathways, dims, hidden)
            detector.model.theta[...] = data["theta"]
            a, b = data["calibrator"]
            detector.calibrator = Calibrator(float(a), float(b))
            detector.wide_mean = data["wide_mean"]
            detector.wide_scale = data["wide_scale"]
            detector.train_cells = tuple(CellRef(int(t), int(i)) for t, i in data["train_cells"])
            detector.holdout_cells = tuple(
                CellRef(int(t), int(i)) for t, i in data["holdout_cells"]
            )
            detector.n_synthetic = int(data["n_synthetic"])
        return detector
