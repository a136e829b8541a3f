"""How the error channel is learned from a handful of clean/dirty pairs.

The channel has two parts: a set of string rewrites learned by recursively
diffing each (clean, dirty) pair, and a policy that says how likely each
rewrite is. Once learned, the channel can corrupt clean values the same way
the data's real errors do — which is what turns a few labeled errors into as
many synthetic training examples as we want.

Run:  python demos/01_noisy_channel.py
"""

import numpy as np

from spotcheck import (
    AugConfig,
    CellRef,
    Dataset,
    LabeledCell,
    LabeledPair,
    NoisyChannel,
    Schema,
    TrainingSet,
    augment,
    learn_transformations,
    synthetic_error_target,
    weak_label_cells,
)

rng = np.random.RandomState(0)

# -- 1. Rewrites from a single pair ---------------------------------------------

print("== learning rewrites from one pair ==")
for clean, dirty in [("60612", "6061x2"), ("Madison", "Madixson")]:
    trace = learn_transformations(clean, dirty)
    print(f"  {clean!r} -> {dirty!r}  gives  {trace}")
print("""  Each trace starts with the full rewrite, then strips the longest
  common substring and recurses: progressively smaller rewrites down to the
  bare insertion. Repeats are kept — the policy counts them.""")

# -- 2. A channel from a small corpus ---------------------------------------------

print("== channel learned from six pairs ==")
pairs = [
    LabeledPair("60612", "6061x2"),
    LabeledPair("60637", "606x37"),
    LabeledPair("53703", "5370x3"),
    LabeledPair("50010", "500x10"),
    LabeledPair("Madison", "Madixson"),
    LabeledPair("Chicago", "Chicagox"),
]
channel = NoisyChannel.learn(pairs)
print("  most likely rewrites overall:")
for transformation, prob in channel.policy.top(4):
    print(f"    {transformation}   p={prob:.3f}")

value = "50309"
conditional = channel.conditional(value)
print(f"  conditioned on {value!r} (only rewrites that can apply):")
for transformation, prob in conditional.top(3):
    print(f"    {transformation}   p={prob:.3f}")

print("  corrupting fresh values through the channel:")
for v in ("50309", "Ames", "Boone"):
    print(f"    {v!r} -> {channel.corrupt(v, rng)!r}")

# -- 3. Amplifying scarce labels ---------------------------------------------------

print("== augmentation: 12 correct cells + 2 errors -> balanced training set ==")
entries = [
    LabeledCell(CellRef(i, 0), observed=f"city{i}", truth=f"city{i}") for i in range(12)
]
entries += [
    LabeledCell(CellRef(12, 0), observed="60x612", truth="60612"),
    LabeledCell(CellRef(13, 0), observed="5370x3", truth="53703"),
]
train = TrainingSet(entries)
target = synthetic_error_target(n_correct=12, n_errors=2, balance=0.5)
print(f"  synthetic errors needed for a 50:50 balance: {target}")
synthetic = augment(train, channel, AugConfig(seed=0))
print(f"  augment() produced {len(synthetic)} synthetic errors, e.g.:")
for example in synthetic[:4]:
    print(f"    clean {example.truth!r} -> corrupted {example.observed!r}")

# -- 4. Labels for free: the weak detector -----------------------------------------

print("== weak labeling: pairs proposed without any human labels ==")
schema = Schema(("city", "zip", "county"))
triples = [("Ames", "50010", "Story"), ("Boone", "50036", "Boone"), ("Clive", "50325", "Polk")]
rows = [triples[i % 3] for i in range(30)]
rows[4] = ("Ames", "5001x0", "Story")  # one corrupted cell
dataset = Dataset(schema, [tuple(r) for r in rows])
for cell, pair in weak_label_cells(dataset, threshold=0.9):
    print(f"  cell {cell}: observed {pair.dirty!r}, proposed clean value {pair.clean!r}")
print("""  A naive-Bayes model per attribute predicts each cell from the rest of
  its row; a confident disagreement becomes a weak (clean, dirty) pair. These
  feed the channel when human-labeled errors are too few.""")
