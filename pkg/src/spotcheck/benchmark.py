"""Synthetic benchmark data: entity-structured tables and error injection.

The generated table mimics a provider quality report: 300 provider entities
(id, name, street, phone, plus a city whose state/zip/county are functionally
determined) crossed with 30 measure codes that determine measure name and
category, two high-cardinality serial columns, and two numeric-looking
columns. Functional column pairs make denial constraints and co-occurrence
statistics meaningful; serial columns give format models nothing to key on,
so character-level signals carry detection there.

None of the generator alphabets contain the letter 'x', which keeps the
default 'x'-insertion typo channel cleanly identifiable.

Error injection corrupts an exact ceil(rate * cells) count of distinct cells
with a configurable mix of typo insertion, adjacent-character swaps, value
swaps within an attribute, and attribute shifts within a tuple. Every
corrupted cell differs from its clean value; kinds that cannot produce a
differing value for some cell fall back to typo insertion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .data import CellRef, DataError, Dataset, Schema

ATTRIBUTES = (
    "provider_id",
    "name",
    "street",
    "phone",
    "city",
    "state",
    "zip",
    "county",
    "measure_code",
    "measure_name",
    "category",
    "score",
    "sample_count",
    "serial_a",
    "serial_b",
)

BENCHMARK_CONSTRAINTS = (
    "t1&t2: t1.zip=t2.zip & t1.city!=t2.city",
    "t1&t2: t1.city=t2.city & t1.state!=t2.state",
    "t1&t2: t1.measure_code=t2.measure_code & t1.measure_name!=t2.measure_name",
)

_CITIES = (
    "Springfield", "Riverton", "Lakeland", "Fairview", "Greenville", "Bristol",
    "Clinton", "Georgetown", "Salem", "Madison", "Franklin", "Arlington",
    "Ashland", "Burlington", "Clayton", "Dayton", "Dover", "Hudson",
    "Kingston", "Lebanon", "Manchester", "Milton", "Newport", "Norwood",
    "Princeton", "Quincy", "Trenton", "Vernon", "Warren", "Winchester",
    "Aurora", "Bedford", "Camden", "Denton", "Easton", "Florence",
    "Geneva", "Hamilton", "Jasper", "Keene",
)

_STATES = ("IL", "OH", "TN", "GA", "CA", "WA", "CO", "OR", "NV", "UT", "MN", "VT")

_FIRST_NAMES = (
    "James", "Mary", "Robert", "Patricia", "John", "Jennifer", "Michael",
    "Linda", "David", "Barbara", "William", "Susan", "Richard", "Jessica",
    "Joseph", "Sarah", "Thomas", "Karen", "Charles", "Nancy",
)

_LAST_NAMES = (
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller",
    "Davis", "Rodriguez", "Martinez", "Lopez", "Gonzalez", "Wilson",
    "Anderson", "Taylor", "Moore", "Jackson", "Martin", "Lee", "Thompson",
)

_STREETS = (
    "Main", "Oak", "Cedar", "Elm", "Maple", "Pine", "Walnut", "Lake",
    "Hill", "River", "Spring", "Church", "Park", "High", "Mill",
)

_STREET_SUFFIXES = ("St", "Ave", "Rd", "Ln")

_MEASURE_TOPICS = (
    "Heart Attack Care", "Surgical Care", "Pneumonia Care", "Emergency Care",
    "Stroke Care", "Infection Control", "Maternity Care", "Imaging Quality",
    "Readmission Rate", "Patient Safety",
)

_CATEGORIES = ("Process", "Outcome", "Structural", "Safety", "Timeliness", "Efficiency")

# Serial alphabet: uppercase letters and digits, no 'X'.
_SERIAL_ALPHABET = "ABCDEFGHJKLMNPQRSTUVWYZ0123456789"


def generate_benchmark(
    n_rows: int = 1000,
    seed: int = 7,
    n_entities: int = 300,
    n_cities: int = 40,
    n_codes: int = 30,
) -> tuple[Dataset, list[str]]:
    """A clean entity-structured dataset plus its denial constraint texts."""
    if n_rows < 1:
        raise DataError("n_rows must be positive")
    n_cities = min(n_cities, len(_CITIES))
    rng = np.random.RandomState(seed & 0xFFFFFFFF)

    zips = rng.choice(np.arange(10000, 100000), size=n_cities, replace=False)
    city_info = {
        city: (
            _STATES[int(rng.randint(len(_STATES)))],
            f"{int(zips[k]):05d}",
            f"{city} County",
        )
        for k, city in enumerate(_CITIES[:n_cities])
    }

    codes = [f"MC{k:02d}" for k in range(n_codes)]
    code_info = {
        code: (
            f"{_MEASURE_TOPICS[k % len(_MEASURE_TOPICS)]} {k // len(_MEASURE_TOPICS) + 1}",
            _CATEGORIES[k % len(_CATEGORIES)],
        )
        for k, code in enumerate(codes)
    }

    def serial() -> str:
        chars = rng.randint(len(_SERIAL_ALPHABET), size=8)
        return "".join(_SERIAL_ALPHABET[c] for c in chars)

    entities = []
    for k in range(n_entities):
        city = _CITIES[int(rng.randint(n_cities))]
        entities.append(
            {
                "provider_id": f"P{1000 + k}",
                "name": f"{_FIRST_NAMES[int(rng.randint(len(_FIRST_NAMES)))]} "
                f"{_LAST_NAMES[int(rng.randint(len(_LAST_NAMES)))]}",
                "street": f"{int(rng.randint(100, 1000))} "
                f"{_STREETS[int(rng.randint(len(_STREETS)))]} "
                f"{_STREET_SUFFIXES[int(rng.randint(len(_STREET_SUFFIXES)))]}",
                "phone": f"{int(rng.randint(200, 1000))}-"
                f"{int(rng.randint(200, 1000))}-{int(rng.randint(1000, 10000))}",
                "city": city,
            }
        )

    rows = []
    for _ in range(n_rows):
        entity = entities[int(rng.randint(n_entities))]
        code = codes[int(rng.randint(n_codes))]
        state, zip_code, county = city_info[entity["city"]]
        measure_name, category = code_info[code]
        rows.append(
            (
                entity["provider_id"],
                entity["name"],
                entity["street"],
                entity["phone"],
                entity["city"],
                state,
                zip_code,
                county,
                code,
                measure_name,
                category,
                f"{int(rng.randint(50, 100))}.{int(rng.randint(10))}",
                str(int(rng.randint(50, 500))),
                serial(),
                serial(),
            )
        )
    dataset = Dataset(Schema(ATTRIBUTES), rows, id=f"bench-{seed}")
    return dataset, list(BENCHMARK_CONSTRAINTS)


ERROR_KINDS = ("typo", "swap-chars", "value-swap", "attribute-shift")


@dataclass(frozen=True)
class InjectionSpec:
    error_rate: float
    mix: dict[str, float] = field(default_factory=lambda: {"typo": 1.0})
    seed: int = 0
    typo_char: str = "x"

    def __post_init__(self):
        if not 0.0 < self.error_rate < 1.0:
            raise DataError(f"error_rate must be in (0, 1), got {self.error_rate}")
        unknown = set(self.mix) - set(ERROR_KINDS)
        if unknown:
            raise DataError(f"unknown error kinds {sorted(unknown)}; choose from {ERROR_KINDS}")
        total = sum(self.mix.values())
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"mix proportions sum to {total}, expected 1")
        if any(p < 0 for p in self.mix.values()):
            raise DataError("mix proportions must be non-negative")


def _allocate(n: int, mix: dict[str, float]) -> dict[str, int]:
    """Largest-remainder allocation of n among kinds; deterministic ties."""
    kinds = sorted(mix)
    quotas = {k: n * mix[k] for k in kinds}
    counts = {k: int(quotas[k]) for k in kinds}
    remainder = n - sum(counts.values())
    by_frac = sorted(kinds, key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in range(remainder):
        counts[by_frac[k % len(by_frac)]] += 1
    return counts


def _typo(value: str, rng: np.random.RandomState, char: str) -> str:
    pos = int(rng.randint(len(value) + 1))
    return value[:pos] + char + value[pos:]


def _swap_chars(value: str, rng: np.random.RandomState) -> str | None:
    positions = [p for p in range(len(value) - 1) if value[p] != value[p + 1]]
    if not positions:
        return None
    p = positions[int(rng.randint(len(positions)))]
    return value[:p] + value[p + 1] + value[p] + value[p + 2 :]


def _value_swap(value: str, column_values: list[str], rng: np.random.RandomState) -> str | None:
    others = [v for v in column_values if v != value]
    if not others:
        return None
    return others[int(rng.randint(len(others)))]


def _attribute_shift(row: tuple[str, ...], attr: int, rng: np.random.RandomState) -> str | None:
    candidates = [j for j in range(len(row)) if j != attr and row[j] != row[attr]]
    if not candidates:
        return None
    return row[candidates[int(rng.randint(len(candidates)))]]


def inject_errors(dataset: Dataset, spec: InjectionSpec) -> tuple[Dataset, dict[CellRef, str]]:
    """Corrupt exactly ceil(rate * cells) distinct cells.

    Returns the dirty dataset and a ground-truth map listing the clean value
    of every cell; corrupted cells are the ones whose clean value differs
    from the dirty dataset's value.
    """
    n_cells = dataset.n_rows * dataset.n_attributes
    n_corrupt = ceil(spec.error_rate * n_cells)
    rng = np.random.RandomState(spec.seed & 0xFFFFFFFF)
    chosen = rng.choice(n_cells, size=n_corrupt, replace=False)
    counts = _allocate(n_corrupt, spec.mix)

    distinct_by_attr = [sorted(set(dataset.column(j))) for j in range(dataset.n_attributes)]
    rows = [list(row) for row in dataset.rows]
    truth = {cell: dataset.value_at(cell) for cell in dataset.cells()}

    cursor = 0
    for kind in sorted(counts):
        for _ in range(counts[kind]):
            flat = int(chosen[cursor])
            cursor += 1
            t, i = divmod(flat, dataset.n_attributes)
            clean = dataset.rows[t][i]
            dirty: str | None = None
            if kind == "swap-chars":
                dirty = _swap_chars(clean, rng)
            elif kind == "value-swap":
                dirty = _value_swap(clean, distinct_by_attr[i], rng)
            elif kind == "attribute-shift":
                dirty = _attribute_shift(dataset.rows[t], i, rng)
            if dirty is None:
                dirty = _typo(clean, rng, spec.typo_char)
            rows[t][i] = dirty

    dirty_dataset = Dataset(
        dataset.schema,
        [tuple(r) for r in rows],
        id=f"{dataset.id}-dirty-{spec.seed}",
    )
    return dirty_dataset, truth
