"""Denial constraints: parsing and per-tuple violation counting.

A denial constraint forbids any single tuple (arity 1) or ordered tuple pair
(arity 2) for which *all* predicates hold simultaneously. The concrete syntax
is one constraint per line::

    t1&t2: t1.zip=t2.zip & t1.city!=t2.city
    t1: t1.age<'0'

Ordering operators compare lexicographically, or numerically when both
operands parse as decimal numbers. Counting is per ordered pair: when (i, j)
violates a constraint, both tuple i and tuple j are charged one violation, so
a symmetric pair contributes 2 to each side across its two orderings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .data import Dataset, Schema

OPERATORS = ("=", "!=", "<", ">", "<=", ">=")
_SIMILARITY_OPS = ("~", "≈")
_NUMERIC_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")


class DCParseError(ValueError):
    """Constraint text that does not match the grammar or the schema."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


@dataclass(frozen=True)
class AttrRef:
    """An attribute reference qualified by a tuple variable, e.g. t1.zip."""

    var: str  # "t1" or "t2"
    attr_index: int


@dataclass(frozen=True)
class Predicate:
    lhs: AttrRef
    op: str
    rhs: AttrRef | str  # reference or string constant

    def holds(self, row1: tuple[str, ...], row2: tuple[str, ...] | None) -> bool:
        left = _resolve(self.lhs, row1, row2)
        right = _resolve(self.rhs, row1, row2) if isinstance(self.rhs, AttrRef) else self.rhs
        return _compare(left, right, self.op)


def _resolve(ref: AttrRef, row1, row2) -> str:
    return row1[ref.attr_index] if ref.var == "t1" else row2[ref.attr_index]


def _compare(a: str, b: str, op: str) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    # Ordering: numeric only when both sides look like decimals.
    if _NUMERIC_RE.match(a) and _NUMERIC_RE.match(b):
        x, y = float(a), float(b)
    else:
        x, y = a, b
    if op == "<":
        return x < y
    if op == ">":
        return x > y
    if op == "<=":
        return x <= y
    if op == ">=":
        return x >= y
    raise ValueError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class DenialConstraint:
    id: str
    arity: int  # 1 or 2
    predicates: tuple[Predicate, ...]

    def violated_by_pair(self, row1, row2) -> bool:
        return all(p.holds(row1, row2) for p in self.predicates)

    def violated_by_tuple(self, row) -> bool:
        return all(p.holds(row, None) for p in self.predicates)


_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<op><=|>=|!=|<>|=|<|>|~|≈)"
    r"|(?P<amp>&)"
    r"|(?P<colon>:)"
    r"|(?P<dot>\.)"
    r"|(?P<lit>'[^']*')"
    r"|(?P<ident>[^\s<>=!&:.'~≈]+)"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DCParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, schema: Schema):
        self.text = text
        self.schema = schema
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, "", len(self.text))

    def take(self, kind: str, value: str | None = None) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            expected = value if value is not None else kind
            raise DCParseError(f"expected {expected!r}, found {tok[1]!r}", tok[2])
        self.i += 1
        return tok

    def parse(self, dc_id: str) -> DenialConstraint:
        self.take("ident", "t1")
        arity = 1
        if self.peek()[:2] == ("amp", "&"):
            self.take("amp")
            self.take("ident", "t2")
            arity = 2
        self.take("colon")
        predicates = [self.parse_predicate(arity)]
        while self.peek()[0] == "amp":
            self.take("amp")
            predicates.append(self.parse_predicate(arity))
        tok = self.peek()
        if tok[0] is not None:
            raise DCParseError(f"trailing input {tok[1]!r}", tok[2])
        return DenialConstraint(dc_id, arity, tuple(predicates))

    def parse_predicate(self, arity: int) -> Predicate:
        lhs = self.parse_ref(arity)
        kind, op, pos = self.take("op")
        if op in _SIMILARITY_OPS:
            raise DCParseError("similarity operator is not supported", pos)
        if op == "<>":
            op = "!="
        tok = self.peek()
        if tok[0] == "lit":
            self.take("lit")
            return Predicate(lhs, op, tok[1][1:-1])
        return Predicate(lhs, op, self.parse_ref(arity))

    def parse_ref(self, arity: int) -> AttrRef:
        kind, var, pos = self.take("ident")
        if var not in ("t1", "t2"):
            raise DCParseError(f"expected tuple variable t1 or t2, found {var!r}", pos)
        if var == "t2" and arity == 1:
            raise DCParseError("t2 referenced in a single-tuple constraint", pos)
        self.take("dot")
        kind, attr, apos = self.take("ident")
        try:
            idx = self.schema.index_of(attr)
        except Exception:
            raise DCParseError(f"unknown attribute {attr!r}", apos) from None
        return AttrRef(var, idx)


def parse_dc(text: str, schema: Schema, dc_id: str | None = None) -> DenialConstraint:
    """Parse one denial constraint against a schema."""
    return _Parser(text, schema).parse(dc_id or text.strip())


def load_constraints(path, schema: Schema) -> list[DenialConstraint]:
    """Read a constraints file: one DC per line, '#' comments, blank lines ignored."""
    constraints = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            constraints.append(parse_dc(stripped, schema, dc_id=f"dc{len(constraints)}"))
        except DCParseError as exc:
            raise DCParseError(f"{path}:{lineno}: {exc}") from exc
    return constraints


def _blocking_predicate(dc: DenialConstraint) -> Predicate | None:
    """First equality predicate joining a t1 attribute to a t2 attribute."""
    for p in dc.predicates:
        if (
            p.op == "="
            and isinstance(p.rhs, AttrRef)
            and {p.lhs.var, p.rhs.var} == {"t1", "t2"}
        ):
            return p
    return None


class ViolationIndex:
    """Per-constraint hash indexes over a fixed dataset, for fast violation counts.

    Counting hashes on an equality join predicate when one exists and scans
    candidate blocks; the result equals the naive scan over all ordered pairs.
    """

    def __init__(self, dataset: Dataset, constraints: Iterable[DenialConstraint]):
        self.dataset = dataset
        self.constraints = list(constraints)
        self._blocks = []
        for dc in self.constraints:
            if dc.arity != 2:
                self._blocks.append(None)
                continue
            block = _blocking_predicate(dc)
            if block is None:
                self._blocks.append(None)
                continue
            t1_attr = block.lhs.attr_index if block.lhs.var == "t1" else block.rhs.attr_index
            t2_attr = block.rhs.attr_index if block.lhs.var == "t1" else block.lhs.attr_index
            by_t2: dict[str, list[int]] = {}
            by_t1: dict[str, list[int]] = {}
            for j, row in enumerate(dataset.rows):
                by_t2.setdefault(row[t2_attr], []).append(j)
                by_t1.setdefault(row[t1_attr], []).append(j)
            self._blocks.append((t1_attr, t2_attr, by_t2, by_t1))

    def counts(self) -> np.ndarray:
        """Violations per tuple: shape (n_rows, n_constraints), int64."""
        n = self.dataset.n_rows
        rows = self.dataset.rows
        out = np.zeros((n, len(self.constraints)), dtype=np.int64)
        for k, dc in enumerate(self.constraints):
            if dc.arity == 1:
                for i, row in enumerate(rows):
                    if dc.violated_by_tuple(row):
                        out[i, k] += 1
                continue
            block = self._blocks[k]
            for i, row in enumerate(rows):
                if block is None:
                    candidates = range(n)
                else:
                    t1_attr, _, by_t2, _ = block
                    candidates = by_t2.get(row[t1_attr], ())
                for j in candidates:
                    if j != i and dc.violated_by_pair(row, rows[j]):
                        out[i, k] += 1
                        out[j, k] += 1
        return out

    def counts_for_row(self, row: tuple[str, ...], exclude_index: int | None = None) -> np.ndarray:
        """Violations a hypothetical row would participate in against this dataset.

        Used when a cell value is replaced (augmentation): the row at
        exclude_index is skipped so the modified tuple is not paired with its
        own original.
        """
        rows = self.dataset.rows
        n = self.dataset.n_rows
        out = np.zeros(len(self.constraints), dtype=np.int64)
        for k, dc in enumerate(self.constraints):
            if dc.arity == 1:
                out[k] = 1 if dc.violated_by_tuple(row) else 0
                continue
            block = self._blocks[k]
            if block is None:
                fwd = (j for j in range(n))
                rev = (j for j in range(n))
            else:
                t1_attr, t2_attr, by_t2, by_t1 = block
                fwd = by_t2.get(row[t1_attr], ())
                rev = by_t1.get(row[t2_attr], ())
            for j in fwd:  # (row, j): row plays t1
                if j != exclude_index and dc.violated_by_pair(row, rows[j]):
                    out[k] += 1
            for j in rev:  # (j, row): row plays t2
                if j != exclude_index and dc.violated_by_pair(rows[j], row):
                    out[k] += 1
        return out


def count_violations(dataset: Dataset, constraints: Iterable[DenialConstraint]) -> np.ndarray:
    """Violations per tuple and constraint; see ViolationIndex.counts."""
    return ViolationIndex(dataset, constraints).counts()
