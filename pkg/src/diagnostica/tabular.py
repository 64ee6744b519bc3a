"""Nominal-feature tables with bitset covers.

This module provides the data substrate for subgroup discovery: datasets
of nominal attributes (plus a binary or numeric target), selectors that
test a single attribute for a single value, and patterns that conjoin
selectors.  Covers are plain Python integers used as bitsets, so the
cover of a conjunction is the bitwise AND of the selector covers.

Missing nominal cells hold the reserved :data:`MISSING` token.  A
selector never matches MISSING, not even a selector built for the
MISSING token itself.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

from .errors import ConfigError, FormatError, SchemaError

#: Reserved token stored in nominal cells whose value is unknown.
MISSING = "<MISSING>"

#: Spellings accepted as a binary target column (case-insensitive).
_TRUE_TOKENS = {"1", "true", "yes"}
_FALSE_TOKENS = {"0", "false", "no"}

NOMINAL = "nominal"
NUMERIC = "numeric"
TARGET = "target"


@dataclass(frozen=True, order=True)
class Selector:
    """Test that a nominal attribute holds one specific value."""

    attribute: str
    value: str

    def __str__(self) -> str:
        return f"{self.attribute}={self.value}"


class Pattern:
    """Conjunction of selectors; the empty pattern covers every row."""

    __slots__ = ("selectors",)

    def __init__(self, selectors: Iterable[Selector] = ()):
        self.selectors: tuple[Selector, ...] = tuple(sorted(set(selectors)))

    def __len__(self) -> int:
        return len(self.selectors)

    def __eq__(self, other) -> bool:
        return isinstance(other, Pattern) and self.selectors == other.selectors

    def __hash__(self) -> int:
        return hash(self.selectors)

    def __repr__(self) -> str:
        body = " AND ".join(str(s) for s in self.selectors) or "<empty>"
        return f"Pattern({body})"

    # key used for deterministic tie-breaking: shorter first, then
    # lexicographic over (attribute, value) pairs
    def sort_key(self) -> tuple:
        return (len(self.selectors),
                tuple((s.attribute, s.value) for s in self.selectors))


def matches(selector: Selector, row: Mapping[str, object]) -> bool:
    """True iff the row's cell equals the selector value and is not MISSING."""
    cell = row.get(selector.attribute, MISSING)
    return cell != MISSING and cell == selector.value


class DegenerateBinWarning(UserWarning):
    """Discretization produced fewer bins than requested."""


class Dataset:
    """Immutable column-oriented table of nominal/numeric attributes.

    Parameters
    ----------
    columns:
        Mapping of column name to a sequence of cell values.  Nominal
        cells are strings (:data:`MISSING` marks absent values), numeric
        cells are floats (NaN marks absent values).
    kinds:
        Mapping of column name to ``"nominal"`` or ``"numeric"``.
    binary_target / numeric_target:
        At most one of the two may name a target column.  A binary
        target is given as a sequence of bools, a numeric target as a
        sequence of floats; neither appears in ``columns``.
    """

    def __init__(
        self,
        columns: Mapping[str, Sequence],
        kinds: Mapping[str, str],
        binary_target: tuple[str, Sequence[bool]] | None = None,
        numeric_target: tuple[str, Sequence[float]] | None = None,
    ):
        if binary_target is not None and numeric_target is not None:
            raise SchemaError("a dataset has at most one target column")
        self._names = tuple(columns.keys())
        self._columns = {name: tuple(col) for name, col in columns.items()}
        self._kinds = dict(kinds)
        for name in self._names:
            if name not in self._kinds:
                raise SchemaError(f"no kind declared for column {name!r}")
            if self._kinds[name] not in (NOMINAL, NUMERIC):
                raise SchemaError(
                    f"column {name!r} has unknown kind {self._kinds[name]!r}")
        lengths = {len(col) for col in self._columns.values()}
        self._binary_target = None
        self._numeric_target = None
        if binary_target is not None:
            name, values = binary_target
            self._binary_target = (name, tuple(bool(v) for v in values))
            lengths.add(len(self._binary_target[1]))
        if numeric_target is not None:
            name, values = numeric_target
            self._numeric_target = (name, tuple(float(v) for v in values))
            lengths.add(len(self._numeric_target[1]))
        if len(lengths) > 1:
            raise FormatError(f"columns have unequal lengths: {sorted(lengths)}")
        if not lengths or 0 in lengths:
            raise FormatError("a dataset needs at least one row")
        self.N = lengths.pop()
        self._selector_covers: dict[Selector, int] = {}
        self._domains: dict[str, tuple[str, ...]] = {}

    # ------------------------------------------------------------------
    # column access

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return self._names

    def nominal_attributes(self) -> tuple[str, ...]:
        return tuple(n for n in self._names if self._kinds[n] == NOMINAL)

    def kind(self, name: str) -> str:
        try:
            return self._kinds[name]
        except KeyError:
            raise SchemaError(f"unknown attribute {name!r}") from None

    def column(self, name: str) -> tuple:
        try:
            return self._columns[name]
        except KeyError:
            raise SchemaError(f"unknown attribute {name!r}") from None

    # distinct non-MISSING tokens of a nominal column, sorted
    def domain(self, name: str) -> tuple[str, ...]:
        if name not in self._domains:
            if self.kind(name) != NOMINAL:
                raise SchemaError(f"attribute {name!r} is not nominal")
            tokens = {v for v in self._columns[name] if v != MISSING}
            self._domains[name] = tuple(sorted(tokens))
        return self._domains[name]

    def row(self, i: int) -> dict[str, object]:
        return {name: self._columns[name][i] for name in self._names}

    def rows(self) -> Iterable[dict[str, object]]:
        for i in range(self.N):
            yield self.row(i)

    # ------------------------------------------------------------------
    # targets

    @property
    def binary_target_name(self) -> str | None:
        return self._binary_target[0] if self._binary_target else None

    @property
    def numeric_target_name(self) -> str | None:
        return self._numeric_target[0] if self._numeric_target else None

    def target_bits(self) -> int:
        """Bitset of rows whose binary target is true."""
        if self._binary_target is None:
            raise SchemaError("dataset has no binary target")
        bits = 0
        for i, value in enumerate(self._binary_target[1]):
            if value:
                bits |= 1 << i
        return bits

    def target_values(self) -> tuple[float, ...]:
        if self._numeric_target is None:
            raise SchemaError("dataset has no numeric target")
        return self._numeric_target[1]

    # ------------------------------------------------------------------
    # covers

    @property
    def full_cover(self) -> int:
        return (1 << self.N) - 1

    def selector_cover(self, selector: Selector) -> int:
        """Bitset of rows matched by one selector (cached)."""
        cached = self._selector_covers.get(selector)
        if cached is not None:
            return cached
        column = self.column(selector.attribute)
        bits = 0
        if selector.value != MISSING:
            for i, cell in enumerate(column):
                if cell == selector.value:
                    bits |= 1 << i
        self._selector_covers[selector] = bits
        return bits

    def cover(self, pattern: Pattern) -> int:
        """Bitset of rows matched by every selector of the pattern."""
        bits = self.full_cover
        for selector in pattern.selectors:
            bits &= self.selector_cover(selector)
            if not bits:
                break
        return bits

    def replace_column(self, name: str, values: Sequence[str],
                       kind: str = NOMINAL) -> "Dataset":
        """New dataset with one column swapped out (used by discretize)."""
        if name not in self._columns:
            raise SchemaError(f"unknown attribute {name!r}")
        columns = {n: (values if n == name else col)
                   for n, col in self._columns.items()}
        kinds = dict(self._kinds)
        kinds[name] = kind
        return Dataset(columns, kinds,
                       binary_target=self._binary_target,
                       numeric_target=self._numeric_target)


def cover_indices(bits: int) -> tuple[int, ...]:
    """Row indices contained in a bitset cover, ascending."""
    out = []
    i = 0
    while bits:
        if bits & 1:
            out.append(i)
        bits >>= 1
        i += 1
    return tuple(out)


# ----------------------------------------------------------------------
# CSV loading


def load_table(source: TextIO | str,
               schema: Mapping[str, str]) -> Dataset:
    """Parse CSV content into a :class:`Dataset`.

    ``schema`` maps every header column to one of ``nominal``,
    ``numeric`` or ``target``.  A target column whose values all parse
    as booleans becomes the binary target, otherwise it is parsed as a
    numeric target.  Empty nominal cells become :data:`MISSING`; empty
    numeric cells become NaN.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty input: no header row") from None
    header = [h.strip() for h in header]
    for name in header:
        if name not in schema:
            raise SchemaError(f"schema does not cover column {name!r}")
        if schema[name] not in (NOMINAL, NUMERIC, TARGET):
            raise SchemaError(
                f"column {name!r} has unknown kind {schema[name]!r}")
    for name in schema:
        if name not in header:
            raise SchemaError(f"schema names absent column {name!r}")
    targets = [n for n in header if schema[n] == TARGET]
    if len(targets) > 1:
        raise SchemaError(f"more than one target column: {targets}")

    raw_columns: dict[str, list[str]] = {name: [] for name in header}
    for index, row in enumerate(reader):
        if not row:
            continue  # tolerate blank lines
        if len(row) != len(header):
            raise FormatError(
                f"row {index + 1} has {len(row)} cells, expected {len(header)}")
        for name, cell in zip(header, row):
            raw_columns[name].append(cell.strip())
    n_rows = len(raw_columns[header[0]]) if header else 0
    if n_rows == 0:
        raise FormatError("a dataset needs at least one row")

    columns: dict[str, Sequence] = {}
    kinds: dict[str, str] = {}
    binary_target = None
    numeric_target = None
    for name in header:
        raw = raw_columns[name]
        kind = schema[name]
        if kind == NOMINAL:
            columns[name] = [cell if cell else MISSING for cell in raw]
            kinds[name] = NOMINAL
        elif kind == NUMERIC:
            columns[name] = [_parse_number(cell, name, allow_empty=True)
                             for cell in raw]
            kinds[name] = NUMERIC
        else:
            lowered = [cell.lower() for cell in raw]
            if all(c in _TRUE_TOKENS | _FALSE_TOKENS for c in lowered):
                binary_target = (name, [c in _TRUE_TOKENS for c in lowered])
            else:
                numeric_target = (
                    name,
                    [_parse_number(cell, name, allow_empty=False)
                     for cell in raw])
    return Dataset(columns, kinds,
                   binary_target=binary_target, numeric_target=numeric_target)


def _parse_number(cell: str, column: str, allow_empty: bool) -> float:
    if not cell:
        if allow_empty:
            return math.nan
        raise FormatError(f"empty cell in target column {column!r}")
    try:
        return float(cell)
    except ValueError:
        raise FormatError(
            f"cell {cell!r} in column {column!r} is not numeric") from None


# ----------------------------------------------------------------------
# discretization

EQUAL_WIDTH = "equal-width"
EQUAL_FREQUENCY = "equal-frequency"


def discretize(dataset: Dataset, attribute: str, bins: int,
               strategy: str = EQUAL_WIDTH) -> Dataset:
    """Replace a numeric column by half-open interval tokens.

    Tokens read ``[lo,hi)`` except for the last bin, which is closed:
    ``[lo,hi]``.  NaN cells map to :data:`MISSING`.  When the data
    cannot support the requested number of bins (constant column,
    too few distinct values) fewer bins are emitted and a
    :class:`DegenerateBinWarning` is issued.
    """
    if dataset.kind(attribute) != NUMERIC:
        raise SchemaError(f"attribute {attribute!r} is not numeric")
    values = dataset.column(attribute)
    edges = interval_edges(values, bins, strategy, name=attribute)
    tokens = _interval_tokens(edges)
    column = [MISSING if math.isnan(v) else tokens[_bin_index(v, edges)]
              for v in values]
    return dataset.replace_column(attribute, column, NOMINAL)


def interval_edges(values: Sequence[float], bins: int,
                   strategy: str = EQUAL_WIDTH,
                   name: str = "column") -> list[float]:
    """Bin boundaries for a numeric column, NaN cells ignored."""
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    if strategy not in (EQUAL_WIDTH, EQUAL_FREQUENCY):
        raise ConfigError(f"unknown discretization strategy {strategy!r}")
    present = sorted(v for v in values if not math.isnan(v))
    if not present:
        raise FormatError(f"column {name!r} holds no numeric values")

    lo, hi = present[0], present[-1]
    if lo == hi:
        warnings.warn(
            f"column {name!r} is constant; emitting a single bin",
            DegenerateBinWarning, stacklevel=2)
        return [lo, hi]
    if strategy == EQUAL_WIDTH:
        width = (hi - lo) / bins
        return [lo + i * width for i in range(bins)] + [hi]
    edges = _equal_frequency_edges(present, bins)
    if len(edges) - 1 < bins:
        warnings.warn(
            f"column {name!r} supports only {len(edges) - 1} "
            f"equal-frequency bins of {bins} requested",
            DegenerateBinWarning, stacklevel=2)
    return edges


def apply_edges(value: float, edges: Sequence[float]) -> str:
    """Interval token for one value; NaN maps to :data:`MISSING`."""
    if math.isnan(value):
        return MISSING
    return _interval_tokens(edges)[_bin_index(value, edges)]


def _equal_frequency_edges(present: list[float], bins: int) -> list[float]:
    """Greedy cuts between distinct values aiming at equal bin counts."""
    distinct: list[float] = []
    counts: list[int] = []
    for v in present:
        if distinct and distinct[-1] == v:
            counts[-1] += 1
        else:
            distinct.append(v)
            counts.append(1)
    target = len(present) / bins
    edges = [distinct[0]]
    acc = 0
    remaining = bins
    for i, count in enumerate(counts[:-1]):
        acc += count
        if acc >= target * (len(edges)) and remaining > 1:
            edges.append((distinct[i] + distinct[i + 1]) / 2)
            remaining -= 1
    edges.append(distinct[-1])
    return edges


def _interval_tokens(edges: Sequence[float]) -> list[str]:
    tokens = []
    last = len(edges) - 2
    for i in range(len(edges) - 1):
        lo, hi = edges[i], edges[i + 1]
        close = "]" if i == last else ")"
        tokens.append(f"[{lo:g},{hi:g}{close}")
    return tokens


def _bin_index(v: float, edges: Sequence[float]) -> int:
    n_bins = max(len(edges) - 1, 1)
    for i in range(n_bins - 1):
        if v < edges[i + 1]:
            return i
    return n_bins - 1
