"""Logistical balance KPIs over a material structure and its bookings.

Two graphs describe the books of a plant: a bill-of-material structure
(parent materials are built from child materials, edges carry the
per-unit quantity) and an accounting graph of inflow/outflow/
produced/consumed bookings.  On consistent books the balance

    balance(m) = inflow(m) + produced(m) - outflow(m) - consumed(m)
                 - sum over parents p of produced(p) * quantity(p -> m)

is zero for every material; deviations feed a feature table whose rows
can be mined for anomalous booking contexts (shift, storage group, cost
center, price band, degree band).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

from .errors import CycleError, FormatError, ValidationError
from .tabular import Dataset

INFLOW = "inflow"
OUTFLOW = "outflow"
PRODUCED = "produced"
CONSUMED = "consumed"
BOOKING_KINDS = (INFLOW, OUTFLOW, PRODUCED, CONSUMED)

#: token for nominal booking attributes that are absent or ambiguous
EMPTY = "EMPTY"
MIXED = "MIXED"

MATERIAL = "material"
BOOKING_GROUP = "booking-group"


@dataclass(frozen=True)
class BomEdge:
    """parent is built from ``quantity`` units of child per parent unit."""

    parent: str
    child: str
    quantity: float


@dataclass(frozen=True)
class Booking:
    material: str
    kind: str
    amount: float
    shift: str = EMPTY
    storage_group: str = EMPTY
    cost_center_id: str = EMPTY
    dangling: bool = False


@dataclass
class StructureGraph:
    """Acyclic bill-of-material graph with optional material prices."""

    prices: dict[str, float | None] = field(default_factory=dict)
    edges: list[BomEdge] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for edge in self.edges:
            if edge.quantity <= 0:
                raise ValidationError(
                    f"edge {edge.parent}->{edge.child} has non-positive "
                    f"quantity {edge.quantity}")
            key = (edge.parent, edge.child)
            if key in seen:
                raise ValidationError(
                    f"duplicate edge {edge.parent}->{edge.child}")
            seen.add(key)
            for node in key:
                self.prices.setdefault(node, None)
        cycle = _find_cycle(self.materials(), self.edges)
        if cycle:
            raise CycleError(
                "structure graph contains a cycle: " + " -> ".join(cycle),
                cycle=cycle)

    def materials(self) -> tuple[str, ...]:
        return tuple(sorted(self.prices))

    def parent_edges(self, material: str) -> list[BomEdge]:
        return [e for e in self.edges if e.child == material]

    def degree(self, material: str) -> int:
        return sum(1 for e in self.edges
                   if material in (e.parent, e.child))


@dataclass
class AccountingGraph:
    bookings: list[Booking] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        for b in self.bookings:
            if b.kind not in BOOKING_KINDS:
                raise ValidationError(f"unknown booking kind {b.kind!r}")
            if b.amount < 0:
                raise ValidationError(
                    f"booking for {b.material!r} has negative amount")

    def for_material(self, material: str) -> list[Booking]:
        return [b for b in self.bookings if b.material == material]

    def materials(self) -> tuple[str, ...]:
        return tuple(sorted({b.material for b in self.bookings}))


def _find_cycle(nodes: Iterable[str],
                edges: Sequence[BomEdge]) -> tuple[str, ...]:
    children: dict[str, list[str]] = {}
    for edge in edges:
        children.setdefault(edge.parent, []).append(edge.child)
    done: set[str] = set()
    path: list[str] = []
    on_path: set[str] = set()

    def walk(node: str) -> tuple[str, ...]:
        path.append(node)
        on_path.add(node)
        for nxt in children.get(node, ()):  # noqa: B023
            if nxt in on_path:
                i = path.index(nxt)
                return tuple(path[i:] + [nxt])
            if nxt not in done:
                found = walk(nxt)
                if found:
                    return found
        on_path.discard(node)
        path.pop()
        done.add(node)
        return ()

    for node in sorted(nodes):
        if node not in done:
            found = walk(node)
            if found:
                return found
    return ()


# ----------------------------------------------------------------------
# CSV loading

STRUCTURE_HEADER = ["parent", "child", "quantity", "price_parent",
                    "price_child"]
BOOKINGS_HEADER = ["material", "kind", "amount", "shift", "storage_group",
                   "cost_center_id"]


def load_structure(source: TextIO | str) -> StructureGraph:
    rows = _read_csv(source, STRUCTURE_HEADER)
    prices: dict[str, float | None] = {}
    warnings: list[str] = []
    edges = []
    for index, row in rows:
        quantity = _number(row["quantity"], "quantity", index)
        edges.append(BomEdge(row["parent"], row["child"], quantity))
        for node_key, price_key in (("parent", "price_parent"),
                                    ("child", "price_child")):
            node = row[node_key]
            cell = row[price_key]
            if not cell:
                prices.setdefault(node, None)
                continue
            price = _number(cell, price_key, index)
            known = prices.get(node)
            if known is None:
                prices[node] = price
            elif known != price:
                warnings.append(
                    f"row {index}: conflicting price {price} for {node!r}; "
                    f"keeping {known}")
    return StructureGraph(prices=prices, edges=edges, warnings=warnings)


def load_bookings(source: TextIO | str,
                  structure: StructureGraph | None = None) -> AccountingGraph:
    rows = _read_csv(source, BOOKINGS_HEADER)
    known = set(structure.materials()) if structure is not None else None
    bookings = []
    warnings = []
    for index, row in rows:
        dangling = known is not None and row["material"] not in known
        if dangling:
            warnings.append(
                f"row {index}: booking for material {row['material']!r} "
                "absent from the structure graph")
        bookings.append(Booking(
            material=row["material"],
            kind=row["kind"],
            amount=_number(row["amount"], "amount", index),
            shift=row["shift"] or EMPTY,
            storage_group=row["storage_group"] or EMPTY,
            cost_center_id=row["cost_center_id"] or EMPTY,
            dangling=dangling,
        ))
    return AccountingGraph(bookings=bookings, warnings=warnings)


def load_graphs(structure_source: TextIO | str,
                bookings_source: TextIO | str
                ) -> tuple[StructureGraph, AccountingGraph]:
    structure = load_structure(structure_source)
    return structure, load_bookings(bookings_source, structure)


def _read_csv(source: TextIO | str, expected_header: list[str]):
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise FormatError("empty input: no header row") from None
    if header != expected_header:
        raise FormatError(
            f"expected header {','.join(expected_header)}, "
            f"got {','.join(header)}")
    out = []
    for index, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(
                f"row {index} has {len(row)} cells, expected {len(header)}")
        out.append((index, dict(zip(header, (cell.strip() for cell in row)))))
    return out


def _number(cell: str, column: str, index: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise FormatError(
            f"row {index}: cell {cell!r} in column {column!r} "
            "is not numeric") from None


# ----------------------------------------------------------------------
# balances


def balances(structure: StructureGraph,
             accounting: AccountingGraph) -> dict[str, float]:
    """Balance of every material known to either graph.

    Integer amounts stay exact: sums and the production draw term are
    plain float additions of integral values.
    """
    sums: dict[str, dict[str, float]] = {}
    for booking in accounting.bookings:
        per_kind = sums.setdefault(booking.material,
                                   dict.fromkeys(BOOKING_KINDS, 0.0))
        per_kind[booking.kind] += booking.amount
    materials = sorted(set(structure.materials())
                       | set(accounting.materials()))
    produced = {m: sums.get(m, {}).get(PRODUCED, 0.0) for m in materials}
    out = {}
    for m in materials:
        per_kind = sums.get(m, dict.fromkeys(BOOKING_KINDS, 0.0))
        draw = sum(produced.get(e.parent, 0.0) * e.quantity
                   for e in structure.parent_edges(m))
        out[m] = (per_kind[INFLOW] + per_kind[PRODUCED]
                  - per_kind[OUTFLOW] - per_kind[CONSUMED] - draw)
    return out


def balance(structure: StructureGraph, accounting: AccountingGraph,
            material: str) -> float:
    all_balances = balances(structure, accounting)
    if material not in all_balances:
        raise ValidationError(f"unknown material {material!r}")
    return all_balances[material]


# ----------------------------------------------------------------------
# feature table

_DEGREE_BANDS = ((0, "0"), (1, "1-2"), (3, "3-5"), (6, "6+"))


def kpi_feature_table(structure: StructureGraph,
                      accounting: AccountingGraph,
                      granularity: str = MATERIAL) -> Dataset:
    """Mineable dataset with nominal booking context and |balance| target.

    ``material`` granularity emits one row per material; a booking
    attribute with several distinct values collapses to ``MIXED`` and an
    absent one to ``EMPTY``.  ``booking-group`` granularity emits one
    row per distinct (material, shift, storage_group, cost_center_id)
    combination, each carrying the material's |balance|.
    """
    if granularity not in (MATERIAL, BOOKING_GROUP):
        raise ValidationError(f"unknown granularity {granularity!r}")
    all_balances = balances(structure, accounting)
    materials = sorted(all_balances)
    price_band = _price_bands(structure, materials)
    degree_band = {m: _degree_band(structure.degree(m)) for m in materials}

    rows: list[dict[str, str]] = []
    targets: list[float] = []
    for m in materials:
        bookings = accounting.for_material(m)
        static = {"price_band": price_band[m],
                  "degree_band": degree_band[m]}
        if granularity == MATERIAL:
            row = dict(static)
            for attr in ("shift", "storage_group", "cost_center_id"):
                row[attr] = _collapse({getattr(b, attr) for b in bookings})
            rows.append(row)
            targets.append(abs(all_balances[m]))
        else:
            combos = sorted({(b.shift, b.storage_group, b.cost_center_id)
                             for b in bookings}) or [(EMPTY, EMPTY, EMPTY)]
            for shift, storage_group, cost_center_id in combos:
                row = dict(static)
                row.update(shift=shift, storage_group=storage_group,
                           cost_center_id=cost_center_id)
                rows.append(row)
                targets.append(abs(all_balances[m]))

    names = ("shift", "storage_group", "cost_center_id", "price_band",
             "degree_band")
    columns = {name: [row[name] for row in rows] for name in names}
    return Dataset(columns, dict.fromkeys(names, "nominal"),
                   numeric_target=("abs_balance", targets))


def _collapse(values: set[str]) -> str:
    values.discard(EMPTY)
    if not values:
        return EMPTY
    if len(values) == 1:
        return values.pop()
    return MIXED


def _degree_band(degree: int) -> str:
    band = _DEGREE_BANDS[0][1]
    for threshold, name in _DEGREE_BANDS:
        if degree >= threshold:
            band = name
    return band


def _price_bands(structure: StructureGraph,
                 materials: Sequence[str]) -> Mapping[str, str]:
    known = sorted(p for p in (structure.prices.get(m) for m in materials)
                   if p is not None)
    bands = {}
    for m in materials:
        price = structure.prices.get(m)
        if price is None or not known:
            bands[m] = EMPTY
        else:
            lo = known[len(known) // 3]
            hi = known[2 * len(known) // 3]
            if price < lo:
                bands[m] = "low"
            elif price < hi:
                bands[m] = "mid"
            else:
                bands[m] = "high"
    return bands
