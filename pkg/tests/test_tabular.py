import math

import pytest
from hypothesis import given, strategies as st

from diagnostica.errors import ConfigError, FormatError, SchemaError
from diagnostica.tabular import (
    MISSING,
    Dataset,
    DegenerateBinWarning,
    Pattern,
    Selector,
    cover_indices,
    discretize,
    load_table,
    matches,
)

CSV = """A,B,T
a1,b1,1
a1,b1,1
a1,b2,1
a1,b2,0
a2,b1,0
a2,b1,0
a2,b2,0
a2,b2,1
"""

SCHEMA = {"A": "nominal", "B": "nominal", "T": "target"}


def test_load_table_parses_reference_csv():
    ds = load_table(CSV, SCHEMA)
    assert ds.N == 8
    assert ds.attribute_names == ("A", "B")
    assert ds.binary_target_name == "T"
    assert ds.target_bits() == 0b10000111
    assert ds.domain("A") == ("a1", "a2")


def test_load_table_ragged_row_is_format_error():
    with pytest.raises(FormatError, match="row 2"):
        load_table("A,T\na,1\nb\n", {"A": "nominal", "T": "target"})


def test_load_table_empty_body_is_format_error():
    with pytest.raises(FormatError):
        load_table("A,T\n", {"A": "nominal", "T": "target"})


def test_load_table_schema_must_cover_every_column():
    with pytest.raises(SchemaError, match="'B'"):
        load_table("A,B\na,b\n", {"A": "nominal"})


def test_load_table_rejects_schema_for_absent_column():
    with pytest.raises(SchemaError):
        load_table("A\na\n", {"A": "nominal", "Z": "nominal"})


def test_load_table_numeric_target_detected_by_value():
    ds = load_table("A,T\na,1.5\nb,0\n", {"A": "nominal", "T": "target"})
    assert ds.numeric_target_name == "T"
    assert ds.target_values() == (1.5, 0.0)


def test_load_table_empty_nominal_cell_becomes_missing():
    ds = load_table("A,T\n,1\nx,0\n", {"A": "nominal", "T": "target"})
    assert ds.column("A") == (MISSING, "x")


def test_selector_never_matches_missing():
    row = {"A": MISSING}
    assert not matches(Selector("A", "a1"), row)
    assert not matches(Selector("A", MISSING), row)
    assert not matches(Selector("Z", "a1"), row)


def test_cover_is_intersection_of_selector_covers(reference_dataset):
    ds = reference_dataset
    p = Pattern([Selector("A", "a1"), Selector("B", "b1")])
    expected = (ds.selector_cover(Selector("A", "a1"))
                & ds.selector_cover(Selector("B", "b1")))
    assert ds.cover(p) == expected
    assert cover_indices(ds.cover(p)) == (0, 1)


def test_empty_pattern_covers_all_rows(reference_dataset):
    assert reference_dataset.cover(Pattern()) == (1 << 8) - 1


def test_pattern_is_canonical_and_deduplicated():
    p = Pattern([Selector("B", "b1"), Selector("A", "a1"),
                 Selector("A", "a1")])
    assert [str(s) for s in p.selectors] == ["A=a1", "B=b1"]
    assert len(p) == 2


tokens = st.sampled_from(["x", "y", "z", MISSING])


@given(st.lists(tokens, min_size=1, max_size=24), st.sampled_from(["x", "y"]))
def test_missing_cells_never_enter_any_cover(column, value):
    ds = Dataset({"A": column}, {"A": "nominal"},
                 binary_target=("T", [True] * len(column)))
    bits = ds.selector_cover(Selector("A", value))
    for i, cell in enumerate(column):
        covered = bool(bits >> i & 1)
        assert covered == (cell == value and cell != MISSING)


@given(st.lists(st.tuples(tokens, tokens), min_size=1, max_size=24))
def test_refining_a_pattern_shrinks_its_cover(cells):
    ds = Dataset({"A": [c[0] for c in cells], "B": [c[1] for c in cells]},
                 {"A": "nominal", "B": "nominal"},
                 binary_target=("T", [True] * len(cells)))
    base = ds.cover(Pattern([Selector("A", "x")]))
    refined = ds.cover(Pattern([Selector("A", "x"), Selector("B", "y")]))
    assert refined & base == refined  # subset as bitsets


def _numeric_dataset(values):
    return Dataset({"v": values}, {"v": "numeric"},
                   binary_target=("T", [True] * len(values)))


def test_equal_width_tokens_are_half_open_until_last():
    ds = discretize(_numeric_dataset([1.0, 2.0, 3.0, 4.0]), "v", 2)
    assert ds.column("v") == ("[1,2.5)", "[1,2.5)", "[2.5,4]", "[2.5,4]")


def test_equal_frequency_splits_repeated_low_values():
    ds = discretize(_numeric_dataset([1.0, 1.0, 1.0, 9.0]), "v", 2,
                    strategy="equal-frequency")
    column = ds.column("v")
    assert len(set(column)) == 2
    assert column[0] == column[1] == column[2] != column[3]


def test_constant_column_gives_single_bin_and_warns():
    with pytest.warns(DegenerateBinWarning):
        ds = discretize(_numeric_dataset([5.0, 5.0, 5.0]), "v", 3)
    assert set(ds.column("v")) == {"[5,5]"}


def test_discretize_maps_nan_to_missing():
    ds = discretize(_numeric_dataset([1.0, math.nan, 4.0]), "v", 2)
    assert ds.column("v")[1] == MISSING


def test_discretize_rejects_bad_arguments():
    ds = _numeric_dataset([1.0, 2.0])
    with pytest.raises(ConfigError):
        discretize(ds, "v", 0)
    with pytest.raises(ConfigError):
        discretize(ds, "v", 2, strategy="kmeans")
    nominal = Dataset({"A": ["x"]}, {"A": "nominal"},
                      binary_target=("T", [True]))
    with pytest.raises(SchemaError):
        discretize(nominal, "A", 2)


def test_dataset_rejects_ragged_columns_and_double_targets():
    with pytest.raises(FormatError):
        Dataset({"A": ["x"], "B": ["x", "y"]},
                {"A": "nominal", "B": "nominal"})
    with pytest.raises(SchemaError):
        Dataset({"A": ["x"]}, {"A": "nominal"},
                binary_target=("T", [True]),
                numeric_target=("U", [1.0]))
