"""Dataset ingestion, validation, round-tripping and summaries."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from addint import (
    ExposureKind,
    Schema,
    load_dataset,
    make_dataset,
    parse_schema_file,
    summarize,
    write_dataset,
)
from addint.errors import EmptyDataError, SchemaError, ValidationError

BIN = ExposureKind("binary")


@pytest.fixture
def binary_schema():
    return Schema(outcome="d", a1="g", a2="e", kind_a1=BIN, kind_a2=BIN)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_four_row_file_parses(tmp_path, binary_schema):
    path = _write(tmp_path, "d,g,e\n1,1,1\n1,0,0\n0,1,0\n0,0,1\n")
    ds = load_dataset(path, binary_schema)
    assert ds.n == 4
    assert ds.n_cases == 2
    np.testing.assert_array_equal(ds.a1, [1, 0, 1, 0])


def test_binary_invariant_violation_reports_row(tmp_path, binary_schema):
    path = _write(tmp_path, "d,g,e\n1,1,1\n1,2,0\n0,1,0\n")
    with pytest.raises(ValidationError) as excinfo:
        load_dataset(path, binary_schema)
    assert excinfo.value.row == 1


def test_missing_column_names_it(tmp_path, binary_schema):
    path = _write(tmp_path, "d,g\n1,1\n0,0\n")
    with pytest.raises(SchemaError, match="e"):
        load_dataset(path, binary_schema)


def test_empty_file_is_a_distinct_error(tmp_path, binary_schema):
    with pytest.raises(EmptyDataError):
        load_dataset(_write(tmp_path, ""), binary_schema)
    with pytest.raises(EmptyDataError):
        load_dataset(_write(tmp_path, "d,g,e\n"), binary_schema)


def test_missing_cell_is_hard_error(tmp_path, binary_schema):
    path = _write(tmp_path, "d,g,e\n1,1,1\n1,,0\n")
    with pytest.raises(ValidationError) as excinfo:
        load_dataset(path, binary_schema)
    assert excinfo.value.row == 1


def test_non_numeric_cell_reports_row(tmp_path, binary_schema):
    path = _write(tmp_path, "d,g,e\n1,1,1\n0,x,0\n")
    with pytest.raises(ValidationError) as excinfo:
        load_dataset(path, binary_schema)
    assert excinfo.value.row == 1


def test_weights_must_be_positive():
    with pytest.raises(ValidationError):
        make_dataset([1, 0], [0, 1], [1, 0], BIN, BIN, w=[1.0, 0.0])


def test_count_and_categorical_validation():
    count = ExposureKind("count")
    cat3 = ExposureKind.parse("categorical:3")
    make_dataset([1, 0], [0, 2], [3, 0], cat3, count)
    with pytest.raises(ValidationError):
        make_dataset([1, 0], [0, 3], [3, 0], cat3, count)
    with pytest.raises(ValidationError):
        make_dataset([1, 0], [0, 2], [1.5, 0], cat3, count)
    with pytest.raises(SchemaError):
        ExposureKind.parse("categorical")
    with pytest.raises(SchemaError):
        ExposureKind("count", n_levels=4)


def test_round_trip_binary(tmp_path, binary_schema):
    path = _write(tmp_path, "d,g,e\n1,1,1\n1,0,0\n0,1,0\n0,0,1\n")
    ds = load_dataset(path, binary_schema)
    out1 = tmp_path / "out1.csv"
    out2 = tmp_path / "out2.csv"
    write_dataset(ds, out1)
    ds2 = load_dataset(out1, binary_schema)
    write_dataset(ds2, out2)
    assert out1.read_bytes() == out2.read_bytes()
    np.testing.assert_array_equal(ds.d, ds2.d)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(0, 1),
            st.integers(0, 1),
            st.floats(-1e6, 1e6, allow_nan=False, width=64),
            st.floats(0.01, 100.0, allow_nan=False, width=64),
        ),
        min_size=1,
        max_size=40,
    )
)
def test_round_trip_is_exact_for_any_valid_dataset(tmp_path_factory, rows):
    tmp = tmp_path_factory.mktemp("roundtrip")
    d = [r[0] for r in rows]
    a1 = [r[1] for r in rows]
    a2 = [r[2] for r in rows]
    w = [r[3] for r in rows]
    ds = make_dataset(d, a1, a2, BIN, ExposureKind("continuous"), w=w)
    p1, p2 = tmp / "a.csv", tmp / "b.csv"
    write_dataset(ds, p1)
    ds2 = load_dataset(p1, ds.schema or _default_schema())
    write_dataset(ds2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_array_equal(ds.a2, ds2.a2)
    np.testing.assert_array_equal(ds.w, ds2.w)


def _default_schema():
    return Schema(
        outcome="d",
        a1="a1",
        a2="a2",
        kind_a1=BIN,
        kind_a2=ExposureKind("continuous"),
        weight="w",
    )


def test_schema_file_grammar(tmp_path):
    path = tmp_path / "schema.cfg"
    path.write_text(
        """
        # roles
        outcome = d
        a1 = g
        a2 = e
        kind.a1 = binary
        kind.a2 = count
        covariates = age, bmi
        weight = sw
        """
    )
    schema = parse_schema_file(path)
    assert schema.a2 == "e"
    assert schema.kind_a2.tag == "count"
    assert schema.covariates == ("age", "bmi")
    assert schema.weight == "sw"


def test_schema_rejects_duplicate_roles():
    with pytest.raises(SchemaError):
        Schema(outcome="d", a1="d", a2="e", kind_a1=BIN, kind_a2=BIN)


def test_summarize_counts_and_flags():
    ds = make_dataset([1, 1, 0, 0], [1, 0, 1, 0], [1, 0, 0, 1], BIN, BIN)
    rep = summarize(ds)
    assert rep.n_cases == 2 and rep.n_controls == 2
    assert rep.usable
    all_controls = make_dataset([0, 0], [1, 0], [0, 1], BIN, BIN)
    rep2 = summarize(all_controls)
    assert not rep2.usable
    assert "no cases" in rep2.reason
    assert "no" in rep2.to_text()


def test_dataset_arrays_are_immutable():
    ds = make_dataset([1, 0], [0, 1], [1, 0], BIN, BIN)
    with pytest.raises(ValueError):
        ds.d[0] = 0
