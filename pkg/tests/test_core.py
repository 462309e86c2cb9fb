import math

import numpy as np
import pytest

from dirinfo.core import (
    MeasureValue,
    SequenceDistribution,
    TimeSeriesPanel,
    load_panel,
    make_partition,
    symbolize,
    write_panel,
)
from dirinfo.errors import (
    DegenerateColumn,
    InvalidModel,
    ParamError,
    ParseError,
    PartitionError,
    SchemaError,
)


def test_load_csv_basic(tmp_path, rng):
    path = tmp_path / "panel.csv"
    values = rng.normal(size=(100, 3))
    lines = ["x,y,z"] + [",".join(repr(float(v)) for v in row) for row in values]
    path.write_text("\n".join(lines) + "\n")
    panel = load_panel(path)
    assert panel.n_samples == 100
    assert panel.labels == ("x", "y", "z")
    assert np.allclose(panel.values, values)


def test_load_csv_non_numeric_names_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n3,oops\n")
    with pytest.raises(ParseError, match="row 3.*column y"):
        load_panel(path)


def test_load_csv_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("x,y\n1,2\n3\n")
    with pytest.raises(ParseError, match="row 3"):
        load_panel(path)


def test_load_json_duplicate_labels(tmp_path):
    path = tmp_path / "dup.json"
    path.write_text('{"labels": ["a", "a"], "values": [[1, 2]]}')
    with pytest.raises(SchemaError):
        load_panel(path, format="json")


def test_csv_roundtrip_bit_exact(tmp_path, rng):
    panel = TimeSeriesPanel(values=rng.normal(size=(50, 2)), labels=("u", "v"))
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    write_panel(panel, first)
    write_panel(load_panel(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_integer_panel_roundtrip(tmp_path):
    panel = TimeSeriesPanel(values=np.array([[0, 1], [2, 3]]), labels=("a", "b"))
    path = tmp_path / "ints.csv"
    write_panel(panel, path)
    back = load_panel(path)
    assert back.is_integer()
    assert np.array_equal(back.values, panel.values)


def test_json_roundtrip(tmp_path, rng):
    panel = TimeSeriesPanel(values=rng.normal(size=(10, 2)), labels=("a", "b"))
    path = tmp_path / "p.json"
    write_panel(panel, path, format="json")
    back = load_panel(path, format="json")
    assert np.allclose(back.values, panel.values)
    assert back.labels == panel.labels


def test_panel_invariants():
    with pytest.raises(SchemaError):
        TimeSeriesPanel(values=np.zeros((5, 1)), labels=("a",))
    with pytest.raises(SchemaError):
        TimeSeriesPanel(values=np.zeros((5, 2)), labels=("a", "a"))
    with pytest.raises(SchemaError):
        TimeSeriesPanel(values=np.array([[1.0, np.nan]]), labels=("a", "b"))


def test_make_partition_complement():
    part = make_partition(["x", "y", "z"], ["x"], ["z"])
    assert part.c_labels == ("y",)
    assert part.a_labels == ("x",) and part.b_labels == ("z",)


def test_make_partition_bivariate_empty_c():
    part = make_partition(["x", "y"], ["x"], ["y"])
    assert part.c == ()


def test_make_partition_errors():
    with pytest.raises(PartitionError):
        make_partition(["x", "y"], ["x"], ["x"])
    with pytest.raises(PartitionError):
        make_partition(["x", "y"], ["w"], ["y"])
    with pytest.raises(PartitionError):
        make_partition(["x", "y"], [], ["y"])


def test_symbolize_equal_width():
    panel = TimeSeriesPanel(values=np.array([[0.1, 5.0], [0.9, 5.0], [0.5, 5.0]]),
                            labels=("a", "b"))
    out = symbolize(panel, bins=2, scheme="equal_width")
    assert out.values[:, 0].tolist() == [0, 1, 0]
    # constant column occupies a single bin
    assert out.values[:, 1].tolist() == [0, 0, 0]
    assert "bin_edges" in out.meta


def test_symbolize_equal_frequency_rejects_constant():
    panel = TimeSeriesPanel(values=np.array([[0.1, 5.0], [0.9, 5.0], [0.5, 5.0]]),
                            labels=("a", "b"))
    with pytest.raises(DegenerateColumn, match="b"):
        symbolize(panel, bins=2, scheme="equal_frequency")


def test_symbolize_monotone_equal_width(rng):
    values = rng.normal(size=(200, 2))
    panel = TimeSeriesPanel(values=values, labels=("a", "b"))
    out = symbolize(panel, bins=5, scheme="equal_width")
    for j in range(2):
        order = np.argsort(values[:, j])
        symbols = out.values[order, j]
        assert np.all(np.diff(symbols) >= 0)
    assert out.values.min() >= 0 and out.values.max() <= 4


def test_symbolize_param_errors():
    panel = TimeSeriesPanel(values=np.zeros((3, 2)), labels=("a", "b"))
    with pytest.raises(ParamError):
        symbolize(panel, bins=1)
    with pytest.raises(ParamError):
        symbolize(panel, bins=4, scheme="nope")


def test_sequence_distribution_validation():
    good = np.full((2, 2), 0.25)
    SequenceDistribution(alphabet_sizes=(2,), horizon=2, pmf=good)
    with pytest.raises(InvalidModel):
        SequenceDistribution(alphabet_sizes=(2,), horizon=2, pmf=np.full((2, 2), 0.3))
    with pytest.raises(InvalidModel):
        SequenceDistribution(alphabet_sizes=(2,), horizon=1, pmf=good)


def test_measure_value_units():
    mv = MeasureValue(value=math.log(2.0), horizon=1, kind="entropy")
    assert mv.in_bits() == pytest.approx(1.0)
    with pytest.raises(ParamError):
        MeasureValue(value=0.0, horizon=1, kind="bogus")
