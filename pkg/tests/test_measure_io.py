import json
import math

import numpy as np
import pytest

from barycentric_ot.exceptions import DimensionMismatch, MalformedFile, NonPositiveWeight
from barycentric_ot.utils.measure_io import read_measure, read_result, write_measure
from barycentric_ot.utils.serialization import dumps, to_jsonable
from tests.conftest import measure


def test_csv_with_and_without_header(write_csv):
    with_header = read_measure(write_csv("a.csv", [[0.0, 1.0], [2.0, 3.0]], [0.25, 0.75]))
    without = read_measure(write_csv("b.csv", [[0.0, 1.0], [2.0, 3.0]], [0.25, 0.75], header=False))
    assert with_header.dim == 2
    np.testing.assert_array_equal(with_header.points, without.points)
    np.testing.assert_array_equal(with_header.weights, [0.25, 0.75])


def test_csv_errors(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("0,0.5\n1,2,0.5\n", encoding="utf-8")
    with pytest.raises(DimensionMismatch):
        read_measure(ragged)

    garbage = tmp_path / "garbage.csv"
    garbage.write_text("x,weight\n0,0.5\nabc,0.5\n", encoding="utf-8")
    with pytest.raises(MalformedFile):
        read_measure(garbage)

    negative = tmp_path / "negative.csv"
    negative.write_text("0,0.5\n1,-0.5\n", encoding="utf-8")
    with pytest.raises(NonPositiveWeight):
        read_measure(negative)


@pytest.mark.parametrize("first_row", ["0.0,0.5x", "0.0,", "x0,0.5"])
def test_corrupt_first_row_is_not_a_header(tmp_path, first_row):
    path = tmp_path / "corrupt.csv"
    path.write_text(f"{first_row}\n1.0,0.5\n", encoding="utf-8")
    with pytest.raises(MalformedFile):
        read_measure(path)


def test_json_measure_round_trip(tmp_path):
    original = measure([[0.1, -2.0], [3.5, 0.25]], [0.4, 0.6])
    path = tmp_path / "m.json"
    write_measure(original, path)
    again = read_measure(path)
    assert again.points.tobytes() == original.points.tobytes()
    assert again.weights.tobytes() == original.weights.tobytes()


def test_json_dimension_must_match_points(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"dim": 2, "points": [[0.0]], "weights": [1.0]}), encoding="utf-8")
    with pytest.raises(DimensionMismatch):
        read_measure(path)


def test_read_result_needs_an_object(tmp_path):
    path = tmp_path / "r.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(MalformedFile):
        read_result(path)


def test_non_finite_floats_are_strings():
    assert to_jsonable([math.inf, -math.inf, math.nan, np.float64(0.5)]) == ["Infinity", "-Infinity", "NaN", 0.5]
    assert dumps({"a": np.array([1.0, 2.0])}).endswith("\n")
