"""
Measure file I/O.
CSV rows hold d coordinates followed by a weight, with an optional header
row; JSON files follow the MeasureFile schema. Every reader routes through
validate_measure.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Union
from pydantic import ValidationError

from barycentric_ot.exceptions import DimensionMismatch, MalformedFile
from barycentric_ot.models import DiscreteMeasure, MeasureFile
from barycentric_ot.services.measures import validate_measure
from barycentric_ot.utils.serialization import dumps, measure_payload


PathLike = Union[str, Path]


def _parse_row(row: List[str]) -> List[float]:
    return [float(cell) for cell in row]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_measure_csv(path: PathLike) -> DiscreteMeasure:
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row and any(cell.strip() for cell in row)]
    if rows:
        numeric = [_is_number(cell) for cell in rows[0]]
        if not any(numeric):
            rows = rows[1:]  # header
        elif not all(numeric):
            raise MalformedFile(f"{path}: row 1 mixes numbers and text: {rows[0]}")

    width = len(rows[0]) if rows else 0
    values = []
    for number, row in enumerate(rows, start=1):
        if len(row) != width or width < 2:
            raise DimensionMismatch(f"{path}: row {number} has {len(row)} columns, expected {width}")
        try:
            values.append(_parse_row(row))
        except ValueError as exc:
            raise MalformedFile(f"{path}: row {number}: {exc}") from exc

    points = [row[:-1] for row in values]
    weights = [row[-1] for row in values]
    return validate_measure(points, weights)


def read_measure_json(path: PathLike) -> DiscreteMeasure:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = MeasureFile.model_validate_json(text)
    except ValidationError as exc:
        raise MalformedFile(f"{path}: {exc.error_count()} schema errors") from exc
    for number, point in enumerate(data.points):
        if len(point) != data.dim:
            raise DimensionMismatch(f"{path}: point {number} has length {len(point)}, dim is {data.dim}")
    return validate_measure(data.points, data.weights)


def read_measure(path: PathLike) -> DiscreteMeasure:
    """Read a measure file, JSON by extension and CSV otherwise."""
    if Path(path).suffix.lower() == ".json":
        return read_measure_json(path)
    return read_measure_csv(path)


def write_measure(measure: DiscreteMeasure, path: PathLike) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(dumps(measure_payload(measure)), encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x{k}" for k in range(measure.dim)] + ["weight"])
        for point, weight in zip(measure.points, measure.weights):
            writer.writerow([repr(float(c)) for c in point] + [repr(float(weight))])


def read_result(path: PathLike) -> Dict[str, Any]:
    """Load a JSON result written by a previous run."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedFile(f"{path}: expected a JSON object")
    return data
