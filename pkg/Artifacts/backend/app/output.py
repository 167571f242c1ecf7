"""
Row writers for result files.

CSV rows keep the model's field order, render floats with FLOAT_DIGITS
significant digits and join per-learner vectors with ';'. JSON lines are
written with ujson, one object per row. Nothing run-dependent is written, so
identical inputs produce byte-identical output.
"""
import csv
import enum
import sys
from contextlib import contextmanager
from typing import Any, Iterator, List, Optional, Sequence, TextIO, Type

import ujson
from pydantic import BaseModel

from app.core.config import settings
from app.schemas import OutputFormat


def _csv_cell(value: Any, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, f".{digits}g")
    if isinstance(value, (list, tuple)):
        return ";".join(_csv_cell(item, digits) for item in value)
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_json_value(item) for item in value]
    return value


def write_csv(rows: Sequence[BaseModel], stream: TextIO, model: Optional[Type[BaseModel]] = None) -> None:
    """Header row, then one line per row. An empty sequence still gets the header when `model` is given."""
    model = model or (type(rows[0]) if rows else None)
    if model is None:
        return
    columns: List[str] = list(model.model_fields)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(getattr(row, column), settings.FLOAT_DIGITS) for column in columns])


def write_jsonlines(rows: Sequence[BaseModel], stream: TextIO) -> None:
    for row in rows:
        record = {name: _json_value(getattr(row, name)) for name in type(row).model_fields}
        stream.write(ujson.dumps(record, sort_keys=False, escape_forward_slashes=False))
        stream.write("\n")


def write_rows(
    rows: Sequence[BaseModel],
    stream: TextIO,
    fmt: OutputFormat = OutputFormat.CSV,
    model: Optional[Type[BaseModel]] = None,
) -> None:
    if fmt == OutputFormat.JSONLINES:
        write_jsonlines(rows, stream)
    else:
        write_csv(rows, stream, model)


@contextmanager
def open_output(path: Optional[str]) -> Iterator[TextIO]:
    """The file at `path` (truncated, newline-normalized) or stdout."""
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        yield handle


def write_key_values(row: BaseModel, stream: TextIO) -> None:
    """`key = value` lines, one per field, in the CSV cell format."""
    for name in type(row).model_fields:
        stream.write(f"{name} = {_csv_cell(getattr(row, name), settings.FLOAT_DIGITS)}\n")
