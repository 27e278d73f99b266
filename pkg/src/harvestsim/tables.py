"""Small CSV helpers shared by the report readers and writers.

Every emitted CSV may start with ``#`` comment lines (the version header);
readers skip them. Floats are written with ``repr`` so they round-trip
bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Iterator, Sequence, TextIO

from .errors import ParseError


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_rows(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence],
               comment: str | None = None) -> None:
    if comment:
        for line in comment.splitlines():
            stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def _data_lines(stream: TextIO) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, line


def read_rows(stream: TextIO, source=None) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Return ``(header, [(line_number, cells), ...])`` skipping comments and blanks."""
    lines = list(_data_lines(stream))
    if not lines:
        raise ParseError("empty file, no header", row=None, source=source)
    parsed = []
    for lineno, line in lines:
        cells = next(csv.reader(io.StringIO(line)))
        parsed.append((lineno, [c.strip() for c in cells]))
    header_line, header = parsed[0]
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names in header", row=header_line, source=source)
    return header, parsed[1:]


def parse_float(cell: str, *, row: int, column: str, source=None) -> float:
    if cell == "":
        raise ParseError(f"empty value in column {column!r}", row=row, source=source)
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric value {cell!r} in column {column!r}",
                         row=row, source=source) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {cell!r} in column {column!r}",
                         row=row, source=source)
    return value


def read_float_table(stream: TextIO, required: Sequence[str], optional: Sequence[str] = (),
                     source=None) -> tuple[list[int], dict[str, list[float | None]]]:
    """Read a CSV whose columns are all floats.

    Missing optional columns come back as lists of ``None``.
    """
    header, rows = read_rows(stream, source=source)
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"missing column(s) {missing}; got {header}", row=1, source=source)
    wanted = list(required) + [c for c in optional if c in header]
    index = {c: header.index(c) for c in wanted}
    out: dict[str, list[float | None]] = {c: [] for c in list(required) + list(optional)}
    linenos = []
    for lineno, cells in rows:
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(cells)}",
                             row=lineno, source=source)
        for c in wanted:
            out[c].append(parse_float(cells[index[c]], row=lineno, column=c, source=source))
        for c in optional:
            if c not in index:
                out[c].append(None)
        linenos.append(lineno)
    return linenos, out
