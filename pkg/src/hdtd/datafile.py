"""Text formats for transposable samples.

Matrix stack::

    # hdtd v1 N=2 r=2 c=3
    1,2,3
    4,5,6

    7,8,9
    10,11,12

Long form: a CSV with header ``sample,row,col,value`` and one line per entry,
indices 1-based. Numbers are written with 17 significant digits so that a
double survives the round trip exactly.
"""

from __future__ import annotations

import csv
import io
import math
import re
from pathlib import Path
from typing import Union

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionMismatch, MalformedFile
from .matrix_core import MatrixSample

__all__ = ["read_sample", "parse_sample", "format_stack", "format_long", "write_sample", "read_matrix"]

PathLike = Union[str, Path]
LONG_HEADER = ("sample", "row", "col", "value")
_HEADER = re.compile(r"^#\s*hdtd\s+v1\s+N=(\d+)\s+r=(\d+)\s+c=(\d+)\s*$")


def _num(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise MalformedFile(f"{where}: cannot parse {text.strip()!r} as a number") from None
    if not math.isfinite(v):
        raise MalformedFile(f"{where}: non-finite value {text.strip()!r}")
    return v


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _parse_stack(lines: list[str]) -> MatrixSample:
    m = _HEADER.match(lines[0].strip())
    if m is None:
        raise MalformedFile(f"bad header line {lines[0].strip()!r}, expected '# hdtd v1 N=<n> r=<r> c=<c>'")
    n, r, c = (int(g) for g in m.groups())
    if min(n, r, c) < 1:
        raise DimensionMismatch(f"header declares an empty dimension N={n} r={r} c={c}")
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    blocks: list[list[tuple[int, str]]] = [[]]
    for lineno, line in enumerate(body, start=2):
        if line.strip():
            blocks[-1].append((lineno, line))
        elif blocks[-1]:
            blocks.append([])
        else:
            raise MalformedFile(f"line {lineno}: blocks must be separated by exactly one blank line")
    if len(blocks) != n:
        raise DimensionMismatch(f"header declares N={n} matrices, found {len(blocks)}")
    data = np.empty((n, r, c))
    for i, block in enumerate(blocks):
        if len(block) != r:
            raise DimensionMismatch(f"matrix {i + 1} has {len(block)} rows, header declares r={r}")
        for a, (lineno, line) in enumerate(block):
            fields = line.split(",")
            if len(fields) != c:
                raise DimensionMismatch(f"line {lineno} has {len(fields)} values, header declares c={c}")
            data[i, a] = [_num(f, f"line {lineno}") for f in fields]
    return MatrixSample(data)


def _parse_long(text: str) -> MatrixSample:
    reader = csv.reader(io.StringIO(text))
    header = tuple(h.strip().lower() for h in next(reader))
    if header != LONG_HEADER:
        raise MalformedFile(f"long-form header must be {','.join(LONG_HEADER)}, got {','.join(header)}")
    entries: dict[tuple[int, int, int], float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 4:
            raise MalformedFile(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            key = tuple(int(f) for f in row[:3])
        except ValueError:
            raise MalformedFile(f"line {lineno}: indices must be integers") from None
        if min(key) < 1:
            raise MalformedFile(f"line {lineno}: indices are 1-based")
        if key in entries:
            raise MalformedFile(f"line {lineno}: duplicate entry for sample,row,col = {key}")
        entries[key] = _num(row[3], f"line {lineno}")  # type: ignore[index]
    if not entries:
        raise MalformedFile("long-form file has no entries")
    n, r, c = (max(k[d] for k in entries) for d in range(3))
    if len(entries) != n * r * c:
        raise DimensionMismatch(f"long form covers {len(entries)} of the {n}*{r}*{c} = {n * r * c} entries")
    data = np.empty((n, r, c))
    for (i, a, b), v in entries.items():
        data[i - 1, a - 1, b - 1] = v
    return MatrixSample(data)


def parse_sample(text: str) -> MatrixSample:
    """Parse either supported format, chosen by the first non-blank line."""
    lines = text.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise MalformedFile("empty data file")
    if lines[0].lstrip().startswith("#"):
        return _parse_stack(lines)
    return _parse_long("\n".join(lines))


def read_sample(path: PathLike) -> MatrixSample:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc.strerror}") from None
    return parse_sample(text)


def format_stack(s: MatrixSample) -> str:
    out = [f"# hdtd v1 N={s.n} r={s.rows} c={s.cols}"]
    for i, mat in enumerate(s.data):
        if i:
            out.append("")
        out.extend(",".join(_fmt(v) for v in row) for row in mat)
    return "\n".join(out) + "\n"


def format_long(s: MatrixSample) -> str:
    out = [",".join(LONG_HEADER)]
    for (i, a, b), v in np.ndenumerate(s.data):
        out.append(f"{i + 1},{a + 1},{b + 1},{_fmt(v)}")
    return "\n".join(out) + "\n"


def write_sample(s: MatrixSample, path: PathLike, long_form: bool = False) -> None:
    text = format_long(s) if long_form else format_stack(s)
    Path(path).write_text(text)


def read_matrix(path: PathLike, shape: tuple[int, int] | None = None, square: bool = False) -> NDArray[np.float64]:
    """Read a dense matrix stored as plain comma-separated rows (no header)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc.strerror}") from None
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise MalformedFile(f"{path}: empty matrix file")
    mat = [[_num(f, f"{path} row {k + 1}") for f in line.split(",")] for k, line in enumerate(rows)]
    width = len(mat[0])
    if any(len(row) != width for row in mat):
        raise MalformedFile(f"{path}: rows have differing lengths")
    if square and width != len(mat):
        raise DimensionMismatch(f"{path}: matrix is {len(mat)}x{width}, expected square")
    if shape is not None and (len(mat), width) != tuple(shape):
        raise DimensionMismatch(f"{path}: matrix is {len(mat)}x{width}, expected {shape[0]}x{shape[1]}")
    return np.array(mat)
