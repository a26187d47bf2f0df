"""
Comma-separated trace files with a ``#`` header block.

Layout (see ``docs/FORMATS.md``)::

    # coopemit-trace 1
    # command: g2-cw
    # config_sha256: 3f0c...
    # <metric>: <value>          (zero or more)
    # columns: delay_ns,g2
    # units: ns,1
    -5.0,0.99999
    ...

Floats are written with ``repr`` so that reading a file back reproduces the
values bit for bit. The file holds no timestamp, so identical inputs give
identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .instrument import CountHistogram

__all__ = ["SCHEMA_VERSION", "TraceFile", "TraceFileError", "write_trace", "read_trace", "load_histogram", "format_value"]

SCHEMA_VERSION = 1
MAGIC = "coopemit-trace"
_RESERVED = ("command", "config_sha256", "columns", "units")


class TraceFileError(ValueError):
    """Malformed trace file; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class TraceFile:
    command: str
    config_sha256: str
    columns: tuple
    units: tuple
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[1] != len(self.columns):
            raise TraceFileError("data must be a 2-d array with one column per name")
        if len(self.units) != len(self.columns):
            raise TraceFileError("one unit per column is required")
        for name in tuple(self.columns) + tuple(self.units):
            if "," in name or not name:
                raise TraceFileError(f"invalid column name or unit {name!r}")
        for key in self.meta:
            if key in _RESERVED or ":" in key or not key:
                raise TraceFileError(f"invalid metadata key {key!r}")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "data", data)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace(path, trace: TraceFile) -> None:
    lines = [
        f"# {MAGIC} {SCHEMA_VERSION}",
        f"# command: {trace.command}",
        f"# config_sha256: {trace.config_sha256}",
    ]
    for key, value in trace.meta.items():
        text = value if isinstance(value, str) else format_value(value)
        if "\n" in text:
            raise TraceFileError(f"metadata {key!r} must fit on one line")
        lines.append(f"# {key}: {text}")
    lines.append("# columns: " + ",".join(trace.columns))
    lines.append("# units: " + ",".join(trace.units))
    for row in trace.data:
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_number(text: str, lineno: int):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise TraceFileError(f"not a number: {text!r}", lineno) from None


def read_trace(path) -> TraceFile:
    """Parse and validate a trace file.

    Columns holding only integers come back as ``int64`` when every column
    does; otherwise the data are ``float64``.

    Raises
    ------
    TraceFileError
        With the offending line number for any schema violation.
    """
    return _read(path)[0]


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise TraceFileError(f"cannot read {path!r}: {exc.strerror}") from None
    if not lines or not lines[0].startswith(f"# {MAGIC} "):
        raise TraceFileError(f"missing '# {MAGIC} <version>' header", 1)
    version = lines[0].split()[-1]
    if version != str(SCHEMA_VERSION):
        raise TraceFileError(f"unsupported schema version {version!r}", 1)

    header = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if ":" not in body:
            raise TraceFileError("header lines must read '# key: value'", i + 1)
        key, value = (s.strip() for s in body.split(":", 1))
        if key in header:
            raise TraceFileError(f"duplicate header key {key!r}", i + 1)
        header[key] = (value, i + 1)
        i += 1
    for key in _RESERVED:
        if key not in header:
            raise TraceFileError(f"header is missing '{key}'", i)
    columns = tuple(header["columns"][0].split(","))
    units = tuple(header["units"][0].split(","))
    if len(units) != len(columns):
        raise TraceFileError("units and columns differ in length", header["units"][1])

    rows = []
    first_float = [0] * len(columns)
    for j in range(i, len(lines)):
        text = lines[j]
        if not text.strip():
            raise TraceFileError("blank line inside the data block", j + 1)
        if text.startswith("#"):
            raise TraceFileError("header line after the data block started", j + 1)
        fields = text.split(",")
        if len(fields) != len(columns):
            raise TraceFileError(f"expected {len(columns)} columns, found {len(fields)}", j + 1)
        row = [_parse_number(f, j + 1) for f in fields]
        for k, v in enumerate(row):
            if not isinstance(v, int) and not first_float[k]:
                first_float[k] = j + 1
        rows.append(row)
    if not rows:
        raise TraceFileError("no data rows", len(lines))
    if any(first_float):
        data = np.array(rows, dtype=float)
    else:
        data = np.array(rows, dtype=np.int64)
    meta = {k: v for k, (v, _) in header.items() if k not in _RESERVED}
    return TraceFile(
        command=header["command"][0],
        config_sha256=header["config_sha256"][0],
        columns=columns,
        units=units,
        data=data,
        meta=meta,
    ), first_float


def load_histogram(path) -> CountHistogram:
    """Read a counts file (``delay_ns`` then integer ``counts``; extra columns ignored).

    Raises
    ------
    TraceFileError
        On schema mismatch, naming the offending line.
    """
    trace, first_float = _read(path)
    if len(trace.columns) < 2 or trace.columns[0] != "delay_ns" or trace.columns[1] != "counts":
        raise TraceFileError("a histogram needs columns 'delay_ns,counts'", 0)
    if trace.units[0] != "ns":
        raise TraceFileError("delay column must be in ns", 0)
    if first_float[1]:
        raise TraceFileError("counts must be integers", first_float[1])
    first_data_line = _first_data_line(path)
    tau = trace.data[:, 0].astype(float)
    step = np.diff(tau)
    bad = np.nonzero(step <= 0)[0]
    if bad.size:
        raise TraceFileError("delay column is not strictly increasing", first_data_line + int(bad[0]) + 1)
    counts = trace.data[:, 1].astype(np.int64)
    neg = np.nonzero(counts < 0)[0]
    if neg.size:
        raise TraceFileError("counts must be >= 0", first_data_line + int(neg[0]))
    return CountHistogram(tau, counts)


def _first_data_line(path) -> int:
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.startswith("#"):
                return n
    return 0


def histogram_trace(hist: CountHistogram, command: str, config_sha256: str, meta=None, extra: Sequence = ()) -> TraceFile:
    """Wrap counts (and optional extra ``(name, unit, values)`` columns) as a trace file."""
    cols = [hist.tau, hist.counts]
    names, units = ["delay_ns", "counts"], ["ns", "1"]
    for name, unit, values in extra:
        names.append(name)
        units.append(unit)
        cols.append(values)
    data = np.empty((hist.tau.size, len(cols)), dtype=object)
    for k, c in enumerate(cols):
        data[:, k] = list(c.tolist())
    return TraceFile(command, config_sha256, tuple(names), tuple(units), data, dict(meta or {}))
