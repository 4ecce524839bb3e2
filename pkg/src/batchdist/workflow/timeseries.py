"""Time-series CSV schema, writer and reader.

Column order (stage index ``j`` is 1-based, ``<c>`` a component name):

1. ``t``
2. per-stage blocks ``n_j, T_j, V_j, h_L_j, h_V_j, P_j, W_j`` (j = 1..S),
   then ``L_j`` (j = 1..S-1)
3. per-stage-per-component blocks ``x_j_<c>`` then ``y_j_<c>``
4. scalars ``Q_in, epsilon, D, reflux, B, T_cond, n_app``
5. buffer composition ``x_B_<c>``
6. labels ``anomaly_flag`` (0/1) and ``anomaly_ids`` (``;``-separated)

which gives ``8 S + 2 S C + C + 9`` columns. Floats are written with 17
significant digits so a re-read reproduces every value exactly.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from ..errors import InvalidInputError, OutputError, ParseError
from ..integrator import TimeSeriesRecord

STAGE_BLOCKS = ("n", "T", "V", "h_L", "h_V", "P", "W")
SCALARS = ("Q_in", "epsilon", "D", "reflux", "B", "T_cond", "n_app")
UNITS = {
    "t": "s", "n": "mol", "T": "K", "V": "mol/s", "L": "mol/s", "h_L": "J/mol", "h_V": "J/mol",
    "P": "Pa", "W": "mol/s", "x": "mol/mol", "y": "mol/mol", "x_B": "mol/mol", "Q_in": "W",
    "epsilon": "1", "D": "mol/s", "reflux": "mol/s", "B": "mol/s", "T_cond": "K", "n_app": "mol",
    "anomaly_flag": "1", "anomaly_ids": "",
}
ID_SEPARATOR = ";"


def column_count(S, C):
    return 8 * S + 2 * S * C + C + 9


def columns(S, names: Sequence[str]):
    """Header of the time-series CSV for ``S`` stages and the given components."""
    cols = ["t"]
    for q in STAGE_BLOCKS:
        cols += [f"{q}_{j}" for j in range(1, S + 1)]
    cols += [f"L_{j}" for j in range(1, S)]
    for q in ("x", "y"):
        cols += [f"{q}_{j}_{c}" for j in range(1, S + 1) for c in names]
    cols += list(SCALARS)
    cols += [f"x_B_{c}" for c in names]
    cols += ["anomaly_flag", "anomaly_ids"]
    return cols


def column_unit(name):
    """Unit of a schema column (``"1"`` for dimensionless)."""
    if name in UNITS:
        return UNITS[name]
    if name.startswith("x_B_"):
        return UNITS["x_B"]
    for q in ("h_L", "h_V") + STAGE_BLOCKS + ("L", "x", "y"):
        if name.startswith(q + "_"):
            return UNITS[q]
    raise KeyError(name)


def _fmt(v):
    return format(float(v), ".17g")


def record_row(rec: TimeSeriesRecord):
    row = [_fmt(rec.t)]
    for q in STAGE_BLOCKS:
        row += [_fmt(v) for v in getattr(rec, q)]
    row += [_fmt(v) for v in rec.L]
    row += [_fmt(v) for v in rec.x.ravel()]
    row += [_fmt(v) for v in rec.y.ravel()]
    row += [_fmt(getattr(rec, q)) for q in SCALARS]
    row += [_fmt(v) for v in rec.x_B]
    row += ["1" if rec.anomaly_flag else "0", ID_SEPARATOR.join(rec.anomaly_ids)]
    return row


def format_timeseries(records: Sequence[TimeSeriesRecord], names: Sequence[str]) -> str:
    if not records:
        raise InvalidInputError("cannot write an empty time series")
    S = records[0].n.size
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns(S, names))
    for rec in records:
        w.writerow(record_row(rec))
    return buf.getvalue()


def write_csv(path, records, names) -> Path:
    path = Path(path)
    text = format_timeseries(records, names)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), path) from exc
    return path


def write_timeseries(result, scenario, root) -> Path:
    """Write ``result`` below the dataset layout rooted at ``root``."""
    from .dataset import layout_paths, timeseries_filename

    if not result.records:
        raise InvalidInputError("cannot write an empty time series")
    leaf = layout_paths(root, scenario).timeseries
    return write_csv(leaf / timeseries_filename(scenario), result.records, scenario.mixture.names)


class Header(NamedTuple):
    S: int
    names: tuple


def parse_header(cols: Sequence[str]) -> Header:
    """Recover stage count and component names from a header row."""
    S = sum(1 for c in cols if c.startswith("n_") and c != "n_app")
    names = tuple(c[len("x_B_"):] for c in cols if c.startswith("x_B_"))
    if S < 2 or not names or list(cols) != columns(S, names):
        raise ParseError("header does not follow the time-series schema")
    return Header(S, names)


def read_timeseries(path):
    """Read a CSV written by :func:`write_timeseries`.

    Returns ``(records, component_names)``.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), path) from exc
    if not rows:
        raise ParseError("empty file", str(path))
    S, names = parse_header(rows[0])
    C = len(names)
    records = []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != column_count(S, C):
            raise ParseError(f"line {k}: expected {column_count(S, C)} fields, got {len(row)}", str(path))
        vals = np.array([float(v) for v in row[:-2]])
        pos = 1
        blocks = {}
        for q in STAGE_BLOCKS:
            blocks[q] = vals[pos:pos + S]
            pos += S
        L = vals[pos:pos + S - 1]
        pos += S - 1
        x = vals[pos:pos + S * C].reshape(S, C)
        pos += S * C
        y = vals[pos:pos + S * C].reshape(S, C)
        pos += S * C
        scalars = dict(zip(SCALARS, vals[pos:pos + len(SCALARS)]))
        pos += len(SCALARS)
        xB = vals[pos:pos + C]
        ids = tuple(i for i in row[-1].split(ID_SEPARATOR) if i)
        records.append(TimeSeriesRecord(
            t=float(vals[0]), L=L, x=x, y=y, x_B=xB, anomaly_flag=row[-2] == "1", anomaly_ids=ids,
            **{q: blocks[q] for q in STAGE_BLOCKS}, **{q: float(v) for q, v in scalars.items()},
        ))
    return records, names


class Series(NamedTuple):
    """Named signals sampled on a common time grid, with units."""

    t: np.ndarray
    signals: dict
    units: dict


def records_to_series(records: Sequence[TimeSeriesRecord], names: Sequence[str]) -> Series:
    """All numeric schema columns of ``records`` as a :class:`Series`."""
    if not records:
        raise InvalidInputError("empty record list")
    S = records[0].n.size
    cols = columns(S, names)[1:-1]
    data = np.array([[float(v) for v in record_row(r)[1:-1]] for r in records])
    signals = {c: data[:, k] for k, c in enumerate(cols)}
    units = {c: column_unit(c) for c in cols}
    return Series(np.array([r.t for r in records]), signals, units)
