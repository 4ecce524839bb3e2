"""Compare a simulated series with a reference series.

The reference is interpolated linearly onto the simulation timestamps that
fall inside the common time range; RMSE and maximum absolute deviation are
reported per signal. Experimental data enter through a wide CSV plus a JSON
signal map::

    {"time": {"column": "time", "unit": "min"},
     "signals": {"T_1": {"column": "TI_reboiler", "unit": "degC"}, ...}}

Map keys are schema column names; values are converted to schema units on
read so that both series carry identical units before differencing.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ComparisonError, OutputError, ParseError, ValidationError
from .timeseries import Series, column_unit, records_to_series

# unit -> (scale, offset) to the canonical unit of its dimension
_CONVERSIONS = {
    "s": ("s", 1.0, 0.0), "min": ("s", 60.0, 0.0), "h": ("s", 3600.0, 0.0),
    "K": ("K", 1.0, 0.0), "degC": ("K", 1.0, 273.15),
    "Pa": ("Pa", 1.0, 0.0), "kPa": ("Pa", 1e3, 0.0), "mbar": ("Pa", 100.0, 0.0), "bar": ("Pa", 1e5, 0.0),
    "mol/s": ("mol/s", 1.0, 0.0), "mol/h": ("mol/s", 1.0 / 3600.0, 0.0),
    "mol/mol": ("mol/mol", 1.0, 0.0), "W": ("W", 1.0, 0.0), "kW": ("W", 1e3, 0.0),
    "mol": ("mol", 1.0, 0.0), "J/mol": ("J/mol", 1.0, 0.0), "kJ/mol": ("J/mol", 1e3, 0.0),
    "1": ("1", 1.0, 0.0),
}


def convert(values, unit, target):
    """Convert ``values`` from ``unit`` into ``target``; both must share a dimension."""
    try:
        base, scale, offset = _CONVERSIONS[unit]
        tbase, tscale, toffset = _CONVERSIONS[target]
    except KeyError as exc:
        raise ValidationError(f"unit mismatch: unknown unit {exc.args[0]!r}") from None
    if base != tbase:
        raise ValidationError(f"unit mismatch: cannot convert {unit} to {target}")
    return (np.asarray(values, dtype=float) * scale + offset - toffset) / tscale


@dataclass(frozen=True)
class SignalMetrics:
    rmse: float
    max_abs: float
    n_points: int
    unit: str


@dataclass
class ComparisonReport:
    """Per-signal deviations over the overlap ``[t_start, t_end]``."""

    metrics: dict = field(default_factory=dict)
    t_start: float = math.nan
    t_end: float = math.nan
    n_points: int = 0

    def to_dict(self):
        return {
            "t_start": self.t_start, "t_end": self.t_end, "n_points": self.n_points,
            "signals": {k: vars(m) for k, m in self.metrics.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _as_series(data, names=None) -> Series:
    if isinstance(data, Series):
        return data
    if names is None:
        raise ComparisonError("component names are needed to convert records")
    return records_to_series(list(data), names)


def compare_series(sim, ref, signals: Sequence[str], names=None) -> ComparisonReport:
    """RMSE and max-abs deviation of ``ref`` from ``sim`` for each signal.

    ``sim`` and ``ref`` are :class:`Series` or record lists (then ``names``,
    the component names, is required).
    """
    sim, ref = _as_series(sim, names), _as_series(ref, names)
    for s in signals:
        for label, ser in (("simulation", sim), ("reference", ref)):
            if s not in ser.signals:
                raise ComparisonError(f"signal {s!r} missing from the {label} series")
        if sim.units.get(s) != ref.units.get(s):
            raise ComparisonError(f"unit mismatch for {s!r}: {sim.units.get(s)} vs {ref.units.get(s)}")
    if sim.t.size == 0 or ref.t.size == 0:
        raise ComparisonError("empty series")
    lo, hi = max(sim.t[0], ref.t[0]), min(sim.t[-1], ref.t[-1])
    mask = (sim.t >= lo) & (sim.t <= hi)
    if hi < lo or not mask.any():
        raise ComparisonError("simulation and reference do not overlap in time")
    t = sim.t[mask]
    report = ComparisonReport(t_start=float(lo), t_end=float(hi), n_points=int(t.size))
    for s in signals:
        ok = np.isfinite(ref.signals[s])
        if not ok.any():
            raise ComparisonError(f"reference signal {s!r} has no finite values")
        diff = np.interp(t, ref.t[ok], ref.signals[s][ok]) - sim.signals[s][mask]
        report.metrics[s] = SignalMetrics(
            rmse=float(np.sqrt(np.mean(diff ** 2))), max_abs=float(np.max(np.abs(diff))),
            n_points=int(t.size), unit=sim.units[s],
        )
    return report


def load_signal_map(path_or_dict):
    if isinstance(path_or_dict, dict):
        spec = path_or_dict
    else:
        try:
            spec = json.loads(Path(path_or_dict).read_text(encoding="utf-8"))
        except OSError as exc:
            raise OutputError(exc.strerror or str(exc), path_or_dict) from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"signal map is not valid JSON: {exc}", str(path_or_dict)) from exc
    if "time" not in spec or "signals" not in spec:
        raise ParseError("signal map needs 'time' and 'signals' entries")
    return spec


def read_reference_csv(path, signal_map) -> Series:
    """Read a wide CSV of measurements into schema names and units."""
    spec = load_signal_map(signal_map)
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), path) from exc
    if len(rows) < 2:
        raise ParseError("reference CSV has no data rows", str(path))
    header = rows[0]

    def column(entry):
        name = entry["column"]
        if name not in header:
            raise ParseError(f"column {name!r} not found", str(path))
        k = header.index(name)
        try:
            return np.array([float(r[k]) if r[k] != "" else np.nan for r in rows[1:]])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"column {name!r}: {exc}", str(path)) from None

    t = convert(column(spec["time"]), spec["time"].get("unit", "s"), "s")
    signals, units = {}, {}
    for name, entry in spec["signals"].items():
        try:
            unit = column_unit(name)
        except KeyError:
            raise ValidationError(f"{name!r} is not a time-series schema column") from None
        signals[name] = convert(column(entry), entry.get("unit", unit), unit)
        units[name] = unit
    order = np.argsort(t, kind="stable")
    keep = np.isfinite(t[order])
    order = order[keep]
    return Series(t[order], {k: v[order] for k, v in signals.items()}, units)
