"""Run many scenarios and keep a manifest of what happened.

Each scenario runs in isolation: an exception in one is recorded in its
manifest entry and never stops the others. The manifest is JSON lines, one
entry per scenario in input order, with sorted keys.
"""

from __future__ import annotations

import hashlib
import json
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..errors import BatchDistError, OutputError
from ..integrator import simulate
from .config import Scenario
from .dataset import config_documents, emit_dataset_layout, layout_paths, timeseries_filename
from .timeseries import write_csv

# manifest fields that legitimately change between identical runs
TIMING_FIELDS = ("wall_time_s",)


def config_hash(scenario: Scenario) -> str:
    """sha256 over the canonical configuration documents of ``scenario``."""
    h = hashlib.sha256()
    for name, text in sorted(config_documents(scenario).items()):
        h.update(name.encode("utf-8") + b"\0" + text.encode("utf-8") + b"\0")
    return h.hexdigest()


def _conservation_defect(records):
    if len(records) < 2:
        return 0.0
    total, worst = 0.0, 0.0
    n0 = records[0].n_app
    for a, b in zip(records, records[1:]):
        total += 0.5 * (b.t - a.t) * (a.D + a.W.sum() + b.D + b.W.sum())
        worst = max(worst, abs(b.n_app - n0 + total) / n0)
    return worst


@dataclass
class BatchResult:
    results: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)


def run_one(scenario: Scenario, root=None, force=False):
    """Simulate one scenario; returns ``(result or None, manifest entry)``."""
    entry = dict(scenario_id=scenario.id, config_hash=config_hash(scenario), stop_reason=None,
                 error=None, error_type=None, n_records=0, t_final=None, conservation_defect=None, csv=None,
                 rejected_anomalies=[a for a, _ in scenario.controls.rejected])
    t0 = time.perf_counter()
    result = None
    try:
        result = simulate(scenario)
        entry.update(stop_reason=result.stop_reason.value, n_records=len(result.records),
                     t_final=result.records[-1].t,
                     conservation_defect=_conservation_defect(result.records))
        if result.message:
            entry["error"] = result.message
        if root is not None:
            emit_dataset_layout(root, scenario, force=force)
            path = write_csv(layout_paths(root, scenario).timeseries / timeseries_filename(scenario),
                             result.records, scenario.mixture.names)
            entry["csv"] = path.relative_to(root).as_posix()
    except BatchDistError as exc:
        entry.update(error=str(exc), error_type=type(exc).__name__)
    except Exception as exc:  # isolate the batch from unexpected failures too
        entry.update(error=str(exc), error_type=type(exc).__name__,
                     traceback=traceback.format_exc(limit=5))
    entry["wall_time_s"] = time.perf_counter() - t0
    return result, entry


def _run_star(args):
    return run_one(*args)


def run_batch(scenarios: Sequence[Scenario], jobs=1, root=None, force=False,
              manifest_path=None) -> BatchResult:
    """Simulate ``scenarios`` with up to ``jobs`` worker processes.

    With ``root`` given, each run's configuration and CSV are written into
    the dataset layout and the CSV path (relative to ``root``) is recorded.
    """
    scenarios = list(scenarios)
    ids = [s.id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise BatchDistError("scenario ids in a batch must be unique")
    root = None if root is None else Path(root)
    work = [(s, root, force) for s in scenarios]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            outcomes = list(pool.map(_run_star, work))
    else:
        outcomes = [_run_star(w) for w in work]
    out = BatchResult()
    for sc, (result, entry) in zip(scenarios, outcomes):
        out.results[sc.id] = result
        out.manifest.append(entry)
    if manifest_path is not None:
        write_manifest(out.manifest, manifest_path)
    return out


def manifest_text(entries) -> str:
    return "".join(json.dumps(e, sort_keys=True) + "\n" for e in entries)


def write_manifest(entries, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest_text(entries), encoding="utf-8")
    except OSError as exc:
        raise OutputError(exc.strerror or str(exc), path) from exc
    return path


def read_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def strip_timing(entries):
    return [{k: v for k, v in e.items() if k not in TIMING_FIELDS} for e in entries]
