"""Dataset folder layout.

::

    root/
      13_Batch_Distillation_Timeseries_Simulation/<setup>_<system>/<operating point>/
        <id>_timeseries_simulation.csv
      14_Batch_Distillation_Simulation_Configuration/<setup>_<system>/<operating point>/
        <id>_simulation_configuration.xml
        <property file>.xml

The modality folder names mirror the published database; the middle level
separates plant setups and chemical systems, the lowest level operating
points.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import NamedTuple

from ..errors import LayoutCollisionError, OutputError
from .config import Scenario, serialize_plant_xml, serialize_property_xml

TIMESERIES_MODALITY = "13_Batch_Distillation_Timeseries_Simulation"
CONFIG_MODALITY = "14_Batch_Distillation_Simulation_Configuration"
DEFAULT_PROPERTY_FILE = "properties.xml"

_UNSAFE = re.compile(r"[^A-Za-z0-9._+-]+")


class LayoutPaths(NamedTuple):
    timeseries: Path
    config: Path


def _safe(name, fallback):
    name = _UNSAFE.sub("_", str(name)).strip("._")
    return name or fallback


def system_folder(scenario: Scenario):
    system = scenario.system or "-".join(scenario.mixture.names)
    parts = [p for p in (scenario.setup, system) if p]
    return _safe("_".join(parts), "system")


def operating_point_folder(scenario: Scenario):
    return _safe(scenario.operating_point or f"scenario_{scenario.id}", "operating_point")


def layout_paths(root, scenario: Scenario) -> LayoutPaths:
    rel = Path(system_folder(scenario)) / operating_point_folder(scenario)
    root = Path(root)
    return LayoutPaths(root / TIMESERIES_MODALITY / rel, root / CONFIG_MODALITY / rel)


def timeseries_filename(scenario: Scenario):
    return f"{_safe(scenario.id, 'scenario')}_timeseries_simulation.csv"


def config_filename(scenario: Scenario):
    return f"{_safe(scenario.id, 'scenario')}_simulation_configuration.xml"


def property_filename(scenario: Scenario):
    return Path(scenario.mixture_ref).name if scenario.mixture_ref else DEFAULT_PROPERTY_FILE


def config_documents(scenario: Scenario):
    """``{filename: text}`` of the configuration written next to a run."""
    prop = property_filename(scenario)
    return {
        config_filename(scenario): serialize_plant_xml([scenario], property_file=prop),
        prop: serialize_property_xml(scenario.mixture),
    }


def emit_dataset_layout(root, scenario: Scenario, force=False) -> Path:
    """Create both modality trees for ``scenario`` and write its configuration.

    Returns the time-series leaf directory. Existing identical files are
    left untouched; a differing configuration raises
    :class:`LayoutCollisionError` unless ``force`` is set.
    """
    paths = layout_paths(root, scenario)
    docs = config_documents(scenario)
    try:
        for name, text in docs.items():
            target = paths.config / name
            if target.exists() and not force:
                if target.read_text(encoding="utf-8") != text:
                    raise LayoutCollisionError("existing configuration differs (use force to overwrite)",
                                               target)
        paths.timeseries.mkdir(parents=True, exist_ok=True)
        paths.config.mkdir(parents=True, exist_ok=True)
        for name, text in docs.items():
            target = paths.config / name
            if target.exists() and target.read_text(encoding="utf-8") == text:
                continue
            target.write_text(text, encoding="utf-8")
    except OSError as exc:
        if isinstance(exc, OutputError):
            raise
        raise OutputError(exc.strerror or str(exc), getattr(exc, "filename", "") or root) from exc
    return paths.timeseries
