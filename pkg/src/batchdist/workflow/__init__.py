"""Scenario configuration, batch runs, calibration and dataset output."""

from .batch import run_batch
from .calibration import calibrate_correction_factors
from .comparison import compare_series, read_reference_csv
from .config import Scenario, load_config, parse_config, serialize_plant_xml, serialize_property_xml
from .dataset import emit_dataset_layout
from .timeseries import read_timeseries, write_timeseries

__all__ = [
    "Scenario",
    "calibrate_correction_factors",
    "compare_series",
    "emit_dataset_layout",
    "load_config",
    "parse_config",
    "read_reference_csv",
    "read_timeseries",
    "run_batch",
    "serialize_plant_xml",
    "serialize_property_xml",
    "write_timeseries",
]
