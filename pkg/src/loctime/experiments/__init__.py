"""Censuses, exponent regression, sweeps and the command-line harness."""
from .census import (THICK, THIN, Extremes, ExponentFit, InsufficientData, PointCensus,
                     ThickThinQuery, census_thick_thin, deviation_scale, exponent_fit,
                     extreme_normalized, extremes_of, late_exponent, late_point_census,
                     late_point_counts, successful_census, successful_counts, thick_exponent,
                     thick_thin_count, thin_exponent)
from .config import ConfigParse, ExperimentConfig, load_config, parse_config_text
from .io import COLUMNS, IoFailure, csv_to_rows, rows_to_csv
from .runner import InvariantViolation, cell_seed, run_experiment, sweep

__all__ = [
    "THICK", "THIN", "Extremes", "ExponentFit", "InsufficientData", "PointCensus",
    "ThickThinQuery", "census_thick_thin", "deviation_scale", "exponent_fit",
    "extreme_normalized", "extremes_of", "late_exponent", "late_point_census",
    "late_point_counts", "successful_census", "successful_counts", "thick_exponent",
    "thick_thin_count", "thin_exponent", "ConfigParse", "ExperimentConfig", "load_config",
    "parse_config_text", "COLUMNS", "IoFailure", "csv_to_rows", "rows_to_csv",
    "InvariantViolation", "cell_seed", "run_experiment", "sweep",
]
