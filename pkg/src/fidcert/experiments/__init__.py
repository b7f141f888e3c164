"""Scan drivers, records and fits for the fidelity experiments."""

from .config import ConfigError, ScanConfig, load_config
from .records import PowerLawFit, ScanRecord, fit_power_law, fit_records
from .scans import codeword_scan, correlator_scan, perturbative_scan, run_scan

__all__ = [
    "ConfigError",
    "PowerLawFit",
    "ScanConfig",
    "ScanRecord",
    "codeword_scan",
    "correlator_scan",
    "fit_power_law",
    "fit_records",
    "load_config",
    "perturbative_scan",
    "run_scan",
]
