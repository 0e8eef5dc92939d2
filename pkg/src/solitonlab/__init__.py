"""Numerical lab for cohomogeneity-one shrinking gradient Ricci solitons."""

from .geometry import Collapse, OrbitPreset, preset_catalog, preset_names
from .dynamics import SolitonState, DiagnosticsRecord, diagnostics, vector_field
from .integrator import IntegratorConfig, Termination, Trajectory, integrate, series_start
from .shooting import Cluster, ScanGrid, ScanResult, find_clusters, refine, scan, sol_metric

__version__ = "0.1.0"

__all__ = [
    "Cluster",
    "Collapse",
    "DiagnosticsRecord",
    "IntegratorConfig",
    "OrbitPreset",
    "ScanGrid",
    "ScanResult",
    "SolitonState",
    "Termination",
    "Trajectory",
    "diagnostics",
    "find_clusters",
    "integrate",
    "preset_catalog",
    "preset_names",
    "refine",
    "scan",
    "series_start",
    "sol_metric",
    "vector_field",
    "__version__",
]
