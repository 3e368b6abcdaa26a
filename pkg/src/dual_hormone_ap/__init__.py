"""Dual-hormone artificial pancreas toolkit: virtual patients, model identification and switching NMPC."""

from dual_hormone_ap.core import ConfigError, EstimationError, PipelineError, SolverError

__version__ = "0.1.0"
__metadata__ = {
    "name": "dual-hormone-ap",
    "version": __version__,
    "license": "MIT",
    "python": ">=3.12",
}
__all__ = [
    "ConfigError",
    "EstimationError",
    "PipelineError",
    "SolverError",
    "__metadata__",
    "__version__",
]
