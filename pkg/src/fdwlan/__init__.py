"""Saturation throughput of full-duplex WLANs with hidden terminals under DCF."""

from .geometry import (
    AnnulusLayout,
    GeometryConfig,
    HiddenCounts,
    annulus_layout,
    cond_hidden_prob,
    hidden_area,
    hidden_counts,
    hidden_prob,
    lens_area,
)
from .model import BackoffParams, FixedPointSolution, ModelOptions, Regime, SolverError, solve, tau_of_p
from .throughput import (
    AnalysisOptions,
    MacPhyParams,
    SlotDurations,
    ThroughputReport,
    analyze,
    compare_regimes,
    frame_durations,
)

__version__ = "0.1.0"
