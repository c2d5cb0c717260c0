"""Monte Carlo oracle for the analytical model.

The slot loop has a compiled implementation (``_kernel``, Cython) and a
pure-Python one (``_pykernel``).  The compiled one is used when the
extension is importable, unless ``FDWLAN_PURE_PYTHON`` is set.
"""

from .core import (
    MIN_HORIZON,
    SimConfig,
    SimResult,
    SlotCounters,
    aggregate,
    available_kernels,
    default_kernel,
    estimate,
    run,
    trace_replication,
    write_trace,
)
from .topology import TOPOLOGY_MODES, Topology, apportion, realized_hidden_counts, sample_topology
