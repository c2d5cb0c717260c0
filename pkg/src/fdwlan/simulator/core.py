"""Slot-synchronised Monte Carlo simulation of saturated DCF with hidden terminals."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..geometry import GeometryConfig
from ..model import Regime
from ..throughput import MacPhyParams, frame_durations, payload_bits
from . import _pykernel
from .topology import TOPOLOGY_MODES, Topology, sample_topology

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

MIN_HORIZON = 10_000


def available_kernels():
    return ("compiled", "python") if _compiled is not None else ("python",)


def default_kernel():
    if _compiled is None or os.environ.get("FDWLAN_PURE_PYTHON"):
        return "python"
    return "compiled"


def _kernel_fn(name):
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available; build the extension "
                               "or use kernel='python'")
        return _compiled.run_slots
    if name == "python":
        return _pykernel.run_slots
    raise ValueError(f"unknown kernel {name!r}")


@dataclass(frozen=True)
class SimConfig:
    geometry: GeometryConfig = GeometryConfig()
    mac_phy: MacPhyParams = MacPhyParams()
    regime: Regime = Regime.FD
    horizon: int = 1_000_000
    seed: int = 0
    topology_mode: str = "sampled"
    rho_source: str = "slot"
    rho: int | None = None
    payload_mode: str = "payload"
    n_batches: int = 10

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime.parse(self.regime))
        if self.horizon < MIN_HORIZON:
            raise ValueError(f"horizon must be at least {MIN_HORIZON} slots, got {self.horizon}")
        if self.topology_mode not in TOPOLOGY_MODES:
            raise ValueError(f"unknown topology mode {self.topology_mode!r}")
        if not 2 <= self.n_batches <= self.horizon:
            raise ValueError("n_batches must lie in [2, horizon]")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def window(self) -> int:
        rho = self.rho if self.rho is not None else frame_durations(self.mac_phy, self.rho_source).rho
        return 2 * rho - 1


@dataclass
class SlotCounters:
    idle: int = 0
    success_hd: int = 0
    success_sfd: int = 0
    success_afd: int = 0
    collisions: int = 0
    ap_attempts: int = 0
    deliveries: int = 0

    @property
    def successes(self) -> int:
        return self.success_hd + self.success_sfd + self.success_afd

    @property
    def total(self) -> int:
        return self.idle + self.successes + self.collisions

    def __add__(self, other):
        return SlotCounters(*(getattr(self, f) + getattr(other, f) for f in _COUNTER_FIELDS))


_COUNTER_FIELDS = ("idle", "success_hd", "success_sfd", "success_afd", "collisions",
                   "ap_attempts", "deliveries")


@dataclass
class SimResult:
    """Empirical counterparts of the analytical quantities.

    ``tau_hat``/``p_hat`` are indexed by node (0 = AP); the ``*_annulus``
    arrays aggregate stations per annulus (NaN when an annulus is empty).
    ``S_hat`` credits one payload per successful virtual slot, like the
    analytical throughput; ``S_hat_deliveries`` credits every delivered frame,
    so FD slots with two successes count twice.  ``stderr``/``ci95`` hold
    standard errors and 95% half-widths keyed by ``tau_ap``, ``p_ap``,
    ``tau_sta``, ``p_sta`` and ``S``.
    """

    tau_hat: np.ndarray
    p_hat: np.ndarray
    tau_hat_annulus: np.ndarray
    p_hat_annulus: np.ndarray
    S_hat: float
    S_hat_deliveries: float
    counters: SlotCounters
    sim_time: float
    stderr: dict
    ci95: dict
    replications: int = 1
    kernel: str = "python"
    warning: str | None = None
    topology: Topology | None = None
    runs: list = field(default_factory=list, repr=False)

    @property
    def tau_ap_hat(self) -> float:
        return float(self.tau_hat[0])

    @property
    def p_ap_hat(self) -> float:
        return float(self.p_hat[0])


def _node_generators(mac_ss, n_nodes):
    return [np.random.Generator(np.random.PCG64(child)) for child in mac_ss.spawn(n_nodes)]


def _kernel_hidden(topo):
    n = topo.n
    hid = np.zeros((n + 1, n + 1), dtype=np.uint8)
    hid[1:, 1:] = topo.hidden
    return hid


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def _point_estimates(cfg, topo, attempts, failures, slots):
    """Estimates from counts summed over any set of batches."""
    M = cfg.geometry.M
    n_slots = slots.sum()
    tau = attempts / n_slots
    p = _ratio(failures, attempts)
    tau_ann = np.full(M, np.nan)
    p_ann = np.full(M, np.nan)
    for i in range(M):
        members = np.flatnonzero(topo.annulus == i + 1) + 1
        if len(members):
            tau_ann[i] = tau[members].mean()
            p_ann[i] = _ratio(failures[members].sum(), attempts[members].sum())
    d = frame_durations(cfg.mac_phy, cfg.rho_source)
    idle, s_hd, s_sfd, s_afd, coll = slots
    successes = s_hd + s_sfd + s_afd
    sim_time = idle * cfg.mac_phy.sigma + successes * d.T_s + coll * d.T_c
    L = payload_bits(cfg.mac_phy, cfg.payload_mode)
    return tau, p, tau_ann, p_ann, L * successes / sim_time, sim_time


def _summary_vector(tau, p, tau_ann, p_ann, S):
    return np.concatenate([[tau[0], p[0]], tau_ann, p_ann, [S]])


def _unpack_summary(vec, M):
    return {"tau_ap": vec[0], "p_ap": vec[1], "tau_sta": vec[2:2 + M],
            "p_sta": vec[2 + M:2 + 2 * M], "S": vec[-1]}


def _spread(samples, M):
    samples = np.asarray(samples, dtype=float)
    k = np.sum(~np.isnan(samples), axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        se = np.nanstd(samples, axis=0, ddof=1) / np.sqrt(k)
        tq = stats.t.ppf(0.975, np.maximum(k - 1, 1))
    return _unpack_summary(se, M), _unpack_summary(tq * se, M)


def _warning(cfg, attempts, counters, ci95, S):
    notes = []
    if attempts.min() < 100:
        notes.append("some node made fewer than 100 attempts")
    if S > 0 and ci95["S"] > 0.05 * S:
        notes.append("throughput CI half-width exceeds 5%")
    return "; ".join(notes) or None


def _run_seeded(cfg: SimConfig, ss: np.random.SeedSequence, kernel=None, trace=None):
    kernel = kernel or default_kernel()
    if trace is not None:
        kernel = "python"
    topo_ss, mac_ss = ss.spawn(2)
    topo = sample_topology(cfg.geometry, np.random.default_rng(topo_ss), cfg.topology_mode)
    gens = _node_generators(mac_ss, cfg.geometry.n + 1)
    raw = _kernel_fn(kernel)(_kernel_hidden(topo), cfg.mac_phy.W, cfg.mac_phy.m, cfg.window,
                             cfg.horizon, cfg.regime is Regime.FD, cfg.n_batches, gens, trace)
    att_b, fail_b, slots_b = raw["attempts"], raw["failures"], raw["slots"]
    attempts, failures, slots = att_b.sum(0), fail_b.sum(0), slots_b.sum(0)
    tau, p, tau_ann, p_ann, S, sim_time = _point_estimates(cfg, topo, attempts, failures, slots)

    M = cfg.geometry.M
    batch_vectors = [_summary_vector(*_point_estimates(cfg, topo, a, f, s)[:5])
                     for a, f, s in zip(att_b, fail_b, slots_b)]
    stderr, ci95 = _spread(batch_vectors, M)

    counters = SlotCounters(int(slots[0]), int(slots[1]), int(slots[2]), int(slots[3]),
                            int(slots[4]), int(attempts[0]), int(raw["deliveries"].sum()))
    L = payload_bits(cfg.mac_phy, cfg.payload_mode)
    return SimResult(
        tau_hat=tau, p_hat=p, tau_hat_annulus=tau_ann, p_hat_annulus=p_ann, S_hat=S,
        S_hat_deliveries=L * counters.deliveries / sim_time, counters=counters,
        sim_time=sim_time, stderr=stderr, ci95=ci95, kernel=kernel,
        warning=_warning(cfg, attempts, counters, ci95, S), topology=topo,
    )


TRACE_HEADER = "slot,type,transmitters,delivered"


def write_trace(records, path):
    """Write per-slot records as CSV; transmitters are ';'-joined node ids (0 = AP)."""
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for t, kind, tx, delivered in records:
            fh.write(f"{t},{_pykernel.SLOT_NAMES[kind]},{';'.join(map(str, tx))},{delivered}\n")


def run(cfg: SimConfig, *, kernel=None, trace_path=None) -> SimResult:
    """Simulate one topology for ``cfg.horizon`` virtual slots.

    The result is fully determined by ``cfg`` (including ``cfg.seed``).
    Passing ``trace_path`` switches to the pure-Python kernel and writes one
    CSV record per virtual slot.
    """
    trace = [] if trace_path is not None else None
    result = _run_seeded(cfg, np.random.SeedSequence(int(cfg.seed)), kernel, trace)
    if trace_path is not None:
        write_trace(trace, trace_path)
    return result


def trace_replication(cfg: SimConfig, index: int, path) -> SimResult:
    """Re-run replication ``index`` of :func:`estimate` with a per-slot trace."""
    ss = np.random.SeedSequence(int(cfg.seed)).spawn(index + 1)[index]
    records = []
    result = _run_seeded(cfg, ss, "python", records)
    write_trace(records, path)
    return result


def estimate(cfg: SimConfig, replications: int = 20, *, kernel=None, workers=None) -> SimResult:
    """Average ``replications`` independently seeded topologies and runs.

    Confidence intervals use the spread of the per-replication estimates
    (batch means with one batch per replication).  ``workers > 1`` runs
    replications on a thread pool; results do not depend on it.
    """
    if replications < 2:
        raise ValueError("replications must be at least 2")
    children = np.random.SeedSequence(int(cfg.seed)).spawn(replications)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda ss: _run_seeded(cfg, ss, kernel), children))
    else:
        runs = [_run_seeded(cfg, ss, kernel) for ss in children]
    return aggregate(runs, cfg.geometry.M)


def aggregate(runs, M) -> SimResult:
    vectors = [_summary_vector(r.tau_hat, r.p_hat, r.tau_hat_annulus, r.p_hat_annulus, r.S_hat)
               for r in runs]
    stderr, ci95 = _spread(vectors, M)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = lambda attr: np.nanmean([getattr(r, attr) for r in runs], axis=0)
        tau, p = mean("tau_hat"), mean("p_hat")
        tau_ann, p_ann = mean("tau_hat_annulus"), mean("p_hat_annulus")
    counters = SlotCounters()
    for r in runs:
        counters = counters + r.counters
    S = float(np.mean([r.S_hat for r in runs]))
    notes = {r.warning for r in runs if r.warning}
    if S > 0 and ci95["S"] > 0.05 * S:
        notes.add("throughput CI half-width exceeds 5%")
    return SimResult(
        tau_hat=tau, p_hat=p, tau_hat_annulus=tau_ann, p_hat_annulus=p_ann, S_hat=S,
        S_hat_deliveries=float(np.mean([r.S_hat_deliveries for r in runs])),
        counters=counters, sim_time=float(sum(r.sim_time for r in runs)),
        stderr=stderr, ci95=ci95, replications=len(runs), kernel=runs[0].kernel,
        warning="; ".join(sorted(notes)) or None, runs=runs,
    )


__all__ = ["SimConfig", "SimResult", "SlotCounters", "run", "estimate", "aggregate",
           "available_kernels", "default_kernel", "write_trace", "trace_replication",
           "MIN_HORIZON"]
