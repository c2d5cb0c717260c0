"""Slot event probabilities, slot durations and saturation throughput."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import AnnulusLayout, GeometryConfig, HiddenCounts
from .model import (
    BackoffParams,
    FixedPointSolution,
    ModelOptions,
    Regime,
    build_system,
    pi_factors,
    solve_system,
)

__all__ = [
    "MacPhyParams",
    "SlotDurations",
    "ThroughputReport",
    "UndefinedConditionalError",
    "frame_durations",
    "payload_bits",
    "backoff_params",
    "p_transmit",
    "p_success",
    "saturation_throughput",
    "analyze",
    "compare_regimes",
]

PAYLOAD_MODES = ("payload", "mpdu")
RHO_SOURCES = ("slot", "delay")


class UndefinedConditionalError(ZeroDivisionError):
    """Success probability requested for a slot model with no transmissions."""


@dataclass(frozen=True)
class MacPhyParams:
    """PHY/MAC constants; defaults are the 802.11ac MCS 8 profile.

    Rates are in bit/s, times in seconds, lengths in bytes.
    """

    data_rate: float = 780e6
    control_rate: float = 6e6
    phy_header: float = 44e-6
    mac_header: int = 36
    fcs: int = 4
    ack_len: int = 14
    rts_len: int = 20
    cts_len: int = 14
    mpdu_len: int = 11454
    sigma: float = 9e-6
    delta: float = 1e-6
    difs: float = 34e-6
    sifs: float = 16e-6
    W: int = 16
    m: int = 6

    def __post_init__(self):
        for name in ("data_rate", "control_rate", "phy_header", "mac_header", "fcs",
                     "ack_len", "rts_len", "cts_len", "mpdu_len", "sigma", "delta",
                     "difs", "sifs", "W"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.m < 0:
            raise ValueError(f"m must be non-negative, got {self.m!r}")
        if not self.sifs < self.difs:
            raise ValueError("SIFS must be shorter than DIFS")
        if self.mpdu_len <= self.mac_header + self.fcs:
            raise ValueError("MPDU must be longer than MAC header plus FCS")

    @property
    def max_window(self) -> int:
        return self.W * 2 ** self.m


@dataclass(frozen=True)
class SlotDurations:
    t_rts: float
    t_cts: float
    t_data: float
    t_ack: float
    T_s: float
    T_c: float
    rho: int


@dataclass
class ThroughputReport:
    regime: Regime
    P_t: float
    P_s: float
    P_s_hd_part: float
    P_s_fd_part: float
    S: float
    solution: FixedPointSolution
    gain: float | None = None


def _exact(x):
    return Fraction(repr(float(x)))


def _airtime(header, nbytes, rate):
    return header + (0.0 if math.isinf(rate) else 8.0 * nbytes / rate)


def _ceil_ratio(t_header, nbytes, rate, unit):
    # exact ceil((header + 8*len/rate) / unit)
    if math.isinf(rate):
        t = _exact(t_header)
    else:
        t = _exact(t_header) + Fraction(8 * int(nbytes)) / _exact(rate)
    return max(1, math.ceil(t / _exact(unit)))


def frame_durations(p: MacPhyParams, rho_source: str = "slot") -> SlotDurations:
    """Airtimes of RTS/CTS/DATA/ACK and the success/collision slot lengths.

    ``rho`` is the RTS airtime in whole slots of ``sigma`` (``rho_source="slot"``)
    or in whole propagation delays (``rho_source="delay"``).
    """
    if rho_source not in RHO_SOURCES:
        raise ValueError(f"unknown rho source {rho_source!r}")
    t_rts = _airtime(p.phy_header, p.rts_len, p.control_rate)
    t_cts = _airtime(p.phy_header, p.cts_len, p.control_rate)
    t_ack = _airtime(p.phy_header, p.ack_len, p.control_rate)
    t_data = _airtime(p.phy_header, p.mpdu_len, p.data_rate)
    T_s = p.difs + t_rts + t_cts + t_data + t_ack + 3 * p.sifs + 4 * p.delta
    T_c = p.difs + t_rts + p.delta
    unit = p.sigma if rho_source == "slot" else p.delta
    rho = _ceil_ratio(p.phy_header, p.rts_len, p.control_rate, unit)
    return SlotDurations(t_rts=t_rts, t_cts=t_cts, t_data=t_data, t_ack=t_ack,
                         T_s=T_s, T_c=T_c, rho=rho)


def payload_bits(p: MacPhyParams, mode: str = "payload") -> int:
    """Bits credited per successful slot: MPDU minus header and FCS, or the whole MPDU."""
    if mode == "payload":
        return 8 * (p.mpdu_len - p.mac_header - p.fcs)
    if mode == "mpdu":
        return 8 * p.mpdu_len
    raise ValueError(f"unknown payload mode {mode!r}")


def backoff_params(p: MacPhyParams, rho_source: str = "slot", rho: int | None = None) -> BackoffParams:
    if rho is None:
        rho = frame_durations(p, rho_source).rho
    return BackoffParams(W=p.W, m=p.m, rho=rho)


def p_transmit(sol: FixedPointSolution, layout: AnnulusLayout) -> float:
    """Probability that at least one node starts transmitting in a slot."""
    quiet = np.prod((1.0 - sol.tau_sta) ** layout.node_counts)
    return float(1.0 - (1.0 - sol.tau_ap) * quiet)


def p_success(sol, layout, hidden: HiddenCounts, regime=None):
    """Success probability of a busy slot, split into HD and FD parts.

    Returns
    -------
    (P_s, P_s_hd_part, P_s_fd_part)
        ``P_s_fd_part`` is zero in the HD regime.

    Raises
    ------
    UndefinedConditionalError
        When no node ever transmits.
    """
    regime = Regime.parse(regime if regime is not None else sol.regime)
    P_t = p_transmit(sol, layout)
    if P_t <= 0.0:
        raise UndefinedConditionalError("P_t = 0: success probability is undefined")
    n = layout.n
    ni = layout.node_counts
    tau_ap = sol.tau_ap
    pi = pi_factors(sol.tau_sta, layout)
    quiet = float(np.prod((1.0 - sol.tau_sta) ** ni))
    lone_sta = ni * sol.tau_sta * pi
    hd = tau_ap * quiet + (1.0 - tau_ap) * float(np.sum(lone_sta))
    fd = 0.0
    if regime is Regime.FD:
        hd += tau_ap * float(np.sum((n - hidden.h - 1.0) / n * lone_sta))
        fd = tau_ap * float(np.sum((hidden.h + 1.0) / n * lone_sta))
    hd /= P_t
    fd /= P_t
    return hd + fd, hd, fd


def saturation_throughput(P_t: float, P_s: float, d: SlotDurations, p: MacPhyParams,
                          payload_mode: str = "payload", L: float | None = None) -> float:
    """Mean payload bits delivered per second of channel time."""
    if L is None:
        L = payload_bits(p, payload_mode)
    busy = P_t * P_s
    denom = (1.0 - P_t) * p.sigma + busy * d.T_s + P_t * (1.0 - P_s) * d.T_c
    return busy * L / denom


@dataclass(frozen=True)
class AnalysisOptions:
    """All interpretation switches that change the analytical numbers."""

    payload_mode: str = "payload"
    rho_source: str = "slot"
    h_normalization: str = "literal"
    ap_weighting: str = "literal"
    rho: int | None = None

    def __post_init__(self):
        if self.payload_mode not in PAYLOAD_MODES:
            raise ValueError(f"unknown payload mode {self.payload_mode!r}")
        if self.rho_source not in RHO_SOURCES:
            raise ValueError(f"unknown rho source {self.rho_source!r}")
        ModelOptions(self.h_normalization, self.ap_weighting)

    @property
    def model(self) -> ModelOptions:
        return ModelOptions(self.h_normalization, self.ap_weighting)


def analyze(cfg: GeometryConfig, p: MacPhyParams = MacPhyParams(), regime=Regime.FD,
            options: AnalysisOptions = AnalysisOptions(), *, hidden=None, **solver_kw) -> ThroughputReport:
    """Solve the model for one regime and evaluate its saturation throughput."""
    durations = frame_durations(p, options.rho_source)
    bp = backoff_params(p, options.rho_source, options.rho)
    system = build_system(cfg, bp, regime, options.model, hidden)
    sol = solve_system(system, **solver_kw)
    P_t = p_transmit(sol, system.layout)
    P_s, hd, fd = p_success(sol, system.layout, system.hidden, system.regime)
    S = saturation_throughput(P_t, P_s, durations, p, options.payload_mode)
    return ThroughputReport(regime=system.regime, P_t=P_t, P_s=P_s, P_s_hd_part=hd,
                            P_s_fd_part=fd, S=S, solution=sol)


def compare_regimes(cfg: GeometryConfig, p: MacPhyParams = MacPhyParams(),
                    options: AnalysisOptions = AnalysisOptions(), **kw):
    """Solve both regimes; returns ``(fd_report, hd_report, gain)`` with ``gain = S_FD / S_HD``."""
    fd = analyze(cfg, p, Regime.FD, options, **kw)
    hd = analyze(cfg, p, Regime.HD, options, **kw)
    gain = fd.S / hd.S
    fd.gain = hd.gain = gain
    return fd, hd, gain


__all__ += ["AnalysisOptions", "PAYLOAD_MODES", "RHO_SOURCES"]
