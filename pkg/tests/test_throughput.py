import dataclasses
import math

import numpy as np
import pytest

from fdwlan.geometry import GeometryConfig, HiddenCounts, annulus_layout, hidden_counts
from fdwlan.model import BackoffParams, FixedPointSolution, Regime, bianchi_fixed_point, solve
from fdwlan.throughput import (
    AnalysisOptions,
    MacPhyParams,
    UndefinedConditionalError,
    analyze,
    backoff_params,
    compare_regimes,
    frame_durations,
    p_success,
    p_transmit,
    payload_bits,
    saturation_throughput,
)

TABLE = MacPhyParams()
US = 1e-6


def fixed(tau_ap, tau_sta, regime="FD"):
    tau_sta = np.atleast_1d(np.asarray(tau_sta, dtype=float))
    return FixedPointSolution(tau_ap=tau_ap, tau_sta=tau_sta, p_ap=0.0, p_sta=np.zeros_like(tau_sta),
                              iterations=0, residual=0.0, regime=Regime.parse(regime))


# ---------------------------------------------------------------- oracles

def oracle_ps(tau_ap, tau, n_i, h_i, n, fd):
    """Success probabilities transcribed term by term, plain Python."""
    M = len(n_i)

    def pi(i):
        out = 1.0
        for j in range(M):
            e = max(n_i[j] - 1, 0) if j == i else n_i[j]
            out *= (1 - tau[j]) ** e
        return out if n > 1 else 1.0

    quiet = 1.0
    for j in range(M):
        quiet *= (1 - tau[j]) ** n_i[j]
    P_t = 1 - (1 - tau_ap) * quiet
    lone = [n_i[i] * tau[i] * pi(i) for i in range(M)]
    hd = tau_ap * quiet + (1 - tau_ap) * sum(lone)
    fdp = 0.0
    if fd:
        hd += tau_ap * sum((n - h_i[i] - 1) / n * lone[i] for i in range(M))
        fdp = tau_ap * sum((h_i[i] + 1) / n * lone[i] for i in range(M))
    return (hd + fdp) / P_t, hd / P_t, fdp / P_t, P_t


def oracle_S(P_t, P_s, L, sigma, T_s, T_c):
    return P_t * P_s * L / ((1 - P_t) * sigma + P_t * P_s * T_s + P_t * (1 - P_s) * T_c)


# ---------------------------------------------------------------- durations

def test_frame_durations_table_values():
    d = frame_durations(TABLE)
    assert d.t_rts == pytest.approx((44 + 160 / 6) * US, rel=1e-12)
    assert d.t_rts / US == pytest.approx(70.667, abs=1e-3)
    assert d.t_cts == pytest.approx((44 + 112 / 6) * US, rel=1e-12)
    assert d.t_ack == pytest.approx((44 + 112 / 6) * US, rel=1e-12)
    assert d.t_data == pytest.approx((44 + 91632 / 780) * US, rel=1e-12)
    assert d.t_data / US == pytest.approx(161.477, abs=1e-3)
    assert d.rho == 8
    assert d.T_s == pytest.approx(34 * US + d.t_rts + d.t_cts + d.t_data + d.t_ack + 48 * US + 4 * US, rel=1e-12)
    assert d.T_c == pytest.approx(34 * US + d.t_rts + 1 * US, rel=1e-12)
    assert d.T_s > d.T_c > TABLE.sigma


def test_rho_sources():
    assert frame_durations(TABLE, "delay").rho == 71
    assert backoff_params(TABLE).rho == 8
    assert backoff_params(TABLE, rho=3).rho == 3
    with pytest.raises(ValueError):
        frame_durations(TABLE, "bogus")


def test_rho_exact_at_integer_boundary():
    # 44 us + 8*27 bytes / 6 Mb/s = 80 us: exactly 8 whole delays of 10 us
    p = dataclasses.replace(TABLE, rts_len=27, delta=10e-6)
    assert frame_durations(p, "delay").rho == 8


def test_infinite_control_rate_limit():
    d = frame_durations(dataclasses.replace(TABLE, control_rate=math.inf))
    assert d.t_rts == TABLE.phy_header
    assert d.rho == 5


def test_macphy_validation():
    with pytest.raises(ValueError):
        MacPhyParams(sifs=40e-6)
    with pytest.raises(ValueError):
        MacPhyParams(sigma=0)
    with pytest.raises(ValueError):
        MacPhyParams(mpdu_len=30)


def test_payload_bits():
    assert payload_bits(TABLE) == 8 * 11414
    assert payload_bits(TABLE, "mpdu") == 8 * 11454
    with pytest.raises(ValueError):
        payload_bits(TABLE, "x")


# ---------------------------------------------------------------- P_t, P_s

def test_p_transmit_examples():
    lay = annulus_layout(GeometryConfig(1, 5, 10))
    assert p_transmit(fixed(0.0, np.zeros(5)), lay) == 0.0
    assert p_transmit(fixed(1.0, np.full(5, 0.3)), lay) == 1.0
    lay = annulus_layout(GeometryConfig(1, 1, 1))
    assert p_transmit(fixed(2 / 17, 2 / 17), lay) == pytest.approx(1 - (15 / 17) ** 2, abs=1e-15)
    assert p_transmit(fixed(2 / 17, 2 / 17), lay) == pytest.approx(0.2215, abs=1e-4)


def test_p_success_single_station_fd_is_one():
    cfg = GeometryConfig(1, 3, 1)
    sol = solve(cfg, backoff_params(TABLE), "FD")
    P_s, hd, fd = p_success(sol, annulus_layout(cfg), hidden_counts(cfg))
    assert P_s == pytest.approx(1.0, abs=1e-12)


def test_p_success_lone_ap_is_one():
    cfg = GeometryConfig(1, 4, 8)
    for regime in ("FD", "HD"):
        P_s, _, _ = p_success(fixed(0.2, np.zeros(4), regime), annulus_layout(cfg), hidden_counts(cfg))
        assert P_s == pytest.approx(1.0, abs=1e-15)


def test_p_success_undefined_when_silent():
    cfg = GeometryConfig(1, 2, 4)
    with pytest.raises(UndefinedConditionalError):
        p_success(fixed(0.0, np.zeros(2)), annulus_layout(cfg), hidden_counts(cfg))


def test_all_hidden_removes_third_term():
    cfg = GeometryConfig(1, 2, 4)
    lay = annulus_layout(cfg)
    all_hidden = HiddenCounts(h=np.full(2, 3.0), h_cond=np.zeros((2, 2)), p_h=np.zeros(2),
                              p_cond=np.zeros((2, 2)), normalization="manual")
    tau = np.array([0.05, 0.03])
    _, hd, _ = p_success(fixed(0.1, tau), lay, all_hidden)
    _, hd_plain, _ = p_success(fixed(0.1, tau, "HD"), lay, all_hidden)
    assert hd == pytest.approx(hd_plain, abs=1e-15)


@pytest.mark.parametrize("n,M", [(2, 1), (10, 5), (50, 5), (7, 3)])
@pytest.mark.parametrize("regime", ["FD", "HD"])
def test_p_success_matches_transcription(n, M, regime):
    cfg = GeometryConfig(1, M, n)
    lay, hid = annulus_layout(cfg), hidden_counts(cfg)
    sol = solve(cfg, backoff_params(TABLE), regime)
    P_s, hd, fd = p_success(sol, lay, hid)
    o = oracle_ps(sol.tau_ap, list(sol.tau_sta), list(lay.node_counts), list(hid.h), n, regime == "FD")
    assert P_s == pytest.approx(o[0], abs=1e-12)
    assert hd == pytest.approx(o[1], abs=1e-12)
    assert fd == pytest.approx(o[2], abs=1e-12)
    assert 0 <= hd and 0 <= fd and hd + fd <= 1 + 1e-12
    if regime == "HD":
        assert fd == 0.0


# ---------------------------------------------------------------- S

def test_saturation_throughput_examples():
    d = frame_durations(TABLE)
    assert saturation_throughput(0.0, 1.0, d, TABLE) == 0.0
    L = payload_bits(TABLE)
    assert saturation_throughput(1.0, 1.0, d, TABLE) == pytest.approx(L / d.T_s, rel=1e-12)
    assert saturation_throughput(0.3, 0.8, d, TABLE) == pytest.approx(
        oracle_S(0.3, 0.8, L, TABLE.sigma, d.T_s, d.T_c), rel=1e-12)


def test_doubling_L_doubles_S():
    d = frame_durations(TABLE)
    L = payload_bits(TABLE)
    a = saturation_throughput(0.4, 0.7, d, TABLE, L=L)
    assert saturation_throughput(0.4, 0.7, d, TABLE, L=2 * L) == pytest.approx(2 * a, rel=1e-15)


def test_single_station_gain_closed_form():
    # FD: both nodes at 2/17 and every busy slot succeeds.
    # HD: classic two-node model, a busy slot succeeds when exactly one node starts.
    d = frame_durations(TABLE)
    L = payload_bits(TABLE)
    t = 2 / 17
    P_t = 1 - (1 - t) ** 2
    S_fd = oracle_S(P_t, 1.0, L, TABLE.sigma, d.T_s, d.T_c)
    tau, _ = bianchi_fixed_point(2, backoff_params(TABLE))
    P_t = 1 - (1 - tau) ** 2
    S_hd = oracle_S(P_t, 2 * tau * (1 - tau) / P_t, L, TABLE.sigma, d.T_s, d.T_c)
    fd, hd, gain = compare_regimes(GeometryConfig(1, 5, 1))
    assert fd.S == pytest.approx(S_fd, rel=1e-12)
    assert hd.S == pytest.approx(S_hd, rel=1e-8)
    assert gain == pytest.approx(S_fd / S_hd, rel=1e-8)
    assert gain == pytest.approx(1.02746, abs=1e-5)


def test_report_fields_consistent():
    rep = analyze(GeometryConfig(1, 5, 20))
    assert rep.regime is Regime.FD
    assert rep.P_s == pytest.approx(rep.P_s_hd_part + rep.P_s_fd_part, abs=1e-15)
    assert 0 <= rep.P_t <= 1 and 0 <= rep.P_s <= 1 and rep.S > 0


@pytest.mark.parametrize("n", [2, 5, 10, 50, 200])
def test_fd_beats_hd(n):
    fd, hd, gain = compare_regimes(GeometryConfig(1, 5, n))
    assert fd.S >= hd.S and 1 <= gain <= 2
    assert fd.gain == hd.gain == gain


def test_gain_non_increasing_in_n():
    gains = [compare_regimes(GeometryConfig(1, 5, n))[2] for n in range(5, 101, 5)]
    assert np.all(np.diff(gains) <= 0)


def test_analysis_options_validation():
    with pytest.raises(ValueError):
        AnalysisOptions(payload_mode="x")
    with pytest.raises(ValueError):
        AnalysisOptions(rho_source="x")
    with pytest.raises(ValueError):
        AnalysisOptions(h_normalization="x")
    with pytest.raises(ValueError):
        AnalysisOptions(ap_weighting="x")


def test_rho_override_changes_solution():
    base = analyze(GeometryConfig(1, 5, 20))
    other = analyze(GeometryConfig(1, 5, 20), options=AnalysisOptions(rho=1))
    assert other.S != base.S
    assert BackoffParams(rho=1).vulnerable_slots == 1
