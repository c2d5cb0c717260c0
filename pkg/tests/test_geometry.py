import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdwlan.geometry import (
    GeometryConfig,
    GeometryError,
    annulus_hidden_area,
    annulus_layout,
    cond_hidden_matrix,
    cond_hidden_prob,
    hidden_area,
    hidden_counts,
    hidden_prob,
    lens_area,
    uncovered_area,
)

P_H_MAX = (math.pi / 3 + math.sqrt(3) / 2) / math.pi


# ---------------------------------------------------------------- oracles

def mc_lens(r_a, r_b, d, n=2_000_000, seed=1):
    """Fraction of a bounding box inside both disks, times the box area."""
    rng = np.random.default_rng(seed)
    lo_x, hi_x = -r_a, r_a
    lo_y, hi_y = -r_a, r_a
    x = rng.uniform(lo_x, hi_x, n)
    y = rng.uniform(lo_y, hi_y, n)
    inside = (x * x + y * y <= r_a * r_a) & ((x - d) ** 2 + y * y <= r_b * r_b)
    box = (hi_x - lo_x) * (hi_y - lo_y)
    frac = inside.mean()
    return box * frac, box * math.sqrt(frac * (1 - frac) / n)


def mc_cond_hidden(r, r_in, r_out, d, n=1_000_000, seed=2):
    """Area-uniform points in an annulus; fraction farther than ``r`` from (d, 0)."""
    rng = np.random.default_rng(seed)
    rad = np.sqrt(rng.uniform(r_in ** 2, r_out ** 2, n))
    ang = rng.uniform(0, 2 * np.pi, n)
    far = (rad * np.cos(ang) - d) ** 2 + (rad * np.sin(ang)) ** 2 > r * r
    p = far.mean()
    return p, math.sqrt(max(p * (1 - p), 1e-12) / n)


# ---------------------------------------------------------------- lens_area

def test_lens_trivial_branches():
    assert lens_area(1, 1, 2) == 0.0
    assert lens_area(1, 1, 3) == 0.0
    assert lens_area(1, 1, 0) == pytest.approx(math.pi, abs=1e-15)
    assert lens_area(2, 0.5, 1.0) == pytest.approx(math.pi * 0.25, abs=1e-15)
    assert lens_area(0.5, 2, 1.5) == pytest.approx(math.pi * 0.25, abs=1e-15)


def test_lens_unit_disks_closed_form():
    assert lens_area(1, 1, 1) == pytest.approx(2 * math.acos(0.5) - math.sqrt(3) / 2, abs=1e-12)
    assert lens_area(1, 1, 1) == pytest.approx(1.228370, abs=1e-6)


@pytest.mark.parametrize("r_a,r_b,d", [(1, 1, 1), (1, 0.6, 0.9), (1, 0.3, 1.1), (1, 1.4, 0.8)])
def test_lens_matches_monte_carlo(r_a, r_b, d):
    est, se = mc_lens(r_a, r_b, d)
    assert abs(lens_area(r_a, r_b, d) - est) <= max(4 * se, 1e-3)


def test_lens_symmetric_in_radii():
    for r_a, r_b, d in [(1, 0.4, 0.9), (2, 1.5, 1.0), (0.3, 0.7, 0.5)]:
        assert lens_area(r_a, r_b, d) == pytest.approx(lens_area(r_b, r_a, d), rel=1e-12)


def test_lens_continuous_at_branch_boundaries():
    eps = 1e-9
    assert lens_area(1, 0.5, 0.5 + eps) == pytest.approx(math.pi * 0.25, abs=1e-6)
    assert lens_area(1, 0.5, 1.5 - eps) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("args", [(-1, 1, 0.5), (1, -1, 0.5), (1, 1, -0.1), (1, 1, float("nan"))])
def test_lens_domain_errors(args):
    with pytest.raises(GeometryError):
        lens_area(*args)


# ---------------------------------------------------------------- hidden area / prob

def test_hidden_area_examples():
    assert hidden_area(1, 0) == pytest.approx(0.0, abs=1e-15)
    assert hidden_area(1, 1) == pytest.approx(math.pi / 3 + math.sqrt(3) / 2, abs=1e-12)
    assert hidden_area(1, 1) == pytest.approx(1.913222, abs=1e-6)
    assert hidden_area(1, 0.5) == pytest.approx(math.pi - lens_area(1, 1, 0.5), abs=1e-12)


def test_hidden_area_rejects_outside_bss():
    with pytest.raises(GeometryError):
        hidden_area(1, 1.0001)
    with pytest.raises(GeometryError):
        hidden_prob(1, 2)
    with pytest.raises(GeometryError):
        hidden_prob(0, 0)


def test_hidden_prob_examples():
    assert hidden_prob(1, 1) == pytest.approx(P_H_MAX, abs=1e-12)
    assert hidden_prob(1, 1) == pytest.approx(0.609, abs=5e-4)
    assert hidden_prob(1, 0) == 0.0
    assert hidden_prob(1, 0.9) == pytest.approx(0.5530, abs=5e-4)


def test_hidden_prob_0_9_monte_carlo():
    # points uniform over the AP disk, hidden if farther than r from (0.9, 0)
    p, se = mc_cond_hidden(1.0, 0.0, 1.0, 0.9, n=2_000_000, seed=7)
    assert abs(hidden_prob(1, 0.9) - p) <= 4 * se


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_complement_identity(x):
    assert hidden_area(1, x) + lens_area(1, 1, x) == pytest.approx(math.pi, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.0, 1.0))
def test_scale_invariance(k, x):
    assert hidden_prob(k, k * x) == pytest.approx(hidden_prob(1.0, x), abs=1e-12)


def test_hidden_prob_strictly_increasing():
    d = np.linspace(1e-4, 1.0, 2001)
    vals = np.array([hidden_prob(1, x) for x in d])
    assert np.all(np.diff(vals) > 0)
    assert vals.max() == pytest.approx(P_H_MAX, abs=1e-15)


# ---------------------------------------------------------------- layout

def test_layout_examples():
    lay = annulus_layout(GeometryConfig(1, 5, 10))
    np.testing.assert_allclose(lay.distances, [0.1, 0.3, 0.5, 0.7, 0.9], atol=1e-15)
    np.testing.assert_allclose(lay.node_counts, [0.4, 1.2, 2.0, 2.8, 3.6], atol=1e-14)
    np.testing.assert_allclose(lay.radii, [0, 0.2, 0.4, 0.6, 0.8, 1.0], atol=1e-15)
    lay = annulus_layout(GeometryConfig(1, 1, 7))
    np.testing.assert_allclose(lay.distances, [0.5])
    np.testing.assert_allclose(lay.node_counts, [7])
    lay = annulus_layout(GeometryConfig(2, 2, 4))
    np.testing.assert_allclose(lay.distances, [0.5, 1.5])
    np.testing.assert_allclose(lay.node_counts, [1, 3])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 200), st.integers(1, 1000), st.floats(0.1, 100))
def test_layout_invariants(M, n, r):
    lay = annulus_layout(GeometryConfig(r, M, n))
    assert lay.M == M
    assert abs(lay.node_counts.sum() - n) <= 1e-12 * n * M
    assert lay.radii[0] == 0 and lay.radii[-1] == pytest.approx(r, rel=1e-15)
    assert np.all((lay.distances > 0) & (lay.distances < r))


@pytest.mark.parametrize("kw", [dict(r=0), dict(r=-1), dict(M=0), dict(n=0), dict(M=1.5)])
def test_config_validation(kw):
    with pytest.raises(GeometryError):
        GeometryConfig(**kw)


# ---------------------------------------------------------------- conditional hidden probability

def test_cond_covered_branch_is_zero():
    assert cond_hidden_prob(GeometryConfig(1, 5, 10), 1, 1) == 0.0


def test_cond_single_annulus_equals_hidden_prob():
    for r in (1.0, 3.0):
        assert cond_hidden_prob(GeometryConfig(r, 1, 3), 1, 1) == pytest.approx(hidden_prob(r, r / 2), abs=1e-12)


@pytest.mark.parametrize("j", [1, 2, 3, 4, 5])
def test_cond_monte_carlo_outer_annulus(j):
    cfg = GeometryConfig(1, 5, 10)
    p, se = mc_cond_hidden(1.0, (j - 1) / 5, j / 5, 0.9, seed=10 + j)
    assert abs(cond_hidden_prob(cfg, 5, j) - p) <= 3 * se + 1e-12


@pytest.mark.parametrize("M", [1, 2, 5, 13, 50])
def test_partition_identity(M):
    cfg = GeometryConfig(1, M, 10)
    lay = annulus_layout(cfg)
    P = cond_hidden_matrix(cfg)
    ring = np.pi * (lay.radii[1:] ** 2 - lay.radii[:-1] ** 2)
    for i in range(M):
        assert ring @ P[i] == pytest.approx(np.pi * hidden_prob(1, lay.distances[i]), abs=1e-9)


def test_component_areas_nonnegative_and_bounded():
    for r_j in np.linspace(0, 1, 11):
        for d in np.linspace(0, 1, 11):
            assert 0 <= uncovered_area(1, r_j, d) <= math.pi * r_j ** 2 + 1e-15
            assert 0 <= lens_area(1, r_j, d) <= math.pi * min(1, r_j) ** 2 + 1e-15
    for k in range(1, 6):
        assert annulus_hidden_area(1, k / 5, (k - 1) / 5, 0.9) >= 0


def test_cond_index_errors():
    cfg = GeometryConfig(1, 3, 5)
    for i, j in [(0, 1), (4, 1), (1, 0), (1, 4), (1.5, 1)]:
        with pytest.raises(GeometryError):
            cond_hidden_prob(cfg, i, j)


# ---------------------------------------------------------------- hidden counts

def test_hidden_counts_examples():
    hc = hidden_counts(GeometryConfig(1, 4, 1))
    assert np.all(hc.h == 0)
    hc = hidden_counts(GeometryConfig(1, 1, 11))
    assert hc.h[0] == pytest.approx(10 * hidden_prob(1, 0.5), abs=1e-12)
    hc = hidden_counts(GeometryConfig(1, 5, 20))
    assert np.all(np.diff(hc.h) > 0) and hc.h[4] > hc.h[0]


@pytest.mark.parametrize("n", [2, 10, 57])
def test_hidden_count_row_sums(n):
    cfg = GeometryConfig(1, 5, n)
    lit = hidden_counts(cfg, "literal")
    res = hidden_counts(cfg, "rescaled")
    np.testing.assert_allclose(lit.h_cond.sum(axis=1), n * lit.p_h, atol=1e-9)
    np.testing.assert_allclose(res.h_cond.sum(axis=1), res.h, atol=1e-9)
    assert np.all((lit.h_cond >= 0) & (lit.h_cond <= n))
    assert np.all((lit.p_cond >= 0) & (lit.p_cond <= 1))


def test_hidden_counts_rejects_unknown_normalization():
    with pytest.raises(GeometryError):
        hidden_counts(GeometryConfig(), "bogus")
