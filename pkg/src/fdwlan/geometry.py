"""Circle-intersection and annulus geometry for hidden-terminal analysis.

Every station shares one transmission radius ``r`` and the AP sits at the
origin.  Two stations are hidden from each other when their separation
exceeds ``r``.  The AP coverage disk is cut into ``M`` concentric annuli of
equal width; stations of annulus ``i`` are represented by the mid-width
distance ``d_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryError",
    "GeometryConfig",
    "AnnulusLayout",
    "HiddenCounts",
    "lens_area",
    "hidden_area",
    "hidden_prob",
    "annulus_layout",
    "uncovered_area",
    "annulus_hidden_area",
    "cond_hidden_prob",
    "cond_hidden_matrix",
    "hidden_counts",
]

H_NORMALIZATIONS = ("literal", "rescaled")


class GeometryError(ValueError):
    """Raised for lengths or indices outside the geometric domain."""


@dataclass(frozen=True)
class GeometryConfig:
    """Transmission radius ``r``, annulus count ``M`` and station count ``n``.

    The AP is not counted in ``n``.
    """

    r: float = 1.0
    M: int = 5
    n: int = 10

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise GeometryError(f"transmission radius must be positive, got {self.r!r}")
        if int(self.M) != self.M or self.M < 1:
            raise GeometryError(f"annulus count must be a positive integer, got {self.M!r}")
        if int(self.n) != self.n or self.n < 1:
            raise GeometryError(f"station count must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class AnnulusLayout:
    """Annulus boundaries, representative distances and expected node counts.

    Attributes
    ----------
    radii : numpy.ndarray
        ``M + 1`` boundary radii, ``radii[0] == 0`` and ``radii[M] == r``.
    distances : numpy.ndarray
        ``M`` mid-width distances from the AP.
    node_counts : numpy.ndarray
        ``M`` expected (fractional) station counts, summing to ``n``.
    """

    r: float
    n: int
    radii: np.ndarray
    distances: np.ndarray
    node_counts: np.ndarray

    @property
    def M(self) -> int:
        return len(self.distances)


@dataclass(frozen=True)
class HiddenCounts:
    """Expected hidden-station counts seen from each annulus.

    Attributes
    ----------
    h : numpy.ndarray
        ``h[i]``: expected number of stations hidden from a station of
        annulus ``i`` (over the whole BSS).
    h_cond : numpy.ndarray
        ``h_cond[i, j]``: expected number of stations of annulus ``j`` hidden
        from a station of annulus ``i``.
    p_h : numpy.ndarray
        Hidden probability evaluated at each representative distance.
    p_cond : numpy.ndarray
        ``p_cond[i, j]``: probability that a point uniform in annulus ``j`` is
        hidden from a station of annulus ``i``.
    normalization : str
        ``"literal"`` or ``"rescaled"``, see :func:`hidden_counts`.
    """

    h: np.ndarray
    h_cond: np.ndarray
    p_h: np.ndarray
    p_cond: np.ndarray
    normalization: str = "literal"


def _check_nonneg(name, value):
    if not value >= 0 or not math.isfinite(value):
        raise GeometryError(f"{name} must be finite and non-negative, got {value!r}")


def _acos(x):
    return math.acos(min(1.0, max(-1.0, x)))


def lens_area(r_a: float, r_b: float, d: float) -> float:
    """Area of the intersection of two disks.

    Parameters
    ----------
    r_a, r_b : float
        Disk radii, ``>= 0``.  A zero radius gives zero area.
    d : float
        Distance between the centres.

    Returns
    -------
    float
        ``pi * min(r_a, r_b)**2`` when one disk contains the other, ``0`` for
        disjoint or tangent disks, the two-segment lens area otherwise.
    """
    _check_nonneg("r_a", r_a)
    _check_nonneg("r_b", r_b)
    _check_nonneg("d", d)
    if r_a == 0 or r_b == 0:
        return 0.0
    if d >= r_a + r_b:
        return 0.0
    if d <= abs(r_a - r_b):
        return math.pi * min(r_a, r_b) ** 2
    # radius difference first: avoids cancellation when d is tiny
    diff = (r_a - r_b) * (r_a + r_b)
    seg_a = r_a * r_a * _acos((d * d + diff) / (2.0 * d * r_a))
    seg_b = r_b * r_b * _acos((d * d - diff) / (2.0 * d * r_b))
    kite = (-d + r_a + r_b) * (d + r_a - r_b) * (d - r_a + r_b) * (d + r_a + r_b)
    area = seg_a + seg_b - 0.5 * math.sqrt(max(kite, 0.0))
    # the kite term is ill-conditioned near tangency
    return min(max(area, 0.0), math.pi * min(r_a, r_b) ** 2)


def _check_in_bss(r, d):
    if not (r > 0 and math.isfinite(r)):
        raise GeometryError(f"transmission radius must be positive, got {r!r}")
    _check_nonneg("d", d)
    if d > r:
        raise GeometryError(f"distance {d!r} exceeds the transmission radius {r!r}; "
                            "the station cannot belong to the BSS")


def hidden_area(r: float, d: float) -> float:
    """Area of the crescent covered by the AP but not by a station at distance ``d``."""
    _check_in_bss(r, d)
    return (math.pi * r * r
            - 2.0 * r * r * _acos(d / (2.0 * r))
            + 0.5 * d * math.sqrt(max(4.0 * r * r - d * d, 0.0)))


def hidden_prob(r: float, d: float) -> float:
    """Probability that a station uniform in the AP disk is hidden from one at distance ``d``."""
    return hidden_area(r, d) / (math.pi * r * r)


def annulus_layout(cfg: GeometryConfig) -> AnnulusLayout:
    M, n, r = cfg.M, cfg.n, cfg.r
    i = np.arange(1, M + 1, dtype=float)
    radii = np.arange(M + 1, dtype=float) * r / M
    distances = (2.0 * i - 1.0) * r / (2.0 * M)
    node_counts = n * (2.0 * i - 1.0) / (M * M)
    return AnnulusLayout(r=r, n=n, radii=radii, distances=distances, node_counts=node_counts)


def uncovered_area(r: float, r_j: float, d: float) -> float:
    """Part of the origin-centred ``r_j`` disk outside the ``r`` disk centred at distance ``d``.

    Zero when the ``r_j`` disk is fully covered.
    """
    return max(math.pi * r_j * r_j - lens_area(r, r_j, d), 0.0)


def annulus_hidden_area(r: float, r_outer: float, r_inner: float, d: float) -> float:
    """Part of the annulus ``[r_inner, r_outer]`` that is hidden from a station at distance ``d``."""
    return max(uncovered_area(r, r_outer, d) - uncovered_area(r, r_inner, d), 0.0)


def _check_index(cfg, k, name):
    if int(k) != k or not 1 <= k <= cfg.M:
        raise GeometryError(f"annulus index {name}={k!r} outside 1..{cfg.M}")


def cond_hidden_prob(cfg: GeometryConfig, i: int, j: int) -> float:
    """Probability that a point uniform in annulus ``j`` is hidden from a station of annulus ``i``.

    Indices are 1-based.
    """
    _check_index(cfg, i, "i")
    _check_index(cfg, j, "j")
    r, M = cfg.r, cfg.M
    d_i = (2 * i - 1) * r / (2 * M)
    r_out, r_in = j * r / M, (j - 1) * r / M
    z = annulus_hidden_area(r, r_out, r_in, d_i)
    return min(z / (math.pi * (r_out * r_out - r_in * r_in)), 1.0)


def cond_hidden_matrix(cfg: GeometryConfig) -> np.ndarray:
    """``M x M`` matrix of :func:`cond_hidden_prob`, row = observer annulus."""
    M = cfg.M
    out = np.empty((M, M))
    for i in range(1, M + 1):
        for j in range(1, M + 1):
            out[i - 1, j - 1] = cond_hidden_prob(cfg, i, j)
    return out


def hidden_counts(cfg: GeometryConfig, normalization: str = "literal") -> HiddenCounts:
    """Expected hidden counts per annulus.

    ``h[i] = (n - 1) * p_h(d_i)`` and ``h_cond[i, j] = n_j * p_cond[i, j]``.
    Because the annuli tile the crescent, the literal ``h_cond`` rows sum to
    ``n * p_h(d_i)`` rather than ``h[i]``.  ``normalization="rescaled"``
    multiplies ``h_cond`` by ``(n - 1) / n`` so the rows sum to ``h`` exactly.
    """
    if normalization not in H_NORMALIZATIONS:
        raise GeometryError(f"unknown h normalization {normalization!r}")
    layout = annulus_layout(cfg)
    p_h = np.array([hidden_prob(cfg.r, d) for d in layout.distances])
    p_cond = cond_hidden_matrix(cfg)
    h = (cfg.n - 1) * p_h
    h_cond = layout.node_counts[None, :] * p_cond
    if normalization == "rescaled":
        h_cond = h_cond * (cfg.n - 1) / cfg.n
    return HiddenCounts(h=h, h_cond=h_cond, p_h=p_h, p_cond=p_cond, normalization=normalization)
