"""Fixed-point model of saturated DCF in an FD-capable BSS with hidden terminals.

Unknowns are the AP's transmission and conditional collision probabilities
and one pair per annulus, ``2M + 2`` in total.  The transmission probability
of every node follows the binary-exponential-backoff Markov chain; collision
probabilities account for simultaneous starts, hidden stations inside the
RTS vulnerable window and, in the FD regime, the AP + single STA successes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    H_NORMALIZATIONS,
    AnnulusLayout,
    GeometryConfig,
    HiddenCounts,
    annulus_layout,
    hidden_counts,
)

__all__ = [
    "Regime",
    "BackoffParams",
    "ModelOptions",
    "FixedPointSolution",
    "SolverError",
    "tau_of_p",
    "pi_exponents",
    "pi_factor",
    "pi_factors",
    "vulnerable_factors",
    "p_sta_fd",
    "p_ap_fd",
    "p_sta_hd",
    "p_ap_hd",
    "System",
    "build_system",
    "solve",
    "bianchi_fixed_point",
]

AP_WEIGHTINGS = ("literal", "per-station")


class Regime(str, enum.Enum):
    FD = "FD"
    HD = "HD"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown regime {value!r}; expected FD or HD") from None


@dataclass(frozen=True)
class BackoffParams:
    """Minimum window ``W``, maximum backoff stage ``m`` and RTS length ``rho`` in slots."""

    W: int = 16
    m: int = 6
    rho: int = 8

    def __post_init__(self):
        if int(self.W) != self.W or self.W < 1:
            raise ValueError(f"W must be a positive integer, got {self.W!r}")
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"m must be a non-negative integer, got {self.m!r}")
        if int(self.rho) != self.rho or self.rho < 1:
            raise ValueError(f"rho must be a positive integer, got {self.rho!r}")

    @property
    def vulnerable_slots(self) -> int:
        return 2 * self.rho - 1


@dataclass(frozen=True)
class ModelOptions:
    """Interpretation switches for the ambiguous parts of the model.

    h_normalization
        ``"literal"`` uses ``h_{i|j} = n_j p_{h(i|j)}``; ``"rescaled"``
        scales it by ``(n-1)/n`` so that rows sum to ``h_i``.
    ap_weighting
        ``"literal"`` weights the AP's FD success sum by ``(h_i+1)/n`` per
        annulus; ``"per-station"`` additionally multiplies by ``n_i`` (a sum
        over stations rather than annuli, consistent with the throughput
        expressions).
    """

    h_normalization: str = "literal"
    ap_weighting: str = "literal"

    def __post_init__(self):
        if self.h_normalization not in H_NORMALIZATIONS:
            raise ValueError(f"unknown h normalization {self.h_normalization!r}")
        if self.ap_weighting not in AP_WEIGHTINGS:
            raise ValueError(f"unknown AP weighting {self.ap_weighting!r}")


@dataclass
class FixedPointSolution:
    tau_ap: float
    tau_sta: np.ndarray
    p_ap: float
    p_sta: np.ndarray
    iterations: int
    residual: float
    regime: Regime

    @property
    def M(self) -> int:
        return len(self.tau_sta)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.tau_ap], self.tau_sta, [self.p_ap], self.p_sta])


class SolverError(RuntimeError):
    """Fixed-point iteration did not converge; carries the last iterate."""

    def __init__(self, message, last: FixedPointSolution):
        super().__init__(message)
        self.last = last
        self.residual = last.residual


def tau_of_p(p, bp: BackoffParams):
    """Per-slot transmission probability of a backlogged node with collision probability ``p``.

    Uses ``2 / (W + 1 + p W sum_{k<m} (2p)^k)``, which equals the usual
    ratio form and stays finite at ``p = 1/2``.  Accepts scalars or arrays.
    """
    p = np.asarray(p, dtype=float)
    geom = np.zeros_like(p)
    term = np.ones_like(p)
    for _ in range(bp.m):
        geom = geom + term
        term = term * (2.0 * p)
    out = 2.0 / (bp.W + 1.0 + p * bp.W * geom)
    return float(out) if out.ndim == 0 else out


def pi_exponents(layout: AnnulusLayout) -> np.ndarray:
    """Exponent matrix ``E`` with ``pi(i) = prod_j (1 - tau_sta(j)) ** E[i, j]``.

    ``E[i, j] = n_j`` off the diagonal and ``max(n_i - 1, 0)`` on it.  With a
    single station there is nobody else to contend with and ``E`` is zero.
    """
    M = layout.M
    if layout.n == 1:
        return np.zeros((M, M))
    E = np.tile(layout.node_counts, (M, 1))
    np.fill_diagonal(E, np.maximum(layout.node_counts - 1.0, 0.0))
    return E


def _log1m(tau):
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log1p(-tau)


def _prod_pow(base_log, exponents):
    # prod_j (1-tau_j)^e_ij with 0^0 = 1
    with np.errstate(invalid="ignore"):
        terms = np.where(exponents == 0, 0.0, exponents * base_log)
    return np.exp(terms.sum(axis=-1))


def pi_factors(tau_sta, layout: AnnulusLayout) -> np.ndarray:
    """``pi(i)`` for all annuli: probability that no other STA starts in the same slot."""
    return _prod_pow(_log1m(tau_sta)[None, :], pi_exponents(layout))


def pi_factor(i: int, tau_sta, layout: AnnulusLayout) -> float:
    """``pi(i)`` for the 1-based annulus ``i``."""
    if int(i) != i or not 1 <= i <= layout.M:
        raise IndexError(f"annulus index {i!r} outside 1..{layout.M}")
    return float(pi_factors(tau_sta, layout)[i - 1])


def _hidden_exponents(layout, hidden, bp):
    if layout.n == 1:
        return np.zeros((layout.M, layout.M))
    return hidden.h_cond * bp.vulnerable_slots


def vulnerable_factors(tau_sta, layout, hidden: HiddenCounts, bp: BackoffParams) -> np.ndarray:
    """Probability that no hidden station starts inside the RTS vulnerable window, per annulus."""
    return _prod_pow(_log1m(tau_sta)[None, :], _hidden_exponents(layout, hidden, bp))


def _ap_weights(layout, hidden, options):
    if layout.n == 1:
        # the lone STA is the only possible FD partner; it sits in annulus i w.p. n_i
        return layout.node_counts.copy()
    w = (hidden.h + 1.0) / layout.n
    if options.ap_weighting == "per-station":
        w = w * layout.node_counts
    return w


def _clip01(x):
    return np.minimum(np.maximum(x, 0.0), 1.0)


def p_sta_fd(tau_ap, tau_sta, layout, hidden, bp, i=None):
    """Conditional collision probability of annulus-``i`` stations in the FD regime.

    ``1 - pi(i) * [(1 - tau_ap) * beta(i) + tau_ap]``.  Returns the full vector
    when ``i`` is None, otherwise the 1-based entry.
    """
    pi = pi_factors(tau_sta, layout)
    beta = vulnerable_factors(tau_sta, layout, hidden, bp)
    p = _clip01(1.0 - pi * ((1.0 - tau_ap) * beta + tau_ap))
    return p if i is None else float(p[i - 1])


def p_sta_hd(tau_ap, tau_sta, layout, hidden, bp, i=None):
    pi = pi_factors(tau_sta, layout)
    beta = vulnerable_factors(tau_sta, layout, hidden, bp)
    p = _clip01(1.0 - (1.0 - tau_ap) * pi * beta)
    return p if i is None else float(p[i - 1])


def _all_quiet(tau_sta, layout):
    return float(_prod_pow(_log1m(tau_sta), layout.node_counts))


def p_ap_fd(tau_sta, layout, hidden, tau_ap=None, options=ModelOptions()):
    """AP conditional collision probability in the FD regime.

    The AP succeeds when no STA starts with it, or when exactly one STA does
    and the AP's destination is that STA or a station hidden from it.
    ``tau_ap`` does not enter the expression and is accepted for symmetry.
    """
    alpha = _all_quiet(tau_sta, layout)
    pi = pi_factors(tau_sta, layout)
    beta = float(np.sum(_ap_weights(layout, hidden, options) * np.asarray(tau_sta) * pi))
    return float(_clip01(1.0 - (alpha + beta)))


def p_ap_hd(tau_sta, layout, hidden=None, tau_ap=None, options=None):
    return float(_clip01(1.0 - _all_quiet(tau_sta, layout)))


@dataclass
class System:
    """Precomputed coefficients of the fixed-point map for one configuration."""

    cfg: GeometryConfig
    bp: BackoffParams
    regime: Regime
    layout: AnnulusLayout
    hidden: HiddenCounts
    options: ModelOptions = field(default_factory=ModelOptions)

    def __post_init__(self):
        self._log_e = pi_exponents(self.layout)
        self._hid_e = _hidden_exponents(self.layout, self.hidden, self.bp)
        self._ap_w = _ap_weights(self.layout, self.hidden, self.options)
        self._fd = self.regime is Regime.FD

    @property
    def size(self) -> int:
        return 2 * self.layout.M + 2

    def collision_probs(self, tau_ap, tau_sta):
        """``(p_ap, p_sta)`` implied by the given transmission probabilities."""
        lq = _log1m(tau_sta)
        pi = _prod_pow(lq[None, :], self._log_e)
        beta = _prod_pow(lq[None, :], self._hid_e)
        alpha_ap = float(_prod_pow(lq, self.layout.node_counts))
        if self._fd:
            p_sta = 1.0 - pi * ((1.0 - tau_ap) * beta + tau_ap)
            p_ap = 1.0 - (alpha_ap + float(np.sum(self._ap_w * tau_sta * pi)))
        else:
            p_sta = 1.0 - (1.0 - tau_ap) * pi * beta
            p_ap = 1.0 - alpha_ap
        return float(_clip01(p_ap)), _clip01(p_sta)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """One evaluation of the fixed-point map on ``[tau_ap, tau_sta, p_ap, p_sta]``."""
        M = self.layout.M
        tau_ap, tau_sta = x[0], x[1:M + 1]
        p_ap, p_sta = x[M + 1], x[M + 2:]
        new_p_ap, new_p_sta = self.collision_probs(tau_ap, tau_sta)
        out = np.empty_like(x)
        out[0] = tau_of_p(p_ap, self.bp)
        out[1:M + 1] = tau_of_p(p_sta, self.bp)
        out[M + 1] = new_p_ap
        out[M + 2:] = new_p_sta
        return out

    def residual(self, sol: FixedPointSolution) -> float:
        x = sol.as_vector()
        return float(np.max(np.abs(self.apply(x) - x)))


def build_system(cfg, bp, regime=Regime.FD, options=None, hidden=None) -> System:
    options = options or ModelOptions()
    layout = annulus_layout(cfg)
    if hidden is None:
        hidden = hidden_counts(cfg, options.h_normalization)
    return System(cfg=cfg, bp=bp, regime=Regime.parse(regime), layout=layout,
                  hidden=hidden, options=options)


def solve(cfg: GeometryConfig, bp: BackoffParams, regime=Regime.FD, options=None, *,
          hidden=None, damping=0.5, tol=1e-10, max_iter=100_000) -> FixedPointSolution:
    """Solve the ``2M + 2`` equation system by damped fixed-point iteration.

    Parameters
    ----------
    cfg, bp : GeometryConfig, BackoffParams
    regime : Regime or str
        ``"FD"`` or ``"HD"``.
    options : ModelOptions, optional
    hidden : HiddenCounts, optional
        Replaces the geometric hidden counts, e.g. with counts measured on a
        concrete topology.
    damping : float
        Weight of the new map value in ``x <- (1 - damping) x + damping F(x)``.
    tol : float
        Convergence threshold on ``max |F(x) - x|``.

    Raises
    ------
    SolverError
        If ``max_iter`` iterations pass without meeting ``tol``.
    """
    system = build_system(cfg, bp, regime, options, hidden)
    return solve_system(system, damping=damping, tol=tol, max_iter=max_iter)


def solve_system(system: System, damping=0.5, tol=1e-10, max_iter=100_000) -> FixedPointSolution:
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    M = system.layout.M
    x = np.zeros(system.size)
    x[:M + 1] = 2.0 / (system.bp.W + 1.0)
    residual = math.inf
    for it in range(1, max_iter + 1):
        fx = system.apply(x)
        residual = float(np.max(np.abs(fx - x)))
        if residual <= tol:
            return _unpack(x, M, it, residual, system.regime)
        x = (1.0 - damping) * x + damping * fx
    last = _unpack(x, M, max_iter, residual, system.regime)
    raise SolverError(f"no convergence after {max_iter} iterations "
                      f"(residual {residual:.3e})", last)


def _unpack(x, M, iterations, residual, regime):
    return FixedPointSolution(
        tau_ap=float(x[0]),
        tau_sta=x[1:M + 1].copy(),
        p_ap=float(x[M + 1]),
        p_sta=x[M + 2:].copy(),
        iterations=iterations,
        residual=residual,
        regime=regime,
    )


def bianchi_fixed_point(N: int, bp: BackoffParams) -> tuple[float, float]:
    """Classic homogeneous fixed point ``p = 1 - (1 - tau)^(N-1)`` for ``N`` nodes.

    Solved as a scalar root problem with Brent's method; used as a reference
    for the degenerate single-annulus, hidden-free, HD configuration.
    """
    from scipy.optimize import brentq

    if N <= 1:
        return tau_of_p(0.0, bp), 0.0

    def g(p):
        return p - (1.0 - (1.0 - tau_of_p(p, bp)) ** (N - 1))

    p = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return tau_of_p(p, bp), p
