"""Station placement inside the AP disk and the induced hidden-pair matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import GeometryConfig, HiddenCounts, annulus_layout

TOPOLOGY_MODES = ("sampled", "annulus-pinned")

# separations within this relative margin of r count as in range
_RANGE_SLACK = 1e-12


@dataclass(frozen=True)
class Topology:
    """Station positions (AP at the origin) and who is hidden from whom.

    Attributes
    ----------
    positions : numpy.ndarray
        ``(n, 2)`` coordinates.
    hidden : numpy.ndarray
        ``(n, n)`` boolean, ``True`` where the separation exceeds ``r``.
    annulus : numpy.ndarray
        1-based annulus index of every station.
    """

    positions: np.ndarray
    hidden: np.ndarray
    annulus: np.ndarray

    @property
    def n(self) -> int:
        return len(self.positions)


def apportion(node_counts, n):
    """Round expected counts to integers summing to ``n`` (largest remainder, ties to lower index)."""
    node_counts = np.asarray(node_counts, dtype=float)
    base = np.floor(node_counts + 1e-9).astype(int)
    short = n - int(base.sum())
    remainders = node_counts - base
    order = sorted(range(len(node_counts)), key=lambda i: (-round(remainders[i], 12), i))
    for i in order[:short]:
        base[i] += 1
    return base


def hidden_matrix(positions, r):
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    hidden = dist > r * (1.0 + _RANGE_SLACK)
    np.fill_diagonal(hidden, False)
    return hidden


def annulus_of(positions, cfg: GeometryConfig):
    radius = np.sqrt((positions ** 2).sum(axis=-1))
    idx = np.ceil(radius * cfg.M / cfg.r - 1e-9).astype(int)
    return np.clip(idx, 1, cfg.M)


def sample_topology(cfg: GeometryConfig, seed=None, mode: str = "sampled") -> Topology:
    """Place ``n`` stations in the AP disk.

    ``"sampled"`` draws positions uniformly over the disk area.
    ``"annulus-pinned"`` puts the apportioned number of stations of each
    annulus exactly on its mid-width circle, at uniform random angles.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if mode not in TOPOLOGY_MODES:
        raise ValueError(f"unknown topology mode {mode!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = cfg.n
    if mode == "sampled":
        radius = cfg.r * np.sqrt(rng.random(n))
        angle = 2.0 * np.pi * rng.random(n)
        annulus = None
    else:
        layout = annulus_layout(cfg)
        counts = apportion(layout.node_counts, n)
        annulus = np.repeat(np.arange(1, cfg.M + 1), counts)
        radius = layout.distances[annulus - 1]
        angle = 2.0 * np.pi * rng.random(n)
    positions = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    if annulus is None:
        annulus = annulus_of(positions, cfg)
    return Topology(positions=positions, hidden=hidden_matrix(positions, cfg.r), annulus=annulus)


def realized_hidden_counts(topo: Topology, cfg: GeometryConfig) -> HiddenCounts:
    """Hidden counts measured on a concrete topology, averaged per annulus.

    Suitable as the ``hidden`` override of the analytical solver, so that a
    simulation and the model can be compared on the same hidden structure.
    Rows of empty annuli are zero.
    """
    M, n = cfg.M, cfg.n
    occupancy = np.bincount(topo.annulus - 1, minlength=M).astype(float)
    h_cond = np.zeros((M, M))
    for i in range(M):
        members = np.flatnonzero(topo.annulus == i + 1)
        if len(members) == 0:
            continue
        for j in range(M):
            peers = topo.annulus == j + 1
            h_cond[i, j] = topo.hidden[np.ix_(members, peers)].sum(axis=1).mean()
    h = h_cond.sum(axis=1)
    p_h = h / (n - 1) if n > 1 else np.zeros(M)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_cond = np.where(occupancy[None, :] > 0, h_cond / occupancy[None, :], 0.0)
    return HiddenCounts(h=h, h_cond=h_cond, p_h=p_h, p_cond=p_cond, normalization="realized")
