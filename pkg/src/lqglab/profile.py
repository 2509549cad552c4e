"""Boundary distance profiles and the dyadic variation measures built on them.

Three flavours of level-``n`` measure live here, all with atoms at
``u in 2^-n Z`` and exponent ``gamma' d_gamma / (2 gamma)``:

* ``profile``: increments ``|D(z, u) - D(z, u+)|`` of a distance profile;
* ``local_proxy``: ``D(u, u+; half-disk of radius 2^-n about the midpoint)``;
* ``busemann``: far-tree Busemann increments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gff import DomainError, GridSpec
from .metric import GeodesicTree, MetricGraph, ResolutionError, restricted_distance
from .params import LqgParams, normalization_exponent, variation_exponent

__all__ = [
    "DistanceProfile",
    "VariationMeasure",
    "distance_profile",
    "dyadic_points",
    "variation_measure",
    "local_proxy_measure",
    "busemann_variation_measure",
    "MIN_CELLS_PER_LEVEL",
]

MIN_CELLS_PER_LEVEL = 8


@dataclass(frozen=True)
class DistanceProfile:
    xs: np.ndarray
    distances: np.ndarray
    spacing: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.distances)):
            raise ValueError("profile distances must be finite")

    def at(self, x):
        k = int(round((x - self.xs[0]) / self.spacing))
        if not 0 <= k < self.xs.size or abs(self.xs[k] - x) > 1e-9 * self.spacing:
            raise DomainError(f"x = {x!r} is not a profile point")
        return float(self.distances[k])


@dataclass(frozen=True)
class VariationMeasure:
    """Atomic measure on the dyadic points ``u`` of one level.

    ``flags`` is an optional boolean array aligned with ``points`` (good or
    coalesced markers, depending on the flavour).
    """

    n: int
    interval: tuple
    points: np.ndarray
    atoms: np.ndarray
    flavor: str = "profile"
    flags: np.ndarray | None = None

    def total(self):
        return float(np.sum(self.atoms))

    def mass(self, lo, hi, where=None):
        """Mass of atoms with ``lo <= u < hi``, optionally restricted by a boolean array."""
        sel = (self.points >= lo - 1e-12) & (self.points < hi - 1e-12)
        if where is not None:
            sel &= np.asarray(where, dtype=bool)
        return float(np.sum(self.atoms[sel]))


def distance_profile(tree: GeodesicTree, interval) -> DistanceProfile:
    """Read ``dist`` at every boundary vertex in the closed ``interval``."""
    lo, hi = interval
    spec = tree.spec
    xs = spec.xs()
    tol = 1e-9 * spec.spacing
    if lo < xs[0] - tol or hi > xs[-1] + tol:
        raise DomainError(f"interval {interval!r} outside the grid")
    cols = np.flatnonzero((xs >= lo - tol) & (xs <= hi + tol))
    d = tree.dist[cols]
    if not np.all(np.isfinite(d)):
        raise DomainError("interval leaves the tree's mask")
    return DistanceProfile(xs[cols], d.copy(), spec.spacing)


def _check_level(spacing, n):
    step = 2.0 ** (-n)
    ratio = step / spacing
    if abs(ratio - round(ratio)) > 1e-9 * ratio:
        raise ValueError(f"lattice spacing {spacing!r} does not divide 2^-{n}")
    return int(round(ratio))


def dyadic_points(lo, hi, n, spacing, origin_x=0.0, right_limit=None):
    """Points ``u`` of ``2^-n Z`` in ``[lo, hi]`` with ``u + 2^-n <= right_limit``.

    ``right_limit`` defaults to ``hi``, i.e. the right-most term is skipped
    when ``u+`` leaves the interval. Raises if the level is not aligned with
    the lattice.
    """
    _check_level(spacing, n)
    step = 2.0 ** (-n)
    off = origin_x / spacing
    if abs(off - round(off)) > 1e-9:
        raise ValueError("lattice origin is not on the dyadic grid")
    if right_limit is None:
        right_limit = hi
    k0 = math.ceil(lo / step - 1e-9)
    k1 = math.floor(hi / step + 1e-9)
    us = step * np.arange(k0, k1 + 1)
    return us[us + step <= right_limit + 1e-12 * max(1.0, abs(right_limit))]


def variation_measure(profile: DistanceProfile, n: int, params: LqgParams, interval=None) -> VariationMeasure:
    """Level-``n`` variation measure of a profile.

    Atoms ``2^{-n (1 - psi(gamma'/gamma))} |D(u) - D(u+)|^{gamma' d / (2 gamma)}``
    for ``u`` in ``2^-n Z`` within ``interval``; terms whose ``u+`` leaves the
    profile are skipped.
    """
    if interval is None:
        interval = (float(profile.xs[0]), float(profile.xs[-1]))
    lo, hi = interval
    us = dyadic_points(lo, hi, n, profile.spacing, profile.xs[0], right_limit=float(profile.xs[-1]))
    step = 2.0 ** (-n)
    inc = np.array([profile.at(u) - profile.at(u + step) for u in us])
    norm = 2.0 ** (-n * normalization_exponent(params))
    atoms = norm * np.abs(inc) ** variation_exponent(params)
    return VariationMeasure(n, (lo, hi), us, atoms, "profile")


def local_proxy_measure(graph: MetricGraph, n: int, params: LqgParams, interval) -> VariationMeasure:
    """Atoms built from ``D(u, u+; half-disk of radius 2^-n about (u + u+)/2)``."""
    spec = graph.spec
    cells = _check_level(spec.spacing, n)
    if cells < MIN_CELLS_PER_LEVEL:
        raise ResolutionError(f"level {n} spans {cells} cells; need >= {MIN_CELLS_PER_LEVEL}")
    lo, hi = interval
    us = dyadic_points(lo, hi, n, spec.spacing, spec.origin_x)
    step = 2.0 ** (-n)
    d = np.array([restricted_distance(graph, u, u + step, radius=step) for u in us])
    norm = 2.0 ** (-n * normalization_exponent(params))
    return VariationMeasure(n, (lo, hi), us, norm * d ** variation_exponent(params), "local_proxy")


def busemann_variation_measure(records, n: int, params: LqgParams, interval) -> VariationMeasure:
    """Atoms ``|B(u, u+)|^exponent``; ``flags`` marks pairs that coalesced."""
    lo, hi = interval
    recs = [r for r in records if lo - 1e-12 <= r.u <= hi + 1e-12 and r.u_plus <= hi + 1e-12]
    us = np.array([r.u for r in recs], dtype=float)
    b = np.array([0.0 if r.u == r.u_plus else r.busemann for r in recs], dtype=float)
    flags = np.array([r.coalesced for r in recs], dtype=bool)
    norm = 2.0 ** (-n * normalization_exponent(params))
    return VariationMeasure(n, (lo, hi), us, norm * np.abs(b) ** variation_exponent(params), "busemann", flags)
