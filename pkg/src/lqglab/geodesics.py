"""Geodesics read off predecessor maps, coalescence and Busemann proxies."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .gff import DomainError
from .metric import GeodesicTree
from .params import CoalescenceConfig

__all__ = [
    "UnreachableError",
    "CoalescenceRecord",
    "trace_geodesic",
    "coalescence_point",
    "passes_through",
    "coalescence_record",
    "coalescence_records",
    "classify_good",
    "busemann_diff",
    "far_arc_sources",
    "box_edge_sources",
]


class UnreachableError(LookupError):
    pass


def _check_reachable(tree, v):
    if not 0 <= v < tree.dist.size:
        raise DomainError(f"vertex {v} outside the tree")
    if not np.isfinite(tree.dist[v]):
        raise UnreachableError(f"vertex {v} is not reachable from the sources")


def trace_geodesic(tree: GeodesicTree, target: int) -> list[int]:
    """Vertices from ``target`` back to its source along the predecessor map."""
    v = int(target)
    _check_reachable(tree, v)
    path = [v]
    pred = tree.pred
    while pred[v] >= 0:
        v = int(pred[v])
        path.append(v)
    return path


def coalescence_point(tree: GeodesicTree, u: int, u_plus: int):
    """Lowest common ancestor of ``u`` and ``u_plus`` in the geodesic tree.

    Walks both predecessor chains upward, always advancing the endpoint that
    is farther from the sources. Returns ``None`` when the chains end at
    distinct sources.
    """
    a, b = int(u), int(u_plus)
    _check_reachable(tree, a)
    _check_reachable(tree, b)
    dist, pred = tree.dist, tree.pred
    while a != b:
        pa, pb = pred[a], pred[b]
        if pa < 0 and pb < 0:
            return None
        if pb < 0 or (pa >= 0 and dist[a] >= dist[b]):
            a = int(pa)
        else:
            b = int(pb)
    return a


def passes_through(tree: GeodesicTree, v: int, w: int) -> bool:
    """True iff ``w`` lies on the tree geodesic from ``v`` to its source."""
    v, w = int(v), int(w)
    dist, pred = tree.dist, tree.pred
    if not (np.isfinite(dist[v]) and np.isfinite(dist[w])):
        return False
    dw = dist[w]
    while v != w:
        if dist[v] < dw or pred[v] < 0:
            return False
        v = int(pred[v])
    return True


@dataclass(frozen=True)
class CoalescenceRecord:
    """Coalescence data of one dyadic pair ``(u, u_plus)`` in the far tree.

    ``coalescence_radius`` is the distance from the pair's midpoint to the
    meeting vertex ``w``; ``excursion`` is the largest distance from the
    midpoint reached by either geodesic before the meeting.
    """

    u: float
    u_plus: float
    vertex_u: int
    vertex_u_plus: int
    w: int | None
    coalescence_radius: float
    excursion: float
    busemann: float
    good: bool = False

    @property
    def coalesced(self):
        return self.w is not None


def _max_excursion(tree, v, w, centre):
    spec = tree.spec
    best = 0.0
    pred = tree.pred
    while True:
        best = max(best, abs(spec.point(v) - centre))
        if v == w:
            return best
        v = int(pred[v])


def busemann_diff(far_tree: GeodesicTree, u: int, u_plus: int) -> float:
    """Far-tree Busemann proxy ``dist[u] - dist[u_plus]``.

    When the geodesics of ``u`` and ``u_plus`` meet at ``w`` this is
    ``D(w, u) - D(w, u_plus)``: the shared segment cancels.
    """
    u, u_plus = int(u), int(u_plus)
    _check_reachable(far_tree, u)
    _check_reachable(far_tree, u_plus)
    if u == u_plus:
        return 0.0
    return float(far_tree.dist[u] - far_tree.dist[u_plus])


def coalescence_record(far_tree: GeodesicTree, u: float, n: int) -> CoalescenceRecord:
    spec = far_tree.spec
    step = 2.0 ** (-n)
    a = spec.vertex(u)
    b = spec.vertex(u + step)
    w = coalescence_point(far_tree, a, b)
    centre = complex(u + 0.5 * step, 0.0)
    if w is None:
        radius = float("inf")
        excursion = float("inf")
    else:
        radius = float(abs(spec.point(w) - centre))
        excursion = max(_max_excursion(far_tree, a, w, centre), _max_excursion(far_tree, b, w, centre))
    return CoalescenceRecord(u, u + step, a, b, w, radius, excursion, busemann_diff(far_tree, a, b))


def coalescence_records(far_tree: GeodesicTree, points, n: int) -> list[CoalescenceRecord]:
    return [coalescence_record(far_tree, float(u), n) for u in points]


def classify_good(records, n: int, cfg: CoalescenceConfig, reference_trees=(), radius_budget=None):
    """Mark records whose pair coalesces inside the level-``n`` budget.

    A pair is good when its far-tree geodesics meet at ``w`` with
    ``|w - midpoint| <= 2^{-n (1 - alpha2)}`` (ties count as good), both
    geodesic segments up to ``w`` stay within ``annulus_ratio`` times that
    radius, and ``w`` also lies on the geodesics from every tree in
    ``reference_trees`` to both endpoints. Returns new records.
    """
    budget = cfg.radius_budget(n) if radius_budget is None else float(radius_budget)
    contain = cfg.annulus_ratio * budget
    out = []
    for rec in records:
        good = rec.w is not None and rec.coalescence_radius <= budget and rec.excursion <= contain
        if good:
            for t in reference_trees:
                if not (passes_through(t, rec.vertex_u, rec.w) and passes_through(t, rec.vertex_u_plus, rec.w)):
                    good = False
                    break
        out.append(replace(rec, good=bool(good)))
    return out


def far_arc_sources(spec, centre: float, radius: float) -> np.ndarray:
    """Lattice vertices within one cell of the semicircle ``|v - centre| = radius``."""
    xs = spec.xs()[None, :]
    ys = spec.ys()[:, None]
    r = np.sqrt((xs - centre) ** 2 + ys ** 2)
    sel = np.abs(r - radius) <= 0.5 * spec.spacing
    if not sel.any():
        raise DomainError(f"far arc of radius {radius!r} about {centre!r} misses the grid")
    return np.flatnonzero(sel.ravel())


def box_edge_sources(spec) -> np.ndarray:
    """Top row plus left and right columns: the box boundary away from the real axis."""
    ny, nx = spec.shape
    idx = np.arange(ny * nx).reshape(ny, nx)
    return np.unique(np.concatenate([idx[-1], idx[1:, 0], idx[1:, -1]]))
