"""LFPP weight graphs on the 8-neighbour lattice and their shortest paths.

Edge weights are ``len(e) * exp(xi * h*(midpoint)) / a_eps`` where ``h*`` is
the field blurred by a discrete heat kernel of standard deviation
``epsilon / sqrt(2)`` (reflected across the boundary row). Distances come
from Dijkstra; predecessor ties are resolved by smallest vertex index so
geodesic trees are reproducible.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .gff import DomainError, FieldGrid, GridSpec, sample_grid
from .params import LqgParams

__all__ = [
    "MetricGraph",
    "GeodesicTree",
    "ResolutionError",
    "heat_kernel",
    "mollify",
    "build_graph",
    "shortest_paths",
    "distance",
    "restricted_distance",
    "calibrate_a_eps",
    "half_disk_mask",
    "DIRECTIONS",
]

# (drow, dcol, length in lattice units); undirected edges, one entry per direction
DIRECTIONS = ((0, 1, 1.0), (1, 0, 1.0), (1, 1, math.sqrt(2.0)), (1, -1, math.sqrt(2.0)))


class ResolutionError(ValueError):
    """Requested scale is finer than the lattice can resolve."""


def heat_kernel(sigma: float) -> np.ndarray:
    """Sampled, normalized 1D Gaussian with standard deviation ``sigma`` (grid units).

    The support is truncated at ``ceil(4 sigma)`` cells on each side.
    """
    radius = max(1, int(math.ceil(4.0 * sigma)))
    k = np.arange(-radius, radius + 1, dtype=float)
    w = np.exp(-0.5 * (k / sigma) ** 2)
    return w / w.sum()


def mollify(field: FieldGrid, epsilon: float) -> FieldGrid:
    """Convolve with the heat kernel at time ``epsilon**2 / 2``.

    Separable Gaussian blur with ``sigma = epsilon / (sqrt(2) * spacing)``
    cells. Every edge of the box uses mirror reflection, which on the
    boundary row is the Neumann reflection of the half-plane field.
    """
    if epsilon < field.spacing * (1 - 1e-12):
        raise ResolutionError(f"epsilon={epsilon!r} is below the lattice spacing {field.spacing!r}")
    sigma = epsilon / (math.sqrt(2.0) * field.spacing)
    kern = heat_kernel(sigma)
    out = ndimage.correlate1d(field.values, kern, axis=0, mode="mirror")
    out = ndimage.correlate1d(out, kern, axis=1, mode="mirror")
    return field.with_values(out, normalized=field.normalized)


@dataclass(frozen=True)
class MetricGraph:
    """Undirected 8-neighbour lattice with LFPP weights.

    ``weights[k]`` holds the weights of direction ``DIRECTIONS[k]`` for edges
    leaving each vertex (shape of the valid sub-block). ``mask`` restricts the
    graph to an induced subgraph; ``None`` keeps every vertex.
    """

    spec: GridSpec
    smoothed: np.ndarray
    weights: tuple
    xi: float
    epsilon: float
    a_eps: float
    mask: np.ndarray | None = None

    @property
    def n_vertices(self):
        return self.spec.size

    def with_mask(self, mask):
        if mask is not None:
            mask = np.asarray(mask, dtype=bool).reshape(self.spec.shape)
            if not mask.any():
                raise ValueError("empty mask")
        return MetricGraph(self.spec, self.smoothed, self.weights, self.xi, self.epsilon, self.a_eps, mask)

    def window(self, i0, i1, j1, mask=None):
        """Sub-graph on columns ``i0:i1`` and rows ``0:j1`` (boundary row kept)."""
        if i0 < 0 or i1 > self.spec.nx or j1 > self.spec.ny or i1 - i0 < 2 or j1 < 2:
            raise DomainError("window exceeds the grid")
        spec = self.spec.window(i0, i1, j1)
        sm = self.smoothed[:j1, i0:i1]
        ws = _edge_weights(sm, spec.spacing, self.xi, self.a_eps)
        base = None if self.mask is None else self.mask[:j1, i0:i1]
        if mask is not None:
            mask = np.asarray(mask, dtype=bool).reshape(spec.shape)
            base = mask if base is None else (base & mask)
        g = MetricGraph(spec, sm, ws, self.xi, self.epsilon, self.a_eps, None)
        return g.with_mask(base) if base is not None else g

    @cached_property
    def _edges(self):
        ny, nx = self.spec.shape
        idx = np.arange(ny * nx).reshape(ny, nx)
        tails, heads, ws = [], [], []
        for (dr, dc, _), w in zip(DIRECTIONS, self.weights):
            a, b = _pair_blocks(idx, dr, dc)
            keep = np.ones(a.shape, dtype=bool)
            if self.mask is not None:
                ma, mb = _pair_blocks(self.mask, dr, dc)
                keep = ma & mb
            tails.append(a[keep]); heads.append(b[keep]); ws.append(w[keep])
        return np.concatenate(tails), np.concatenate(heads), np.concatenate(ws)

    def edge_list(self):
        """``(tail, head, weight)`` arrays, one entry per undirected edge inside the mask."""
        return self._edges

    @cached_property
    def _csr(self):
        t, h, w = self._edges
        n = self.n_vertices
        return csr_matrix((np.concatenate([w, w]), (np.concatenate([t, h]), np.concatenate([h, t]))), shape=(n, n))

    def csr(self):
        return self._csr

    def edge_weight(self, u, v):
        """Weight of the lattice edge ``u - v``; raises if they are not neighbours."""
        nx = self.spec.nx
        (ju, iu), (jv, iv) = divmod(int(u), nx), divmod(int(v), nx)
        if (jv, iv) < (ju, iu):
            (ju, iu), (jv, iv) = (jv, iv), (ju, iu)
        dr, dc = jv - ju, iv - iu
        for (r, c, _), w in zip(DIRECTIONS, self.weights):
            if (r, c) == (dr, dc):
                return float(w[ju, iu + min(c, 0)])
        raise ValueError(f"vertices {u} and {v} are not lattice neighbours")


def _pair_blocks(arr, dr, dc):
    ny, nx = arr.shape
    if dc >= 0:
        return arr[: ny - dr, : nx - dc], arr[dr:, dc:]
    return arr[: ny - dr, -dc:], arr[dr:, : nx + dc]


def _edge_weights(smoothed, spacing, xi, a_eps):
    h = smoothed
    mids = (
        0.5 * (h[:, :-1] + h[:, 1:]),
        0.5 * (h[:-1, :] + h[1:, :]),
        0.25 * (h[:-1, :-1] + h[:-1, 1:] + h[1:, :-1] + h[1:, 1:]),
    )
    mids = (mids[0], mids[1], mids[2], mids[2])
    out = []
    for (_, _, length), m in zip(DIRECTIONS, mids):
        out.append((spacing * length / a_eps) * np.exp(xi * m))
    for w in out:
        w.flags.writeable = False
    return tuple(out)


def build_graph(field: FieldGrid, params: LqgParams, epsilon: float, a_eps: float = 1.0,
                mask=None, smoothed: FieldGrid | None = None) -> MetricGraph:
    """LFPP graph of ``field`` at mollification scale ``epsilon``.

    Pass ``smoothed`` to reuse an already mollified copy of ``field``.
    """
    if not (a_eps > 0 and math.isfinite(a_eps)):
        raise ValueError(f"a_eps must be positive, got {a_eps!r}")
    sm = mollify(field, epsilon) if smoothed is None else smoothed
    ws = _edge_weights(sm.values, field.spacing, params.xi, a_eps)
    for w in ws:
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise ArithmeticError("edge weights overflowed; field values too large for exp(xi * h)")
    g = MetricGraph(field.spec, sm.values, ws, params.xi, float(epsilon), float(a_eps))
    return g.with_mask(mask) if mask is not None else g


@dataclass(frozen=True)
class GeodesicTree:
    """Shortest-path forest from a source set.

    ``pred[v] == -1`` for sources and unreachable vertices; ``dist`` is
    ``inf`` for the latter.
    """

    spec: GridSpec
    sources: np.ndarray
    dist: np.ndarray
    pred: np.ndarray

    def is_source(self, v):
        return self.pred[v] < 0 and self.dist[v] == 0.0

    def to_bytes(self) -> bytes:
        s = self.spec
        head = struct.pack("<4sQQddQ", b"LQGT", s.nx, s.ny, s.spacing, s.origin_x, self.sources.size)
        pred = np.where(self.pred < 0, 0xFFFFFFFF, self.pred).astype("<u4")
        return head + self.sources.astype("<u8").tobytes() + self.dist.astype("<f8").tobytes() + pred.tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "GeodesicTree":
        hs = struct.calcsize("<4sQQddQ")
        magic, nx, ny, spacing, origin_x, ns = struct.unpack_from("<4sQQddQ", raw)
        if magic != b"LQGT":
            raise ValueError("not a serialized geodesic tree")
        n = nx * ny
        off = hs
        sources = np.frombuffer(raw, "<u8", ns, off).astype(np.int64); off += 8 * ns
        dist = np.frombuffer(raw, "<f8", n, off).copy(); off += 8 * n
        pred = np.frombuffer(raw, "<u4", n, off).astype(np.int64)
        pred[pred == 0xFFFFFFFF] = -1
        return cls(GridSpec(nx, ny, spacing, origin_x), sources, dist, pred)


def _min_index_predecessors(graph: MetricGraph, dist, is_src):
    # pred[v] = smallest u with dist[u] + w(u, v) == dist[v]
    n = graph.n_vertices
    best = np.full(n, n, dtype=np.int64)
    t, h, w = graph.edge_list()
    for a, b in ((t, h), (h, t)):
        tight = np.isfinite(dist[a]) & (dist[a] + w == dist[b])
        np.minimum.at(best, b[tight], a[tight])
    best[is_src] = n
    best[~np.isfinite(dist)] = n
    best[best == n] = -1
    return best


def shortest_paths(graph: MetricGraph, sources) -> GeodesicTree:
    """Exact multi-source Dijkstra with deterministic predecessor ties."""
    src = np.unique(np.atleast_1d(np.asarray(sources, dtype=np.int64)))
    if src.size == 0:
        raise ValueError("empty source set")
    if src.min() < 0 or src.max() >= graph.n_vertices:
        raise DomainError("source vertex outside the graph")
    if graph.mask is not None and not np.all(graph.mask.ravel()[src]):
        raise DomainError("source vertex outside the mask")
    dist = dijkstra(graph.csr(), directed=True, indices=src, min_only=True)
    dist = np.asarray(dist, dtype=float)
    is_src = np.zeros(graph.n_vertices, dtype=bool)
    is_src[src] = True
    dist[is_src] = 0.0
    pred = _min_index_predecessors(graph, dist, is_src)
    return GeodesicTree(graph.spec, src, dist, pred)


def distance(tree: GeodesicTree, target: int) -> float:
    return float(tree.dist[int(target)])


def half_disk_mask(spec: GridSpec, center_x: float, radius: float) -> np.ndarray:
    """Closed half-disk ``|v - center_x| <= radius`` on the lattice."""
    xs = spec.xs()[None, :]
    ys = spec.ys()[:, None]
    return (xs - center_x) ** 2 + ys ** 2 <= radius * radius * (1 + 1e-12)


def restricted_distance(graph: MetricGraph, x: float, y: float, radius: float | None = None) -> float:
    """``D(x, y; half-disk of given radius about (x + y) / 2)`` for boundary points.

    ``radius`` defaults to ``|y - x|``. Dijkstra runs on the smallest window
    containing the half-disk.
    """
    spec = graph.spec
    if x == y:
        return 0.0
    if radius is None:
        radius = abs(y - x)
    m = 0.5 * (x + y)
    cells = int(math.ceil(radius / spec.spacing - 1e-9))
    ic = (m - spec.origin_x) / spec.spacing
    i0 = int(math.floor(ic - cells - 1e-9))
    i1 = int(math.ceil(ic + cells + 1e-9)) + 1
    j1 = cells + 1
    if i0 < 0 or i1 > spec.nx or j1 > spec.ny:
        raise DomainError(f"half-disk of radius {radius!r} about {m!r} exits the grid")
    sub = graph.window(i0, i1, j1)
    sub = sub.with_mask(half_disk_mask(sub.spec, m, radius) if sub.mask is None else sub.mask & half_disk_mask(sub.spec, m, radius))
    a = sub.spec.vertex(x)
    b = sub.spec.vertex(y)
    if a == b:
        return 0.0
    d = dijkstra(sub.csr(), directed=True, indices=a, min_only=True)
    return float(d[b])


def calibrate_a_eps(params: LqgParams, epsilon: float, spec: GridSpec, trials: int, seed: int,
                    sampler=None) -> float:
    """Median raw (``a_eps = 1``) LFPP distance between two bulk points a unit apart.

    The points are ``(c - 1/2, y0)`` and ``(c + 1/2, y0)`` with ``c`` the
    grid's centre column and ``y0`` half the grid height. Using the returned
    value as ``a_eps`` makes the median unit distance about 1. ``sampler``
    maps ``(spec, seed)`` to a field and defaults to the spectral sampler.
    """
    if trials < 50:
        raise ValueError("calibration needs at least 50 trials")
    if sampler is None:
        sampler = lambda sp, s: sample_grid(sp, s, method="spectral")
    xc = spec.origin_x + (spec.nx // 2) * spec.spacing
    y0 = round((spec.ny // 2)) * spec.spacing
    half = round(0.5 / spec.spacing) * spec.spacing
    u = spec.vertex(xc - half, y0)
    v = spec.vertex(xc + half, y0)
    ss = np.random.SeedSequence(int(seed))
    raw = []
    for child in ss.spawn(int(trials)):
        s = int(child.generate_state(1, np.uint64)[0])
        g = build_graph(sampler(spec, s), params, epsilon, 1.0)
        d = dijkstra(g.csr(), directed=True, indices=u, min_only=True)
        raw.append(float(d[v]))
    raw = np.asarray(raw)
    if not np.all(np.isfinite(raw)) or np.any(raw <= 0):
        raise ArithmeticError("degenerate calibration samples (non-finite or non-positive distances)")
    return float(np.median(raw))
