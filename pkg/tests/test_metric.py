import heapq
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lqglab.gff import DomainError, FieldGrid, GridSpec, sample_grid
from lqglab.metric import (
    DIRECTIONS,
    GeodesicTree,
    ResolutionError,
    build_graph,
    calibrate_a_eps,
    distance,
    half_disk_mask,
    heat_kernel,
    mollify,
    restricted_distance,
    shortest_paths,
)
from lqglab.params import LqgParams

P = LqgParams()


def _dense_mirror_blur(values, kern):
    # direct double sum with mirror indexing (-1 -> 1, n -> n - 2)
    ny, nx = values.shape
    r = kern.size // 2

    def refl(i, n):
        period = 2 * (n - 1)
        i = i % period
        return i if i < n else period - i

    out = np.zeros_like(values)
    for j in range(ny):
        for i in range(nx):
            s = 0.0
            for a in range(-r, r + 1):
                for b in range(-r, r + 1):
                    s += kern[a + r] * kern[b + r] * values[refl(j + a, ny), refl(i + b, nx)]
            out[j, i] = s
    return out


def test_heat_kernel_normalized():
    for s in (0.5, 1.0, 2.7):
        k = heat_kernel(s)
        assert k.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.allclose(k, k[::-1])
        assert k.size == 2 * math.ceil(4 * s) + 1


def test_mollify_against_dense_convolution():
    spec = GridSpec(32, 32, 1 / 16)
    f = sample_grid(spec, 3)
    eps = 2 / 16
    got = mollify(f, eps).values
    want = _dense_mirror_blur(f.values, heat_kernel(eps / (math.sqrt(2) * spec.spacing)))
    assert np.max(np.abs(got - want)) <= 1e-12


def test_mollify_preserves_constants_and_rejects_fine_scale():
    spec = GridSpec(16, 8, 1 / 8)
    c = FieldGrid(spec, np.full(spec.shape, 2.5))
    assert np.allclose(mollify(c, 0.25).values, 2.5, atol=1e-14)
    with pytest.raises(ResolutionError):
        mollify(c, 1 / 16)


def _oracle_distances(values, spacing, xi, src):
    # plain-python heap Dijkstra on the same weight rule
    ny, nx = values.shape
    adj = {v: [] for v in range(nx * ny)}

    def mid(j, i, dr, dc):
        if dr == 0 or dc == 0:
            return 0.5 * (values[j, i] + values[j + dr, i + dc])
        j0, i0 = min(j, j + dr), min(i, i + dc)
        return 0.25 * (values[j0, i0] + values[j0 + 1, i0] + values[j0, i0 + 1] + values[j0 + 1, i0 + 1])

    for j in range(ny):
        for i in range(nx):
            for dr, dc, ln in DIRECTIONS:
                jj, ii = j + dr, i + dc
                if 0 <= jj < ny and 0 <= ii < nx:
                    w = spacing * ln * math.exp(xi * mid(j, i, dr, dc))
                    adj[j * nx + i].append((jj * nx + ii, w))
                    adj[jj * nx + ii].append((j * nx + i, w))
    dist = [math.inf] * (nx * ny)
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for u, w in adj[v]:
            if d + w < dist[u]:
                dist[u] = d + w
                heapq.heappush(heap, (d + w, u))
    return np.array(dist), adj


def test_shortest_paths_against_oracle():
    spec = GridSpec(12, 8, 1 / 4)
    f = sample_grid(spec, 21)
    g = build_graph(f, P, spec.spacing)
    tree = shortest_paths(g, [5])
    want, adj = _oracle_distances(g.smoothed, spec.spacing, P.xi, 5)
    assert np.allclose(tree.dist, want, rtol=1e-12)
    # predecessors are tight, minimal-index edges
    for v in range(spec.size):
        if v == 5:
            assert tree.pred[v] == -1
            continue
        tight = [u for u, _ in adj[v] if tree.dist[u] + g.edge_weight(u, v) == tree.dist[v]]
        assert tree.pred[v] == min(tight)


def test_enumerated_paths_small_grid():
    # brute force over simple paths on a 3x3 grid
    spec = GridSpec(3, 3, 1.0)
    rng = np.random.default_rng(4)
    f = FieldGrid(spec, rng.normal(size=spec.shape))
    g = build_graph(f, P, 1.0)
    _, adj = _oracle_distances(g.smoothed, 1.0, P.xi, 0)
    best = [math.inf] * 9

    def walk(v, seen, d):
        best[v] = min(best[v], d)
        for u, w in adj[v]:
            if u not in seen:
                walk(u, seen | {u}, d + w)

    walk(0, {0}, 0.0)
    assert np.allclose(shortest_paths(g, [0]).dist, best, rtol=1e-12)


def test_zero_field_boundary_distance():
    spec = GridSpec(32, 8, 1 / 8)
    g = build_graph(FieldGrid(spec, np.zeros(spec.shape)), P, 1 / 8)
    t = shortest_paths(g, [spec.vertex(-1.0)])
    assert distance(t, spec.vertex(1.0)) == pytest.approx(2.0, abs=1e-12)
    assert distance(t, spec.vertex(-1.0, 0.5)) == pytest.approx(0.5, abs=1e-12)


@given(st.floats(-3, 3))
def test_weyl_scaling(c):
    spec = GridSpec(16, 8, 1 / 8)
    f = sample_grid(spec, 2)
    t0 = shortest_paths(build_graph(f, P, 1 / 8), [0])
    t1 = shortest_paths(build_graph(f.with_values(f.values + c), P, 1 / 8), [0])
    assert np.allclose(t1.dist, math.exp(P.xi * c) * t0.dist, rtol=1e-10)


def test_multi_source_is_min():
    spec = GridSpec(16, 8, 1 / 8)
    g = build_graph(sample_grid(spec, 8), P, 1 / 8)
    a, b = shortest_paths(g, [3]), shortest_paths(g, [90])
    both = shortest_paths(g, [90, 3])
    assert np.array_equal(both.dist, np.minimum(a.dist, b.dist))
    assert np.array_equal(both.sources, [3, 90])


def test_symmetry_and_triangle():
    spec = GridSpec(16, 8, 1 / 8)
    g = build_graph(sample_grid(spec, 9), P, 1 / 8)
    trees = [shortest_paths(g, [v]) for v in (0, 37, 100)]
    D = np.array([[t.dist[v] for v in (0, 37, 100)] for t in trees])
    assert np.allclose(D, D.T, rtol=1e-12)
    assert D[0, 2] <= D[0, 1] + D[1, 2] + 1e-12


def test_source_validation():
    spec = GridSpec(8, 4, 1 / 4)
    g = build_graph(sample_grid(spec, 1), P, 1 / 4)
    with pytest.raises(ValueError):
        shortest_paths(g, [])
    with pytest.raises(DomainError):
        shortest_paths(g, [spec.size])
    m = np.ones(spec.shape, bool)
    m[0, 0] = False
    with pytest.raises(DomainError):
        shortest_paths(g.with_mask(m), [0])
    with pytest.raises(ValueError):
        build_graph(sample_grid(spec, 1), P, 1 / 4, a_eps=0)


def test_mask_blocks_and_unreachable():
    spec = GridSpec(8, 4, 1 / 4)
    m = np.ones(spec.shape, bool)
    m[:, 4] = False
    g = build_graph(sample_grid(spec, 1), P, 1 / 4, mask=m)
    t = shortest_paths(g, [0])
    assert np.isinf(t.dist[7]) and t.pred[7] == -1


def test_tree_roundtrip():
    spec = GridSpec(8, 4, 1 / 4)
    g = build_graph(sample_grid(spec, 1), P, 1 / 4)
    t = shortest_paths(g, [0, 9])
    u = GeodesicTree.from_bytes(t.to_bytes())
    assert u.spec == t.spec
    assert np.array_equal(u.dist, t.dist) and np.array_equal(u.pred, t.pred) and np.array_equal(u.sources, t.sources)
    with pytest.raises(ValueError):
        GeodesicTree.from_bytes(b"XXXX" + t.to_bytes()[4:])


def test_restricted_distance():
    spec = GridSpec(64, 32, 1 / 16)
    g = build_graph(sample_grid(spec, 4), P, 1 / 16)
    full = shortest_paths(g, [spec.vertex(0.0)]).dist[spec.vertex(0.5)]
    r = restricted_distance(g, 0.0, 0.5)
    assert r >= full - 1e-12
    assert restricted_distance(g, 0.0, 0.5, radius=1.0) <= r + 1e-12
    assert restricted_distance(g, 0.25, 0.25) == 0.0
    with pytest.raises(DomainError):
        restricted_distance(g, 1.5, 1.9, radius=2.0)
    zero = build_graph(FieldGrid(spec, np.zeros(spec.shape)), P, 1 / 16)
    assert restricted_distance(zero, 0.0, 0.5) == pytest.approx(0.5, abs=1e-12)


def test_half_disk_mask():
    spec = GridSpec(9, 5, 1.0)
    m = half_disk_mask(spec, 0.0, 2.0)
    assert m[0, 2:7].all() and not m[0, 1] and m[2, 4] and not m[2, 5]


def test_calibrate_a_eps():
    spec = GridSpec(48, 24, 1 / 16)
    zero = lambda sp, s: FieldGrid(sp, np.zeros(sp.shape))
    assert calibrate_a_eps(P, 1 / 16, spec, 50, 0, sampler=zero) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        calibrate_a_eps(P, 1 / 16, spec, 10, 0)
    neg = lambda sp, s: FieldGrid(sp, np.full(sp.shape, -1e4))
    with pytest.raises(ArithmeticError):
        calibrate_a_eps(P, 1 / 16, spec, 50, 0, sampler=neg)
