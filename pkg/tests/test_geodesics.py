import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lqglab.geodesics import (
    UnreachableError,
    box_edge_sources,
    busemann_diff,
    classify_good,
    coalescence_point,
    coalescence_record,
    coalescence_records,
    far_arc_sources,
    passes_through,
    trace_geodesic,
)
from lqglab.gff import DomainError, GridSpec, sample_grid
from lqglab.metric import GeodesicTree, build_graph, shortest_paths
from lqglab.params import CoalescenceConfig, LqgParams

# 4 x 2 lattice, spacing 1, origin -2:
#   row 1:  4  5  6  7
#   row 0:  0  1  2  3
SPEC = GridSpec(4, 2, 1.0)
PRED = np.array([4, 4, 6, 7, 5, 6, 7, -1])
DIST = np.array([4.5, 4.0, 2.0, 1.0, 1.5, 1.0, 0.5, 0.0])


def hand_tree(sources=(7,), pred=PRED, dist=DIST):
    return GeodesicTree(SPEC, np.array(sources), dist.copy(), pred.copy())


def test_trace_and_lca():
    t = hand_tree()
    assert trace_geodesic(t, 0) == [0, 4, 5, 6, 7]
    assert coalescence_point(t, 0, 1) == 4
    assert coalescence_point(t, 1, 0) == 4
    assert coalescence_point(t, 0, 2) == 6
    assert coalescence_point(t, 0, 3) == 7
    assert coalescence_point(t, 2, 2) == 2


def test_distinct_sources_do_not_coalesce():
    pred = PRED.copy()
    pred[3] = -1
    dist = DIST.copy()
    dist[3] = 0.0
    t = hand_tree((3, 7), pred, dist)
    assert coalescence_point(t, 0, 3) is None
    assert coalescence_point(t, 0, 2) == 6


def test_passes_through():
    t = hand_tree()
    assert passes_through(t, 0, 5) and passes_through(t, 0, 0)
    assert not passes_through(t, 2, 5)
    assert not passes_through(t, 5, 0)


def test_busemann_hand_value():
    t = hand_tree()
    # D(w, u) = 3, D(w, u+) = 2.5 with w = 4
    assert busemann_diff(t, 0, 1) == pytest.approx(0.5)
    assert busemann_diff(t, 1, 1) == 0.0


def test_record_and_classification():
    t = hand_tree()
    rec = coalescence_record(t, -2.0, 0)
    assert rec.coalesced and rec.w == 4
    assert rec.coalescence_radius == pytest.approx(math.sqrt(1.25))
    assert rec.excursion == pytest.approx(math.sqrt(1.25))
    cfg = CoalescenceConfig(0.25, 0.5)
    assert not classify_good([rec], 0, cfg)[0].good
    assert classify_good([rec], 0, cfg, radius_budget=1.2)[0].good
    assert classify_good([rec], 0, cfg, radius_budget=math.sqrt(1.25))[0].good
    # tight containment fails
    tight = CoalescenceConfig(0.25, 0.5, annulus_ratio=1.01)
    assert not classify_good([rec], 0, tight, radius_budget=1.0 / 1.0)[0].good
    # a reference tree whose geodesic from 0 avoids w
    other = hand_tree(pred=np.array([1, 2, 3, -1, 5, 6, 7, 3]), dist=DIST)
    assert not classify_good([rec], 0, cfg, reference_trees=[other], radius_budget=1.2)[0].good
    assert classify_good([rec], 0, cfg, reference_trees=[t], radius_budget=1.2)[0].good


def test_unreachable():
    dist = DIST.copy()
    dist[0] = np.inf
    pred = PRED.copy()
    pred[0] = -1
    t = hand_tree(pred=pred, dist=dist)
    with pytest.raises(UnreachableError):
        trace_geodesic(t, 0)
    with pytest.raises(DomainError):
        trace_geodesic(t, 99)
    assert not passes_through(t, 0, 4)


@given(st.integers(0, 2**32 - 1))
def test_random_tree_properties(seed):
    spec = GridSpec(24, 12, 1 / 8)
    g = build_graph(sample_grid(spec, seed), LqgParams(), 1 / 8)
    t = shortest_paths(g, box_edge_sources(spec))
    u, v = spec.vertex(-0.5), spec.vertex(0.25)
    path = trace_geodesic(t, u)
    length = sum(g.edge_weight(a, b) for a, b in zip(path, path[1:]))
    assert length == pytest.approx(t.dist[u], rel=1e-12)
    w = coalescence_point(t, u, v)
    if w is not None:
        assert w in path and w in trace_geodesic(t, v)
        pu = path[: path.index(w) + 1]
        pv = trace_geodesic(t, v)
        pv = pv[: pv.index(w) + 1]
        du = sum(g.edge_weight(a, b) for a, b in zip(pu, pu[1:]))
        dv = sum(g.edge_weight(a, b) for a, b in zip(pv, pv[1:]))
        assert busemann_diff(t, u, v) == pytest.approx(du - dv, abs=1e-12)
        # the meeting point is the lowest common vertex
        assert not (set(pu[:-1]) & set(pv[:-1]))


def test_records_list():
    spec = GridSpec(32, 16, 1 / 8)
    g = build_graph(sample_grid(spec, 1), LqgParams(), 1 / 8)
    t = shortest_paths(g, box_edge_sources(spec))
    recs = coalescence_records(t, [-1.0, -0.5, 0.0], 1)
    assert [r.u for r in recs] == [-1.0, -0.5, 0.0]
    assert all(r.u_plus == r.u + 0.5 for r in recs)


def test_sources():
    spec = GridSpec(8, 4, 1.0)
    s = box_edge_sources(spec)
    assert s.size == 8 + 2 + 2 and 0 not in s and 7 not in s and 31 in s
    arc = far_arc_sources(spec, 0.0, 2.0)
    pts = np.array([spec.point(v) for v in arc])
    assert np.all(np.abs(np.abs(pts) - 2.0) <= 0.5)
    with pytest.raises(DomainError):
        far_arc_sources(spec, 0.0, 50.0)
