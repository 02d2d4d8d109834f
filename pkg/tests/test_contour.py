"""Contour segments, graded splitting, and panel bookkeeping."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perch.contour import Segment, PanelSet, build_panels, split_points
from perch.errors import BadGeometry


def test_segment_validation():
    with pytest.raises(BadGeometry):
        Segment("line", a=1 + 1j, b=1 + 1j)
    with pytest.raises(BadGeometry):
        Segment("arc", center=0j, radius=-1.0, phi1=0.0, phi2=1.0)
    with pytest.raises(BadGeometry):
        Segment("blob")


def test_segment_point_and_length():
    s = Segment("line", a=0j, b=3 + 4j)
    assert s.length == 5.0
    assert s.point(0.5) == 1.5 + 2j
    arc = Segment("arc", center=1j, radius=2.0, phi1=0.0, phi2=np.pi / 2)
    assert abs(arc.length - np.pi) < 1e-15
    assert abs(arc.point(1.0) - (1j + 2j)) < 1e-15


def test_split_points_graded_end():
    seg = Segment("line", a=0j, b=1 + 0j, grade_end=True)
    us = split_points(seg, target_len=0.5, levels=3, ratio=0.5)
    assert us[0] == 0.0 and us[-1] == 1.0
    assert np.all(np.diff(us) > 0)
    gaps = np.diff(us)
    # graded end: last gaps halve toward u=1
    assert gaps[-1] < gaps[-2] < gaps[-3]
    assert abs(gaps[-2] / gaps[-1] - 2.0) < 1e-12


def test_split_points_graded_both_ends():
    seg = Segment("line", a=-1 + 0j, b=1 + 0j, grade_start=True, grade_end=True)
    us = split_points(seg, target_len=0.7, levels=3, ratio=0.5)
    gaps = np.diff(us)
    assert gaps[0] < gaps[1] and gaps[-1] < gaps[-2]


def test_panelset_bookkeeping():
    segs = [
        Segment("line", a=-1 + 0j, b=0j, label="left"),
        Segment("arc", center=0j, radius=0.5, phi1=0.0, phi2=np.pi, label="top"),
    ]
    ps = build_panels(segs, order=6, target_len=0.4)
    assert ps.n == sum(len(p.nodes) for p in ps.panels)
    assert ps.offsets[-1] == ps.n
    for q in range(len(ps.panels)):
        sl = ps.node_slice(q)
        np.testing.assert_array_equal(ps.nodes[sl], ps.panels[q].nodes)
        assert ps.panel_of_node(sl.start) is ps.panels[q]
    labels = {p.label for p in ps.panels}
    assert labels == {"left", "top"}


def test_per_label_len_overrides():
    segs = [
        Segment("line", a=0j, b=2 + 0j, label="coarse"),
        Segment("line", a=0j, b=2j, label="fine"),
    ]
    ps = build_panels(segs, order=4, target_len=1.0, per_label_len={"fine": 0.25})
    n_coarse = sum(1 for p in ps.panels if p.label == "coarse")
    n_fine = sum(1 for p in ps.panels if p.label == "fine")
    assert n_coarse == 2
    assert n_fine == 8


def test_arc_panel_nodes_lie_on_circle():
    seg = Segment("arc", center=2 - 1j, radius=0.7, phi1=1.0, phi2=-0.5)
    ps = build_panels([seg], order=8, target_len=0.3)
    np.testing.assert_allclose(np.abs(ps.nodes - (2 - 1j)), 0.7, atol=1e-14)
    # clockwise travel: weights integrate dz, so the sum telescopes to the
    # endpoint difference of z itself
    total = np.sum(ps.weights)
    want = 0.7 * (np.exp(-0.5j) - np.exp(1.0j))
    assert abs(total - want) < 1e-13


def test_min_gap_near():
    ps = build_panels([Segment("line", a=0j, b=1 + 0j)], order=4, target_len=1.0)
    k = ps.nodes[1] + 0.01j
    assert abs(ps.min_gap_near(k) - 0.01) < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.9),
       st.integers(min_value=1, max_value=5))
def test_weights_integrate_dz(target, order_bump):
    # sum of complex weights along any segment equals b - a exactly
    seg = Segment("line", a=-0.3 + 0.2j, b=1.1 - 0.7j)
    ps = build_panels([seg], order=3 + order_bump, target_len=target)
    np.testing.assert_allclose(np.sum(ps.weights), seg.b - seg.a, atol=1e-13)
