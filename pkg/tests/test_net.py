"""Control-net construction and verification."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laxopt.model import Box, FiniteSet, ProductSet, gear_preset
from laxopt.net import (
    DeltaNet,
    NetBuildError,
    build,
    load_net,
    save_net,
    uniform_net,
    uniform_points,
    verify,
)

UNIT = Box(np.array([0.0]), np.array([1.0]))
GEARS = FiniteSet(np.array([[1.0], [2.0]]))
PRODUCT = ProductSet([GEARS, UNIT])


# ---------------------------------------------------------------------------
# construction examples


def test_finite_set_becomes_its_own_net():
    net = build(GEARS, 0.5)
    assert sorted(net.points.ravel().tolist()) == [1.0, 2.0]
    assert verify(GEARS, net).ok


def test_interval_net_at_awkward_delta():
    net = build(UNIT, 0.26)
    rep = verify(UNIT, net)
    assert rep.ok and rep.packing_ok and rep.covering_ok
    # a valid witness at this delta is {0, 0.5, 1}; whatever build returns
    # must cover at least as well
    assert net.size >= 3


def test_product_net_at_experiment_resolution():
    net = build(PRODUCT, 0.02)
    assert verify(PRODUCT, net).ok
    for g in (1.0, 2.0):
        rows = net.points[net.points[:, 0] == g]
        # open balls of radius 0.02 each cover at most 0.04 of the interval
        assert len(rows) >= 25


def test_uniform_product_net_has_a_hundred_points():
    net = uniform_net(PRODUCT, 0.02)
    assert net.size == 100
    for g in (1.0, 2.0):
        rows = np.sort(net.points[net.points[:, 0] == g][:, 1])
        assert len(rows) == 50
        assert rows[0] == 0.0 and rows[-1] == 1.0
    assert verify(PRODUCT, net).ok


def test_uniform_points_midpoint_collapse():
    pts = uniform_points(Box(np.array([0.0]), np.array([0.3])), 0.5)
    assert pts.shape == (1, 1)
    assert pts[0, 0] == pytest.approx(0.15)


# ---------------------------------------------------------------------------
# verification examples


def test_verify_accepts_the_witness_net():
    net = DeltaNet(0.26, np.array([[0.0], [0.5], [1.0]]))
    rep = verify(UNIT, net)
    assert rep.ok
    assert rep.min_pairwise == pytest.approx(0.5)


def test_verify_rejects_coverage_gap():
    net = DeltaNet(0.26, np.array([[0.0], [1.0]]))
    rep = verify(UNIT, net)
    assert not rep.ok
    assert rep.packing_ok and not rep.covering_ok


def test_verify_rejects_packing_violation():
    net = DeltaNet(0.26, np.array([[0.0], [0.1], [1.0]]))
    rep = verify(UNIT, net)
    assert not rep.ok
    assert not rep.packing_ok


# ---------------------------------------------------------------------------
# build-verify property across deltas and set shapes


@pytest.mark.parametrize("delta", [0.5, 0.1, 0.02])
@pytest.mark.parametrize(
    "controls",
    [UNIT, PRODUCT, Box(np.array([-1.0, 0.0]), np.array([1.0, 0.5]))],
    ids=["interval", "gear-product", "planar-box"],
)
def test_build_then_verify(controls, delta):
    assert verify(controls, build(controls, delta)).ok


def test_cardinality_is_nonincreasing_in_delta():
    sizes = [build(UNIT, d).size for d in (0.5, 0.26, 0.1, 0.05, 0.02)]
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))


@settings(max_examples=20, deadline=None)
@given(delta=st.floats(0.03, 0.6))
def test_build_verifies_for_arbitrary_delta(delta):
    assert verify(UNIT, build(UNIT, delta)).ok


def test_build_rejects_nonpositive_delta():
    with pytest.raises((ValueError, NetBuildError)):
        build(UNIT, 0.0)


# ---------------------------------------------------------------------------
# serialization


def test_net_round_trip(tmp_path):
    net = build(PRODUCT, 0.1)
    path = tmp_path / "net.csv"
    save_net(net, str(path))
    again = load_net(str(path), net.delta)
    assert np.array_equal(again.points, net.points)
    assert verify(PRODUCT, again).ok
    save_net(again, str(tmp_path / "net2.csv"))
    assert (tmp_path / "net.csv").read_bytes() == (tmp_path / "net2.csv").read_bytes()


def test_tampered_net_fails_verification(tmp_path):
    net = uniform_net(PRODUCT, 0.02)
    pts = net.points.copy()
    pts[3] = pts[2] + 1e-4
    rep = verify(PRODUCT, DeltaNet(net.delta, pts))
    assert not rep.ok


def test_preset_controls_accept_experiment_net():
    p = gear_preset()
    net = uniform_net(p.controls, 0.02)
    for a in net.points:
        assert p.controls.contains(a)
